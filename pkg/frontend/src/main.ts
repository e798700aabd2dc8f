/** Browser entry point: wire the flow to the page. */

import { SessionApi } from "./api";
import { JudgeFlow } from "./flow";
import { renderApp } from "./render";

function baseUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("service") ?? "http://127.0.0.1:8422";
}

function candidatesFromTextarea(raw: string) {
  return raw
    .split("\n")
    .map((line) => line.trim())
    .filter((line) => line.length > 0)
    .map((label) => ({ label }));
}

function bootstrap(): void {
  const root = document.getElementById("app");
  const setup = document.getElementById("setup");
  const input = document.getElementById("candidates") as HTMLTextAreaElement;
  const seedInput = document.getElementById("seed") as HTMLInputElement;
  const startButton = document.getElementById("start") as HTMLButtonElement;
  if (!root || !setup || !input || !seedInput || !startButton) return;

  const flow = new JudgeFlow(new SessionApi(baseUrl()));
  flow.onChange((view) => renderApp(root, flow, view));

  startButton.onclick = async () => {
    const candidates = candidatesFromTextarea(input.value);
    if (candidates.length < 2) {
      alert("enter at least two candidates, one per line");
      return;
    }
    const seed = Number.parseInt(seedInput.value, 10);
    await flow.start(candidates, Number.isFinite(seed) ? { seed } : {});
    if (flow.sessionId()) {
      setup.style.display = "none";
      await flow.loadPair();
    }
  };
}

bootstrap();
