/** DOM rendering for the judging interface; pure view over FlowView. */

import type { JudgeFlow, FlowView } from "./flow";

function element<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderApp(
  root: HTMLElement,
  flow: JudgeFlow,
  view: FlowView,
): void {
  root.replaceChildren();

  if (view.error) {
    const banner = element("div", "banner error");
    banner.append(
      element("span", "", `${view.error.code}: ${view.error.message}`),
    );
    const dismiss = element("button", "dismiss", "dismiss");
    dismiss.onclick = () => flow.dismissError();
    banner.append(dismiss);
    root.append(banner);
  }

  if (!view.state) {
    root.append(element("p", "hint", "No session yet."));
    return;
  }

  const header = element("div", "header");
  header.append(element("h2", "", "Which do you prefer?"));
  header.append(
    element(
      "span",
      "round",
      `round ${view.state.round} | status ${view.state.status}`,
    ),
  );
  root.append(header);

  const duel = element("div", "duel");
  if (view.left && view.right && view.state.status === "awaiting_feedback") {
    for (const side of ["left", "right"] as const) {
      const candidate = side === "left" ? view.left : view.right;
      const button = element("button", `choice ${side}`, candidate.label);
      button.disabled = view.busy;
      button.onclick = () => void flow.choose(side);
      duel.append(button);
    }
  } else {
    const next = element("button", "next", "propose a pair");
    next.disabled = view.busy || view.state.status === "closed";
    next.onclick = () => void flow.loadPair();
    duel.append(next);
  }
  root.append(duel);

  const report = element("div", "report");
  report.append(element("h3", "", "Current standing"));
  const table = element("table");
  const head = element("tr");
  for (const column of ["label", "mean", "sigma"]) {
    head.append(element("th", "", column));
  }
  table.append(head);
  for (const candidate of flow.rankedCandidates()) {
    const row = element("tr");
    row.append(element("td", "", candidate.label));
    row.append(element("td", "", candidate.mean.toFixed(3)));
    row.append(element("td", "", candidate.sigma.toFixed(3)));
    table.append(row);
  }
  report.append(table);
  if (view.report) {
    report.append(
      element("p", "best", `current best: ${view.report.best_label}`),
    );
  }
  root.append(report);

  const history = element("div", "history");
  history.append(element("h3", "", "History"));
  const list = element("ol");
  for (const entry of view.state.history) {
    const labels = view.state.labels;
    const winner = entry.winner_first ? labels[entry.first] : labels[entry.second];
    const loser = entry.winner_first ? labels[entry.second] : labels[entry.first];
    list.append(element("li", "", `${winner} beat ${loser}`));
  }
  history.append(list);
  root.append(history);
}
