/** Flow contracts against the protocol mock: echo, idempotency, no drift. */

import { describe, expect, it } from "vitest";

import { ApiError, SessionApi } from "../src/api";
import { JudgeFlow } from "../src/flow";
import { MockService } from "./mockService";

const CANDIDATES = ["a", "b", "c", "d"].map((label) => ({ label }));

function makeFlow(service: MockService, rng?: () => number) {
  const api = new SessionApi("http://mock", service.fetch);
  return { api, flow: new JudgeFlow(api, rng ?? (() => 0.25)) };
}

describe("session flow", () => {
  it("runs ten alternating clicks and the service history matches", async () => {
    const service = new MockService();
    const { flow } = makeFlow(service);
    await flow.start(CANDIDATES);
    for (let round = 0; round < 10; round++) {
      await flow.loadPair();
      expect(flow.view().state?.status).toBe("awaiting_feedback");
      await flow.choose(round % 2 === 0 ? "left" : "right");
      expect(flow.view().error).toBeNull();
    }
    const id = flow.sessionId()!;
    const session = service.sessions.get(id)!;
    expect(session.history).toHaveLength(10);
    expect(flow.view().state?.round).toBe(10);
    expect(flow.view().report?.round).toBe(10);
  });

  it("maps the clicked side back to the candidate index under randomized placement", async () => {
    // rng = 0.9 places the pair's first candidate on the right.
    const service = new MockService();
    const { flow } = makeFlow(service, () => 0.9);
    await flow.start(CANDIDATES);
    await flow.loadPair();
    const pair = flow.view().pair!;
    expect(flow.view().right?.index).toBe(pair.first);
    expect(flow.view().left?.index).toBe(pair.second);
    await flow.choose("right");
    const history = service.sessions.get(flow.sessionId()!)!.history;
    expect(history[0]).toEqual({
      first: pair.first,
      second: pair.second,
      winner_first: true,
    });
    expect(flow.placementLog[0]).toEqual({ round: 0, leftIsFirst: false });
  });

  it("ignores clicks while a request is in flight", async () => {
    const service = new MockService();
    const { flow } = makeFlow(service);
    await flow.start(CANDIDATES);
    await flow.loadPair();
    const first = flow.choose("left");
    const second = flow.choose("left"); // busy; resolves without a request
    await Promise.all([first, second]);
    expect(service.sessions.get(flow.sessionId()!)!.history).toHaveLength(1);
    expect(flow.view().error).toBeNull();
  });

  it("surfaces a conflict from a double submission and stays consistent", async () => {
    const service = new MockService();
    const { api, flow } = makeFlow(service);
    await flow.start(CANDIDATES);
    await flow.loadPair();
    const pair = flow.view().pair!;
    await api.submitFeedback(flow.sessionId()!, pair.first); // raced client
    await flow.choose("left"); // flow's own submit now conflicts
    const view = flow.view();
    expect(view.error?.code).toBe("conflict");
    // After the error the flow refetched: state equals the service's truth.
    expect(view.state?.round).toBe(1);
    expect(view.state?.status).toBe("ready");
  });

  it("never drifts from a fresh service fetch", async () => {
    const service = new MockService();
    const { api, flow } = makeFlow(service);
    await flow.start(CANDIDATES);
    for (let round = 0; round < 5; round++) {
      await flow.loadPair();
      await flow.choose("right");
      const fresh = await api.getSession(flow.sessionId()!);
      expect(flow.view().state).toEqual(fresh);
      const freshReport = await api.getReport(flow.sessionId()!);
      expect(flow.view().report).toEqual(freshReport);
    }
  });

  it("sorts the report by mean descending", async () => {
    const service = new MockService();
    const { flow } = makeFlow(service);
    await flow.start(CANDIDATES);
    for (let round = 0; round < 6; round++) {
      await flow.loadPair();
      await flow.choose("left");
    }
    const ranked = flow.rankedCandidates();
    for (let i = 1; i < ranked.length; i++) {
      expect(ranked[i - 1].mean).toBeGreaterThanOrEqual(ranked[i].mean);
    }
  });

  it("reports service errors as code and message", async () => {
    const service = new MockService();
    const { flow } = makeFlow(service);
    await flow.start([{ label: "only" }]);
    expect(flow.view().error).toEqual({
      code: "bad_request",
      message: "at least 2 candidates are required",
    });
    flow.dismissError();
    expect(flow.view().error).toBeNull();
  });

  it("ApiError carries status and code", async () => {
    const service = new MockService();
    const api = new SessionApi("http://mock", service.fetch);
    await expect(api.getSession("missing")).rejects.toMatchObject({
      status: 404,
      code: "not_found",
    });
    await expect(api.getSession("missing")).rejects.toBeInstanceOf(ApiError);
  });
});
