/**
 * Session-flow state machine for the judging interface.
 *
 * The flow never computes inference client-side: every view field is
 * refetched from the service after each mutation, so rendered state cannot
 * drift from what the service holds.  One mutation is in flight at a time;
 * clicks while busy are ignored (the service would answer 409 anyway).
 *
 * Left/right placement of the proposed pair is randomized per round to avoid
 * position bias, logged locally, and mapped back to candidate indices when a
 * click is submitted.
 */

import { ApiError, SessionApi } from "./api";
import type {
  CandidateInput,
  PairProposal,
  ServiceError,
  SessionConfigInput,
  SessionReport,
  SessionState,
} from "./types";

export interface PlacementEntry {
  round: number;
  leftIsFirst: boolean;
}

export interface SideView {
  index: number;
  label: string;
}

export interface FlowView {
  state: SessionState | null;
  report: SessionReport | null;
  pair: PairProposal | null;
  left: SideView | null;
  right: SideView | null;
  busy: boolean;
  error: ServiceError | null;
}

export type FlowListener = (view: FlowView) => void;

export class JudgeFlow {
  private state: SessionState | null = null;
  private report: SessionReport | null = null;
  private pair: PairProposal | null = null;
  private leftIsFirst = true;
  private busy = false;
  private error: ServiceError | null = null;
  private listeners: FlowListener[] = [];
  readonly placementLog: PlacementEntry[] = [];

  constructor(
    private readonly api: SessionApi,
    private readonly random: () => number = Math.random,
  ) {}

  onChange(listener: FlowListener): void {
    this.listeners.push(listener);
  }

  view(): FlowView {
    const sides = this.sides();
    return {
      state: this.state,
      report: this.report,
      pair: this.pair,
      left: sides?.left ?? null,
      right: sides?.right ?? null,
      busy: this.busy,
      error: this.error,
    };
  }

  private sides(): { left: SideView; right: SideView } | null {
    if (!this.pair) return null;
    const first = { index: this.pair.first, label: this.pair.first_label };
    const second = { index: this.pair.second, label: this.pair.second_label };
    return this.leftIsFirst
      ? { left: first, right: second }
      : { left: second, right: first };
  }

  private emit(): void {
    const snapshot = this.view();
    for (const listener of this.listeners) listener(snapshot);
  }

  private fail(error: unknown): void {
    if (error instanceof ApiError) {
      this.error = { code: error.code, message: error.message };
    } else {
      this.error = { code: "network", message: String(error) };
    }
  }

  dismissError(): void {
    this.error = null;
    this.emit();
  }

  sessionId(): string | null {
    return this.state?.session_id ?? null;
  }

  async start(
    candidates: CandidateInput[],
    config?: SessionConfigInput,
  ): Promise<void> {
    this.busy = true;
    this.emit();
    try {
      this.state = await this.api.createSession(candidates, config);
      this.report = await this.api.getReport(this.state.session_id);
      this.pair = null;
    } catch (error) {
      this.fail(error);
    } finally {
      this.busy = false;
      this.emit();
    }
  }

  async loadPair(): Promise<void> {
    if (this.busy || !this.state) return;
    this.busy = true;
    this.emit();
    try {
      this.pair = await this.api.nextPair(this.state.session_id);
      this.leftIsFirst = this.random() < 0.5;
      this.placementLog.push({
        round: this.pair.round,
        leftIsFirst: this.leftIsFirst,
      });
      this.state = await this.api.getSession(this.state.session_id);
    } catch (error) {
      this.fail(error);
    } finally {
      this.busy = false;
      this.emit();
    }
  }

  /** Submit the clicked side's candidate, then refresh everything. */
  async choose(side: "left" | "right"): Promise<void> {
    if (this.busy) return;
    const sides = this.sides();
    if (!sides || !this.state) return;
    const winner = side === "left" ? sides.left.index : sides.right.index;
    this.busy = true;
    this.emit();
    try {
      this.state = await this.api.submitFeedback(this.state.session_id, winner);
      this.pair = null;
      this.report = await this.api.getReport(this.state.session_id);
    } catch (error) {
      this.fail(error);
      await this.refreshQuietly();
    } finally {
      this.busy = false;
      this.emit();
    }
  }

  /** Refetch state and report; rendered data always equals a fresh fetch. */
  async refresh(): Promise<void> {
    if (this.busy || !this.state) return;
    this.busy = true;
    this.emit();
    try {
      await this.refreshQuietly();
    } catch (error) {
      this.fail(error);
    } finally {
      this.busy = false;
      this.emit();
    }
  }

  private async refreshQuietly(): Promise<void> {
    if (!this.state) return;
    this.state = await this.api.getSession(this.state.session_id);
    this.report = await this.api.getReport(this.state.session_id);
  }

  /** Candidates ordered for display: anchored mean descending. */
  rankedCandidates() {
    if (!this.report) return [];
    return [...this.report.candidates].sort((a, b) => b.mean - a.mean);
  }
}
