/** Wire types mirroring the session service JSON payloads. */

export interface CandidateInput {
  label: string;
  features?: number[];
}

export interface SessionConfigInput {
  seed?: number;
  lengthscale?: number;
  lam?: number;
  norm_bound?: number;
}

export interface HistoryEntry {
  first: number;
  second: number;
  winner_first: boolean;
}

export interface SessionState {
  session_id: string;
  labels: string[];
  round: number;
  status: "ready" | "awaiting_feedback" | "closed";
  pending: { first: number; second: number } | null;
  history: HistoryEntry[];
}

export interface PairProposal {
  session_id: string;
  round: number;
  first: number;
  second: number;
  first_label: string;
  second_label: string;
  token: string;
}

export interface CandidateReport {
  index: number;
  label: string;
  mean: number;
  sigma: number;
}

export interface SessionReport {
  session_id: string;
  round: number;
  status: string;
  best_index: number;
  best_label: string;
  candidates: CandidateReport[];
  history: HistoryEntry[];
}

export interface ServiceError {
  code: string;
  message: string;
}
