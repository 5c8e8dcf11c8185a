/** Payload shapes of the session service API. */

export interface ItemPayload {
  index: number;
  id: string;
  attributes: Record<string, number>;
}

export interface QueryPayload {
  k: number;
  first: ItemPayload;
  second: ItemPayload;
}

export interface RecommendationPayload {
  item_index: number;
  item_id: string;
  criterion: string;
  guarantee: number;
  normalized: number;
}

export type SessionStatus = "active" | "completed";

export interface BankCreated {
  bank_id: string;
  items: number;
  attributes: number;
  ids: string[];
}

export interface SessionCreated {
  session_id: string;
  status: SessionStatus;
  k: number;
  k_max: number;
  query: QueryPayload | null;
  recommendation?: RecommendationPayload;
}

export interface AnswerResponse {
  session_id: string;
  k: number;
  status: SessionStatus;
  query: QueryPayload | null;
  recommendation: RecommendationPayload | null;
}

export interface HistoryEntry {
  k: number;
  first: ItemPayload;
  second: ItemPayload;
  raw_answer: AnswerChoice | null;
  s: 1 | -1;
}

export interface SessionSnapshot {
  session_id: string;
  bank_id: string;
  criterion: string;
  u0: string;
  status: SessionStatus;
  k: number;
  k_max: number;
  gamma: number;
  escalations: number;
  history: HistoryEntry[];
  pending_query: QueryPayload | null;
  recommendation: RecommendationPayload;
  created_at: string;
}

export type AnswerChoice = "first" | "second" | "indifferent";

export interface SessionParams {
  bank_id: string;
  criterion: "mmu" | "mmr";
  sigma: number;
  confidence?: number;
  k_max: number;
  u0?: "simplex" | "box";
}
