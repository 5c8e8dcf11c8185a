/**
 * UI session state: a small pure state machine the view renders from.
 *
 * The invariants the tests pin down:
 *  - at most one in-flight submission, and never two submissions for the
 *    same question index;
 *  - the idempotency key is minted when a question is displayed and reused
 *    for every retry of that question;
 *  - after any sequence of answers the state matches the server snapshot.
 */

import { freshIdempotencyKey } from "./api.js";
import type {
  AnswerChoice,
  AnswerResponse,
  QueryPayload,
  RecommendationPayload,
  SessionCreated,
  SessionSnapshot,
} from "./types.js";

export interface AnsweredCard {
  k: number;
  firstId: string;
  secondId: string;
  choice: AnswerChoice | null;
}

export interface UiState {
  phase: "setup" | "active" | "completed" | "error";
  sessionId: string | null;
  k: number;
  kMax: number;
  pending: QueryPayload | null;
  pendingKey: string | null;
  submitting: boolean;
  submittedKs: number[];
  history: AnsweredCard[];
  recommendation: RecommendationPayload | null;
  guarantee: RecommendationPayload | null; // interim readout
  error: string | null;
}

export function initialState(): UiState {
  return {
    phase: "setup",
    sessionId: null,
    k: 0,
    kMax: 0,
    pending: null,
    pendingKey: null,
    submitting: false,
    submittedKs: [],
    history: [],
    recommendation: null,
    guarantee: null,
    error: null,
  };
}

function withPending(state: UiState, query: QueryPayload | null): UiState {
  return {
    ...state,
    pending: query,
    pendingKey:
      query && state.sessionId
        ? freshIdempotencyKey(state.sessionId, query.k)
        : null,
  };
}

export function sessionStarted(state: UiState, created: SessionCreated): UiState {
  const base: UiState = {
    ...initialState(),
    phase: created.status === "completed" ? "completed" : "active",
    sessionId: created.session_id,
    k: created.k,
    kMax: created.k_max,
    recommendation: created.recommendation ?? null,
  };
  return withPending(base, created.query);
}

/**
 * Gate a submission: refuses when one is in flight or the question index
 * was already submitted (double click, stale button).
 */
export function beginSubmit(state: UiState, k: number):
  { ok: boolean; state: UiState } {
  if (
    state.phase !== "active" ||
    state.submitting ||
    state.pending === null ||
    state.pending.k !== k ||
    state.submittedKs.includes(k)
  ) {
    return { ok: false, state };
  }
  return { ok: true, state: { ...state, submitting: true } };
}

export function answerApplied(
  state: UiState,
  choice: AnswerChoice,
  response: AnswerResponse,
): UiState {
  const answered = state.pending;
  const card: AnsweredCard | null = answered
    ? {
        k: answered.k,
        firstId: answered.first.id,
        secondId: answered.second.id,
        choice,
      }
    : null;
  const next: UiState = {
    ...state,
    phase: response.status === "completed" ? "completed" : "active",
    k: response.k,
    submitting: false,
    submittedKs: answered
      ? [...state.submittedKs, answered.k]
      : state.submittedKs,
    history: card ? [...state.history, card] : state.history,
    recommendation: response.recommendation ?? state.recommendation,
    error: null,
  };
  return withPending(next, response.query);
}

export function submitFailed(state: UiState, message: string): UiState {
  // keep the pending key: a retry of the same question must reuse it
  return { ...state, submitting: false, error: message };
}

export function fatalError(state: UiState, message: string): UiState {
  return { ...state, phase: "error", submitting: false, error: message };
}

/** Rebase the client on the server's snapshot (conflict or reconnect). */
export function snapshotApplied(state: UiState, snap: SessionSnapshot): UiState {
  const base: UiState = {
    ...state,
    phase: snap.status === "completed" ? "completed" : "active",
    sessionId: snap.session_id,
    k: snap.k,
    kMax: snap.k_max,
    submitting: false,
    submittedKs: snap.history.map((h) => h.k),
    history: snap.history.map((h) => ({
      k: h.k,
      firstId: h.first.id,
      secondId: h.second.id,
      choice: h.raw_answer,
    })),
    recommendation: snap.status === "completed" ? snap.recommendation : null,
    guarantee: snap.recommendation,
    error: null,
  };
  return withPending(base, snap.pending_query);
}

export function guaranteeUpdated(
  state: UiState,
  rec: RecommendationPayload,
): UiState {
  return { ...state, guarantee: rec };
}
