/**
 * Wiring: owns the single mutable state reference, talks to the service
 * through the client, re-renders after every transition.
 *
 * Conflict handling: a 409 on answer submission means this client raced
 * another submission for the same question; the resolution is always to
 * refetch the snapshot and re-render from it.
 */

import { ApiError, ServiceClient } from "./api.js";
import {
  UiState,
  answerApplied,
  beginSubmit,
  fatalError,
  initialState,
  sessionStarted,
  snapshotApplied,
  submitFailed,
} from "./state.js";
import type { AnswerChoice } from "./types.js";
import { Handlers, render } from "./view.js";

const DEFAULT_CSV = `id,a,b
x1,1,0
x2,0,1
x3,0.4,0.4
`;

export function createApp(root: HTMLElement, client: ServiceClient) {
  let state: UiState = initialState();

  const rerender = () => render(root, state, handlers, { csv: DEFAULT_CSV });

  const refreshSnapshot = async () => {
    if (!state.sessionId) return;
    try {
      const snap = await client.getSession(state.sessionId);
      state = snapshotApplied(state, snap);
    } catch (err) {
      state = fatalError(state, String(err));
    }
    rerender();
  };

  const handlers: Handlers = {
    async onStart(form) {
      try {
        const bank = await client.uploadBank(form.csv);
        const created = await client.createSession({
          bank_id: bank.bank_id,
          criterion: form.criterion,
          sigma: form.sigma,
          k_max: form.kMax,
        });
        state = sessionStarted(state, created);
        rerender();
        await refreshSnapshot(); // pulls the interim guarantee readout
      } catch (err) {
        state = fatalError(state, String(err));
        rerender();
      }
    },

    async onAnswer(k: number, choice: AnswerChoice) {
      const gate = beginSubmit(state, k);
      if (!gate.ok) return;       // double click or stale button
      state = gate.state;
      const key = state.pendingKey!;
      rerender();                 // buttons disabled while in flight
      try {
        const response = await client.submitAnswer(
          state.sessionId!, k, choice, key);
        state = answerApplied(state, choice, response);
        rerender();
        if (state.phase === "active") {
          await refreshSnapshot();
        }
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          await refreshSnapshot();
          return;
        }
        state = submitFailed(state, String(err));
        rerender();
      }
    },

    async onRetry() {
      await refreshSnapshot();
    },
  };

  rerender();
  return {
    getState: () => state,
    refresh: refreshSnapshot,
  };
}

declare global {
  interface Window {
    __prefelicitApp?: ReturnType<typeof createApp>;
  }
}

if (typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root) {
    window.__prefelicitApp = createApp(root, new ServiceClient(""));
  }
}
