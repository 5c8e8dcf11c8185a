/**
 * Client for the session service.
 *
 * Answers carry an idempotency key generated once per question: retrying a
 * failed submission reuses the key, so the backend replays rather than
 * double-applies, and a stale submission (answering a question that has
 * already advanced) comes back as a 409 the UI resolves by refetching the
 * snapshot.
 */

import type {
  AnswerChoice,
  AnswerResponse,
  BankCreated,
  SessionCreated,
  SessionParams,
  SessionSnapshot,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parse<T>(res: Response): Promise<T> {
  if (res.ok) {
    return (await res.json()) as T;
  }
  let code = `http_${res.status}`;
  let message = res.statusText;
  try {
    const body = await res.json();
    code = body.code ?? code;
    message = body.message ?? message;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(res.status, code, message);
}

export class ServiceClient {
  constructor(private readonly baseUrl: string = "") {}

  async health(): Promise<{ status: string }> {
    return parse(await fetch(`${this.baseUrl}/healthz`));
  }

  async uploadBank(csv: string): Promise<BankCreated> {
    const res = await fetch(`${this.baseUrl}/banks`, {
      method: "POST",
      headers: { "Content-Type": "text/csv" },
      body: csv,
    });
    return parse(res);
  }

  async createSession(params: SessionParams): Promise<SessionCreated> {
    const res = await fetch(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(params),
    });
    return parse(res);
  }

  async getSession(sessionId: string): Promise<SessionSnapshot> {
    return parse(await fetch(`${this.baseUrl}/sessions/${sessionId}`));
  }

  async submitAnswer(
    sessionId: string,
    k: number,
    answer: AnswerChoice,
    idempotencyKey: string,
  ): Promise<AnswerResponse> {
    const res = await fetch(`${this.baseUrl}/sessions/${sessionId}/answers`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ answer, k, idempotency_key: idempotencyKey }),
    });
    return parse(res);
  }
}

/** Key reused across retries of the same question, unique across questions. */
export function freshIdempotencyKey(sessionId: string, k: number): string {
  const nonce =
    globalThis.crypto && "randomUUID" in globalThis.crypto
      ? globalThis.crypto.randomUUID()
      : Math.random().toString(36).slice(2);
  return `${sessionId}:${k}:${nonce}`;
}
