// @vitest-environment happy-dom
//
// App wiring against a scripted fake client: the conflict path must
// resolve by refetching the snapshot, never by resubmitting.

import { describe, expect, it, vi } from "vitest";

import { ApiError, ServiceClient } from "../src/api.js";
import { createApp } from "../src/main.js";
import type {
  AnswerResponse,
  QueryPayload,
  SessionSnapshot,
} from "../src/types.js";

const item = (id: string, a: number, b: number) => ({
  index: id === "x1" ? 1 : 2,
  id,
  attributes: { a, b },
});

const query = (k: number): QueryPayload => ({
  k,
  first: item("x1", 1, 0),
  second: item("x2", 0, 1),
});

function snapshot(k: number, status: "active" | "completed"): SessionSnapshot {
  return {
    session_id: "sid",
    bank_id: "b",
    criterion: "mmu",
    u0: "simplex",
    status,
    k,
    k_max: 2,
    gamma: 0,
    escalations: 0,
    history: k > 0
      ? [{ k: 0, first: item("x1", 1, 0), second: item("x2", 0, 1),
           raw_answer: "first", s: 1 }]
      : [],
    pending_query: status === "active" ? query(k) : null,
    recommendation: {
      item_index: 1, item_id: "x1", criterion: "mmu",
      guarantee: 0.5, normalized: 1,
    },
    created_at: "now",
  };
}

function fakeClient(overrides: Partial<ServiceClient>): ServiceClient {
  const base: Partial<ServiceClient> = {
    uploadBank: vi.fn(async () => ({
      bank_id: "b", items: 3, attributes: 2, ids: ["x1", "x2", "x3"],
    })),
    createSession: vi.fn(async () => ({
      session_id: "sid", status: "active" as const, k: 0, k_max: 2,
      query: query(0),
    })),
    getSession: vi.fn(async () => snapshot(0, "active")),
    submitAnswer: vi.fn(async (): Promise<AnswerResponse> => ({
      session_id: "sid", k: 1, status: "active", query: query(1),
      recommendation: null,
    })),
  };
  return Object.assign(Object.create(ServiceClient.prototype),
                       base, overrides) as ServiceClient;
}

async function settle() {
  for (let i = 0; i < 10; i += 1) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

describe("app wiring", () => {
  it("starts a session from the form and renders the card", async () => {
    const root = document.createElement("main");
    document.body.appendChild(root);
    const app = createApp(root, fakeClient({}));
    (root.querySelector("button.start") as HTMLButtonElement).click();
    await settle();
    expect(app.getState().phase).toBe("active");
    expect(root.querySelector(".query-card")).not.toBeNull();
  });

  it("a 409 on answer rebases on the server snapshot", async () => {
    const conflicted = vi.fn(async () => {
      throw new ApiError(409, "conflict", "stale");
    });
    const serverSnapshot = snapshot(1, "active");
    const client = fakeClient({
      submitAnswer: conflicted as unknown as ServiceClient["submitAnswer"],
      getSession: vi.fn(async () => serverSnapshot),
    });
    const root = document.createElement("main");
    document.body.appendChild(root);
    const app = createApp(root, client);
    (root.querySelector("button.start") as HTMLButtonElement).click();
    await settle();
    (root.querySelector("button.answer.first") as HTMLButtonElement).click();
    await settle();
    // rebased on the snapshot: k advanced, no error banner, not resubmitted
    expect(app.getState().k).toBe(1);
    expect(app.getState().error).toBeNull();
    expect(conflicted).toHaveBeenCalledTimes(1);
    expect(root.querySelector(".banner")).toBeNull();
  });

  it("an unreachable service surfaces a banner and no session state", async () => {
    const client = fakeClient({
      uploadBank: vi.fn(async () => {
        throw new ApiError(503, "down", "unreachable");
      }),
    });
    const root = document.createElement("main");
    document.body.appendChild(root);
    const app = createApp(root, client);
    (root.querySelector("button.start") as HTMLButtonElement).click();
    await settle();
    expect(app.getState().phase).toBe("error");
    expect(app.getState().sessionId).toBeNull();
    expect(root.querySelector(".banner.fatal")).not.toBeNull();
  });
});
