// @vitest-environment happy-dom
//
// Scripted browser run against the live session service: boots the real
// Python backend, drives the actual UI (DOM, buttons, fetch) through a
// three-question session on the reference bank, and checks that what the
// screen shows at the end is exactly what the service's snapshot says.

import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { createApp } from "../src/main.js";

const PORT = 18650 + Math.floor(Math.random() * 200);
const BASE = `http://127.0.0.1:${PORT}`;
const E1_CSV = "id,a,b\nx1,1,0\nx2,0,1\nx3,0.4,0.4\n";

let server: ChildProcess;
let answerPosts = 0;

async function waitFor(
  check: () => boolean,
  label: string,
  timeoutMs = 30_000,
): Promise<void> {
  const start = Date.now();
  while (Date.now() - start < timeoutMs) {
    if (check()) return;
    await new Promise((resolve) => setTimeout(resolve, 25));
  }
  throw new Error(`timed out waiting for ${label}`);
}

beforeAll(async () => {
  const dataDir = mkdtempSync(join(tmpdir(), "prefelicit-e2e-"));
  const boot = [
    "import uvicorn",
    "from prefelicit.service import create_app",
    `app = create_app(${JSON.stringify(dataDir)})`,
    `uvicorn.run(app, host='127.0.0.1', port=${PORT}, log_level='error')`,
  ].join("; ");
  server = spawn("python3", ["-c", boot], { stdio: "ignore" });

  const realFetch = globalThis.fetch.bind(globalThis);
  globalThis.fetch = (async (input: any, init?: any) => {
    const url = String(input);
    if (url.endsWith("/answers") && init?.method === "POST") {
      answerPosts += 1;
    }
    return realFetch(input, init);
  }) as typeof fetch;

  const deadline = Date.now() + 60_000;
  for (;;) {
    try {
      const res = await realFetch(`${BASE}/healthz`);
      if (res.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("service did not come up");
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
}, 90_000);

afterAll(() => {
  server?.kill();
});

describe("live session end to end", () => {
  it("completes a three-question session and renders the final pick", async () => {
    const root = document.createElement("main");
    document.body.appendChild(root);
    const client = new ServiceClient(BASE);
    const app = createApp(root, client);

    // fill the form and start
    await waitFor(() => root.querySelector("button.start") !== null, "form");
    (root.querySelector(".bank-csv") as HTMLTextAreaElement).value = E1_CSV;
    (root.querySelector(".k-max") as HTMLInputElement).value = "3";
    (root.querySelector(".sigma") as HTMLInputElement).value = "0";
    (root.querySelector("button.start") as HTMLButtonElement).click();

    await waitFor(() => root.querySelector(".query-card") !== null,
                  "first query card", 60_000);
    // the optimal first comparison on this bank is x1 vs x2
    const ids = [...root.querySelectorAll(".item-id")].map(
      (node) => node.textContent);
    expect(ids).toEqual(["x1", "x2"]);
    // differing attributes are highlighted on both panels
    expect(root.querySelectorAll(".attr.diff").length).toBe(4);

    const answers: Array<"first" | "second" | "indifferent"> =
      ["first", "indifferent", "second"];
    for (let k = 0; k < 3; k += 1) {
      await waitFor(
        () => {
          const button = root.querySelector(
            `button.answer.${answers[k]}`) as HTMLButtonElement | null;
          return button !== null && !button.disabled &&
            app.getState().pending?.k === k;
        },
        `question ${k}`,
        60_000,
      );
      const before = answerPosts;
      const button = root.querySelector(
        `button.answer.${answers[k]}`) as HTMLButtonElement;
      button.click();
      button.click();   // double click must submit exactly once
      await waitFor(() => app.getState().submittedKs.includes(k),
                    `answer ${k} applied`, 60_000);
      expect(answerPosts - before).toBe(1);
    }

    await waitFor(() => app.getState().phase === "completed",
                  "completion", 60_000);
    await waitFor(() => root.querySelector(".rec-item") !== null, "rec card");

    const snapshot = await client.getSession(app.getState().sessionId!);
    expect(snapshot.status).toBe("completed");
    expect(snapshot.history.map((h) => h.raw_answer)).toEqual(answers);

    const renderedItem = root.querySelector(".rec-item")!.textContent;
    expect(renderedItem).toBe(snapshot.recommendation.item_id);
    const renderedGuarantee =
      root.querySelector(".rec-guarantee")!.textContent!;
    expect(renderedGuarantee).toContain(
      snapshot.recommendation.guarantee.toFixed(4));
    const renderedNormalized =
      root.querySelector(".rec-normalized")!.textContent!;
    expect(renderedNormalized).toContain(
      snapshot.recommendation.normalized.toFixed(3));

    // answered exactly the three questions, no duplicates in the log
    expect(snapshot.history).toHaveLength(3);
    expect(answerPosts).toBe(3);
  }, 180_000);
});
