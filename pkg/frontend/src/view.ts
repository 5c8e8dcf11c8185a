/**
 * DOM rendering. Pure functions from state to elements; the only state
 * lives in the state module. Both item panels render attributes in the
 * same order and attributes whose values differ get the highlight class,
 * since those are the ones the comparison actually hinges on.
 */

import type { UiState } from "./state.js";
import type { AnswerChoice, ItemPayload, QueryPayload } from "./types.js";

export interface Handlers {
  onStart(form: {
    csv: string;
    criterion: "mmu" | "mmr";
    kMax: number;
    sigma: number;
  }): void;
  onAnswer(k: number, choice: AnswerChoice): void;
  onRetry(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function attributeNames(query: QueryPayload): string[] {
  return Object.keys(query.first.attributes);
}

function differing(query: QueryPayload): Set<string> {
  const out = new Set<string>();
  for (const name of attributeNames(query)) {
    if (query.first.attributes[name] !== query.second.attributes[name]) {
      out.add(name);
    }
  }
  return out;
}

function itemPanel(
  item: ItemPayload,
  names: string[],
  diff: Set<string>,
  side: string,
): HTMLElement {
  const panel = el("div", `item-panel ${side}`);
  panel.appendChild(el("h3", "item-id", item.id));
  const table = el("table", "attributes");
  for (const name of names) {
    const row = el("tr", diff.has(name) ? "attr diff" : "attr");
    row.appendChild(el("td", "attr-name", name));
    row.appendChild(el("td", "attr-value", String(item.attributes[name])));
    table.appendChild(row);
  }
  panel.appendChild(table);
  return panel;
}

function setupForm(handlers: Handlers, defaults: { csv: string }): HTMLElement {
  const form = el("div", "setup");
  form.appendChild(el("h2", undefined, "Start a session"));

  const csv = el("textarea", "bank-csv") as HTMLTextAreaElement;
  csv.rows = 6;
  csv.value = defaults.csv;
  form.appendChild(el("label", undefined, "Item bank (CSV)"));
  form.appendChild(csv);

  const criterion = el("select", "criterion") as HTMLSelectElement;
  for (const value of ["mmu", "mmr"]) {
    const option = el("option", undefined, value) as HTMLOptionElement;
    option.value = value;
    criterion.appendChild(option);
  }
  form.appendChild(el("label", undefined, "Criterion"));
  form.appendChild(criterion);

  const kMax = el("input", "k-max") as HTMLInputElement;
  kMax.type = "number";
  kMax.value = "5";
  form.appendChild(el("label", undefined, "Questions to ask"));
  form.appendChild(kMax);

  const sigma = el("input", "sigma") as HTMLInputElement;
  sigma.type = "number";
  sigma.step = "0.01";
  sigma.value = "0";
  form.appendChild(el("label", undefined, "Assumed answer noise"));
  form.appendChild(sigma);

  const start = el("button", "start", "Start") as HTMLButtonElement;
  start.addEventListener("click", () => {
    handlers.onStart({
      csv: csv.value,
      criterion: criterion.value as "mmu" | "mmr",
      kMax: Number(kMax.value),
      sigma: Number(sigma.value),
    });
  });
  form.appendChild(start);
  return form;
}

function queryCard(state: UiState, handlers: Handlers): HTMLElement {
  const query = state.pending!;
  const card = el("div", "query-card");
  card.appendChild(
    el("div", "progress", `Question ${query.k + 1} of ${state.kMax}`),
  );
  if (state.guarantee) {
    card.appendChild(
      el(
        "div",
        "guarantee",
        `current ${state.guarantee.criterion} guarantee: ` +
          `${state.guarantee.guarantee.toFixed(4)} ` +
          `(normalized ${state.guarantee.normalized.toFixed(3)})`,
      ),
    );
  }
  const names = attributeNames(query);
  const diff = differing(query);
  const panels = el("div", "panels");
  panels.appendChild(itemPanel(query.first, names, diff, "left"));
  panels.appendChild(itemPanel(query.second, names, diff, "right"));
  card.appendChild(panels);

  const buttons = el("div", "answers");
  const options: Array<[AnswerChoice, string]> = [
    ["first", `Prefer ${query.first.id}`],
    ["indifferent", "No preference"],
    ["second", `Prefer ${query.second.id}`],
  ];
  for (const [choice, label] of options) {
    const button = el("button", `answer ${choice}`, label) as HTMLButtonElement;
    button.disabled = state.submitting;
    button.addEventListener("click", () => handlers.onAnswer(query.k, choice));
    buttons.appendChild(button);
  }
  card.appendChild(buttons);
  return card;
}

function historySidebar(state: UiState): HTMLElement {
  const bar = el("div", "history");
  bar.appendChild(el("h3", undefined, "Answered"));
  const list = el("ul");
  for (const card of state.history) {
    const words = { first: "preferred", second: "passed on", indifferent: "no preference" };
    const verdict = card.choice ? words[card.choice] : "?";
    list.appendChild(
      el("li", "history-entry",
         `${card.k + 1}. ${card.firstId} vs ${card.secondId} — ${verdict}`),
    );
  }
  bar.appendChild(list);
  return bar;
}

function recommendationScreen(state: UiState): HTMLElement {
  const rec = state.recommendation!;
  const screen = el("div", "recommendation");
  screen.appendChild(el("h2", undefined, "Recommendation"));
  screen.appendChild(el("div", "rec-item", rec.item_id));
  screen.appendChild(
    el("div", "rec-guarantee",
       `${rec.criterion} guarantee ${rec.guarantee.toFixed(4)}`),
  );
  screen.appendChild(
    el("div", "rec-normalized", `normalized ${rec.normalized.toFixed(3)}`),
  );
  return screen;
}

export function render(
  root: HTMLElement,
  state: UiState,
  handlers: Handlers,
  defaults: { csv: string },
): void {
  root.textContent = "";
  if (state.error && state.phase !== "error") {
    const banner = el("div", "banner", state.error);
    const retry = el("button", "retry", "Retry") as HTMLButtonElement;
    retry.addEventListener("click", () => handlers.onRetry());
    banner.appendChild(retry);
    root.appendChild(banner);
  }
  switch (state.phase) {
    case "setup":
      root.appendChild(setupForm(handlers, defaults));
      break;
    case "active":
      if (state.pending) {
        root.appendChild(queryCard(state, handlers));
      } else {
        root.appendChild(el("div", "loading", "computing next question..."));
      }
      root.appendChild(historySidebar(state));
      break;
    case "completed":
      root.appendChild(recommendationScreen(state));
      root.appendChild(historySidebar(state));
      break;
    case "error": {
      const banner = el("div", "banner fatal", state.error ?? "failed");
      root.appendChild(banner);
      break;
    }
  }
}
