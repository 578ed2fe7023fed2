/** DOM layer: renders AnnotatorStore snapshots and wires input events. */

import { ApiClient, PendingItem } from "./api";
import { AnnotatorStore, POLL_INTERVAL_MS, StoreState, UNKNOWN } from "./store";

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

function renderStatusBar(state: StoreState): HTMLElement {
  const bar = el("div", "status-bar");
  const s = state.status;
  if (!s) {
    bar.append(el("span", "muted", "loading..."));
    return bar;
  }
  bar.append(el("span", "stat", `round ${s.round}`));
  bar.append(el("span", "stat", `${s.answered}/${s.total_budget} annotated`));
  bar.append(el("span", "stat", `precision ${(s.precision_so_far * 100).toFixed(1)}%`));
  const budget = el("progress") as HTMLProgressElement;
  budget.max = s.total_budget;
  budget.value = s.answered;
  bar.append(budget);
  if (state.offline) bar.append(el("span", "offline", "offline"));
  return bar;
}

function renderSummary(title: string, item: PendingItem): HTMLElement {
  const box = el("div", "neighbor-summary");
  box.append(el("h4", undefined, title));
  const counts = Object.entries(item.neighbor_summary.class_counts)
    .map(([cls, n]) => `${cls}: ${n}`)
    .join(", ");
  box.append(el("p", undefined, counts || "no labeled neighbors"));
  if (item.neighbor_summary.unknown > 0) {
    box.append(el("p", "muted", `${item.neighbor_summary.unknown} known-unknown`));
  }
  return box;
}

function renderQueue(state: StoreState, store: AnnotatorStore): HTMLElement {
  const list = el("ul", "queue");
  for (const item of state.queue) {
    const li = el("li", item.node_id === state.selected ? "selected" : "");
    li.dataset.nodeId = String(item.node_id);
    li.append(el("span", "node-id", `#${item.node_id}`));
    li.append(el("span", "muted", `deg ${item.degree}`));
    li.addEventListener("click", () => store.select(item.node_id));
    list.append(li);
  }
  return list;
}

function renderClassButtons(state: StoreState, store: AnnotatorStore): HTMLElement {
  const box = el("div", "class-buttons");
  const classes = state.classes?.classes ?? [];
  classes.forEach((name, i) => {
    const btn = el("button", "class-btn", `${i + 1} ${name}`);
    btn.addEventListener("click", () => void store.submit(i));
    box.append(btn);
  });
  const unk = el("button", "class-btn unknown", "0 unknown / out of scope");
  unk.addEventListener("click", () => void store.submit(UNKNOWN));
  box.append(unk);
  return box;
}

function renderReport(state: StoreState): HTMLElement {
  const box = el("div", "report");
  const rep = state.report;
  if (!rep) return box;
  box.append(el("h3", undefined, "session finished"));
  box.append(el("p", undefined,
    `annotation precision ${(rep.final_precision * 100).toFixed(1)}% over ` +
    `${rep.total_annotated} nodes${rep.truncated ? " (truncated)" : ""}`));
  if (rep.metrics) {
    const m = rep.metrics;
    box.append(el("p", undefined,
      `ID acc ${m.id_acc.toFixed(3)}, AUROC ${m.auroc.toFixed(3)}, ` +
      `AUPR ${m.aupr.toFixed(3)}, FPR@80 ${m.fpr_at_80.toFixed(3)}`));
  }
  return box;
}

export function render(root: HTMLElement, state: StoreState, store: AnnotatorStore): void {
  root.replaceChildren();
  root.append(renderStatusBar(state));
  if (state.banner) {
    const banner = el("div", "banner", state.banner);
    const close = el("button", "banner-close", "dismiss");
    close.addEventListener("click", () => store.dismissBanner());
    banner.append(close);
    root.append(banner);
  }
  if (state.status?.finished) {
    root.append(renderReport(state));
    return;
  }
  const main = el("div", "main");
  main.append(renderQueue(state, store));
  const detailPane = el("div", "detail");
  const selected = state.queue.find((q) => q.node_id === state.selected);
  if (selected) {
    detailPane.append(el("h3", undefined, `node #${selected.node_id}`));
    detailPane.append(el("p", "muted",
      `degree ${selected.degree}; top features ${selected.feature_preview.join(", ")}`));
    detailPane.append(renderSummary("labeled neighbors", selected));
    detailPane.append(renderClassButtons(state, store));
  } else {
    detailPane.append(el("p", "muted", "waiting for the next batch..."));
  }
  main.append(detailPane);
  root.append(main);
}

export function mount(root: HTMLElement, base = "", token: string | null = null): AnnotatorStore {
  const store = new AnnotatorStore(new ApiClient(base, token));
  store.subscribe((state) => render(root, state, store));
  document.addEventListener("keydown", (ev) => {
    if (ev.key === "ArrowDown" || ev.key === "j") return store.selectOffset(1);
    if (ev.key === "ArrowUp" || ev.key === "k") return store.selectOffset(-1);
    const answer = store.answerForKey(ev.key);
    if (answer !== null) void store.submit(answer);
  });
  void store.refresh();
  setInterval(() => void store.refresh(), POLL_INTERVAL_MS);
  return store;
}
