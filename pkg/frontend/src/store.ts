/** UI state machine: polling, optimistic labeling with rollback, keymap.
 *
 * Framework-free so it can be unit-tested against a mocked fetch; the DOM
 * layer in app.ts only renders snapshots of this store.
 */

import { ApiClient, ApiError, Classes, FinalReport, PendingItem, Status } from "./api";

export const UNKNOWN = -1;
export const POLL_INTERVAL_MS = 2000;

export interface StoreState {
  status: Status | null;
  queue: PendingItem[];
  classes: Classes | null;
  selected: number | null;
  banner: string | null;
  report: FinalReport | null;
  offline: boolean;
}

type Listener = (state: StoreState) => void;

export class AnnotatorStore {
  private state: StoreState = {
    status: null,
    queue: [],
    classes: null,
    selected: null,
    banner: null,
    report: null,
    offline: false,
  };
  private listeners: Listener[] = [];
  private inFlight = new Set<number>();

  constructor(private readonly api: ApiClient) {}

  getState(): StoreState {
    return { ...this.state, queue: [...this.state.queue] };
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private update(patch: Partial<StoreState>): void {
    this.state = { ...this.state, ...patch };
    for (const fn of this.listeners) fn(this.getState());
  }

  /** One polling tick: status + queue (+ one-time classes, final report). */
  async refresh(): Promise<void> {
    try {
      const status = await this.api.status();
      const queue = status.finished ? [] : await this.api.queue();
      const classes = this.state.classes ?? (await this.api.classes());
      let report = this.state.report;
      if (status.finished && report === null) {
        report = await this.api.report();
      }
      const known = new Set(queue.map((q) => q.node_id));
      const selected =
        this.state.selected !== null && known.has(this.state.selected)
          ? this.state.selected
          : (queue[0]?.node_id ?? null);
      this.update({ status, queue, classes, selected, report, offline: false });
    } catch (err) {
      if (err instanceof ApiError) {
        this.update({ banner: `server error: ${err.detail}` });
      } else {
        // Network failure: keep the last snapshot, show a retry banner.
        this.update({ offline: true, banner: "connection lost, retrying..." });
      }
    }
  }

  /** Label the selected (or given) node, optimistically removing it. */
  async submit(answer: number, nodeId?: number): Promise<boolean> {
    const target = nodeId ?? this.state.selected;
    if (target === null || this.inFlight.has(target)) return false;
    const before = this.state.queue;
    const remaining = before.filter((q) => q.node_id !== target);
    const nextSelected = remaining[0]?.node_id ?? null;
    this.inFlight.add(target);
    this.update({ queue: remaining, selected: nextSelected, banner: null });
    try {
      const res = await this.api.label(target, answer);
      this.update({ status: { ...res } });
      // An empty local queue means the batch completed; pull the next one.
      if (res.finished || this.state.queue.length === 0) await this.refresh();
      return true;
    } catch (err) {
      if (err instanceof ApiError && (err.status === 409 || err.status === 422)) {
        // Rejected: roll the item back and surface the reason.
        this.update({ queue: before, selected: target, banner: err.detail });
      } else if (err instanceof ApiError) {
        this.update({ queue: before, selected: target, banner: err.detail });
      } else {
        this.update({
          queue: before,
          selected: target,
          offline: true,
          banner: "connection lost, answer not saved",
        });
      }
      return false;
    } finally {
      this.inFlight.delete(target);
    }
  }

  select(nodeId: number): void {
    if (this.state.queue.some((q) => q.node_id === nodeId)) {
      this.update({ selected: nodeId });
    }
  }

  selectOffset(delta: number): void {
    const ids = this.state.queue.map((q) => q.node_id);
    if (ids.length === 0) return;
    const at = this.state.selected === null ? 0 : ids.indexOf(this.state.selected);
    const next = Math.min(ids.length - 1, Math.max(0, at + delta));
    this.update({ selected: ids[next] });
  }

  /** Keyboard map: "0" labels unknown, "1".."9" label classes 1..C. */
  answerForKey(key: string): number | null {
    if (this.state.classes === null) return null;
    if (key === "0") return UNKNOWN;
    const idx = Number.parseInt(key, 10);
    if (Number.isInteger(idx) && idx >= 1 && idx <= this.state.classes.classes.length) {
      return idx - 1;
    }
    return null;
  }

  dismissBanner(): void {
    this.update({ banner: null });
  }
}
