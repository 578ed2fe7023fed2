/** In-memory stand-in for the annotation service, installed as global fetch.
 *
 * Mirrors the real wire contract: status/queue/node/classes/label/report,
 * 409 on non-pending or duplicate answers, 422 on out-of-range answers,
 * 403 on a wrong session token, one batch at a time.
 */

import { PendingItem, Status } from "../src/api";

export interface MockOptions {
  classes?: string[];
  batches?: number[][];
  token?: string | null;
  oodNodes?: Set<number>;
}

export class MockServer {
  readonly classes: string[];
  readonly batches: number[][];
  readonly token: string | null;
  readonly oodNodes: Set<number>;
  round = 0;
  answers = new Map<number, number>();
  partial = new Map<number, number>();
  requests: string[] = [];
  failNetwork = false;

  constructor(opts: MockOptions = {}) {
    this.classes = opts.classes ?? ["class_0", "class_1", "class_2"];
    this.batches = opts.batches ?? [
      [10, 11, 12],
      [20, 21, 22],
    ];
    this.token = opts.token ?? null;
    this.oodNodes = opts.oodNodes ?? new Set([12, 22]);
  }

  get finished(): boolean {
    return this.round >= this.batches.length;
  }

  private pendingIds(): number[] {
    if (this.finished) return [];
    return this.batches[this.round].filter((n) => !this.partial.has(n));
  }

  private item(nodeId: number): PendingItem {
    return {
      node_id: nodeId,
      round: this.round,
      degree: 3,
      feature_preview: [1, 4, 7],
      neighbor_summary: { class_counts: { "0": 2 }, unknown: 1 },
    };
  }

  private statusBody(): Status {
    let p = 0;
    let q = 0;
    for (const ans of this.answers.values()) ans === -1 ? q++ : p++;
    for (const ans of this.partial.values()) ans === -1 ? q++ : p++;
    return {
      round: this.round,
      answered: this.answers.size + this.partial.size,
      pending: this.pendingIds().length,
      total_budget: this.batches.flat().length,
      precision_so_far: p + q > 0 ? p / (p + q) : 0,
      status: this.finished ? "idle" : "awaiting_annotations",
      finished: this.finished,
    };
  }

  private label(nodeId: number, answer: number): [number, unknown] {
    if (!Number.isInteger(answer) || (answer !== -1 && (answer < 0 || answer >= this.classes.length))) {
      return [422, { detail: `answer must be in 0..${this.classes.length - 1} or -1` }];
    }
    if (this.finished || !this.batches[this.round].includes(nodeId)) {
      return [409, { detail: `node ${nodeId} is not in the pending batch` }];
    }
    if (this.partial.has(nodeId)) {
      return [409, { detail: `node ${nodeId} already answered` }];
    }
    this.partial.set(nodeId, answer);
    if (this.partial.size === this.batches[this.round].length) {
      for (const [n, a] of this.partial) this.answers.set(n, a);
      this.partial.clear();
      this.round += 1;
    }
    return [200, { accepted: true, ...this.statusBody() }];
  }

  handle(path: string, init?: RequestInit): [number, unknown] {
    this.requests.push(`${init?.method ?? "GET"} ${path}`);
    if (path === "/api/status") return [200, this.statusBody()];
    if (path === "/api/queue") return [200, this.pendingIds().map((n) => this.item(n))];
    if (path === "/api/classes") return [200, { classes: this.classes, unknown: -1 }];
    const nodeMatch = path.match(/^\/api\/node\/(\d+)$/);
    if (nodeMatch) {
      const id = Number(nodeMatch[1]);
      if (!this.pendingIds().includes(id)) return [404, { detail: `node ${id} is not pending` }];
      return [200, { ...this.item(id), two_hop_summary: { class_counts: {}, unknown: 0 } }];
    }
    if (path === "/api/label") {
      const headers = (init?.headers ?? {}) as Record<string, string>;
      if (this.token !== null && headers["X-Session-Token"] !== this.token) {
        return [403, { detail: "missing or wrong session token" }];
      }
      const body = JSON.parse(String(init?.body ?? "{}"));
      return this.label(body.node_id, body.answer);
    }
    if (path === "/api/report") {
      if (!this.finished) return [409, { detail: "session not finished" }];
      const s = this.statusBody();
      return [200, {
        final_precision: s.precision_so_far,
        total_annotated: this.answers.size,
        truncated: false,
        metrics: { id_acc: 0.9, auroc: 0.95, aupr: 0.9, fpr_at_80: 0.1 },
        rounds: [],
      }];
    }
    return [404, { detail: `no route ${path}` }];
  }

  /** fetch-compatible entry point. */
  fetch = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    if (this.failNetwork) throw new TypeError("fetch failed");
    const path = String(input);
    const [status, body] = this.handle(path, init);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };

  install(): void {
    globalThis.fetch = this.fetch as typeof fetch;
  }
}
