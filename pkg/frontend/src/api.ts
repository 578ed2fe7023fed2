/** Typed client for the annotation service's HTTP interface. */

export interface Status {
  round: number;
  answered: number;
  pending: number;
  total_budget: number;
  precision_so_far: number;
  status: "idle" | "awaiting_annotations";
  finished: boolean;
}

export interface NeighborSummary {
  class_counts: Record<string, number>;
  unknown: number;
}

export interface PendingItem {
  node_id: number;
  round: number;
  degree: number;
  feature_preview: number[];
  neighbor_summary: NeighborSummary;
  two_hop_summary?: NeighborSummary | null;
}

export interface Classes {
  classes: string[];
  unknown: number;
}

export interface LabelResponse extends Status {
  accepted: boolean;
}

export interface RoundReport {
  round_index: number;
  nodes: number[];
  strategy_tag: string;
  p: number;
  q: number;
  cumulative_precision: number;
  elapsed: number;
}

export interface FinalReport {
  final_precision: number;
  total_annotated: number;
  truncated: boolean;
  metrics: Record<string, number> | null;
  rounds: RoundReport[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseDetail(res: Response): Promise<string> {
  try {
    const body = await res.json();
    return typeof body.detail === "string" ? body.detail : JSON.stringify(body);
  } catch {
    return res.statusText;
  }
}

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly token: string | null = null,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const headers: Record<string, string> = {
      ...(init?.headers as Record<string, string> | undefined),
    };
    if (this.token !== null) headers["X-Session-Token"] = this.token;
    const res = await fetch(this.base + path, { ...init, headers });
    if (!res.ok) throw new ApiError(res.status, await parseDetail(res));
    return (await res.json()) as T;
  }

  status(): Promise<Status> {
    return this.request<Status>("/api/status");
  }

  queue(): Promise<PendingItem[]> {
    return this.request<PendingItem[]>("/api/queue");
  }

  node(nodeId: number): Promise<PendingItem> {
    return this.request<PendingItem>(`/api/node/${nodeId}`);
  }

  classes(): Promise<Classes> {
    return this.request<Classes>("/api/classes");
  }

  label(nodeId: number, answer: number): Promise<LabelResponse> {
    return this.request<LabelResponse>("/api/label", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ node_id: nodeId, answer }),
    });
  }

  report(): Promise<FinalReport> {
    return this.request<FinalReport>("/api/report");
  }
}
