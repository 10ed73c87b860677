// Typed client for the review service. The UI writes through exactly two
// endpoints (decision + template feedback); everything else is read-only.

import type {
  ChunkView,
  DecisionRequest,
  GraphStatsView,
  NeighborhoodView,
  NodeView,
  ReviewItemView,
  ReviewStatsView,
  TemplateVersionView,
} from "./types";

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

/** 409: another reviewer acted on the item first. Never auto-retried. */
export class ConflictError extends ApiError {
  constructor(message: string) {
    super(message, 409);
  }
}

export class NotFoundError extends ApiError {
  constructor(message: string) {
    super(message, 404);
  }
}

async function parseError(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { detail?: string };
    return body.detail ?? res.statusText;
  } catch {
    return res.statusText;
  }
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private token: string = "",
  ) {}

  setToken(token: string): void {
    this.token = token;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const res = await fetch(`${this.baseUrl}${path}`, { ...init, headers });
    if (!res.ok) {
      const detail = await parseError(res);
      if (res.status === 409) throw new ConflictError(detail);
      if (res.status === 404) throw new NotFoundError(detail);
      throw new ApiError(detail, res.status);
    }
    return (await res.json()) as T;
  }

  // --- review ---------------------------------------------------------------

  reviewNext(reviewer: string): Promise<{ item: ReviewItemView | null }> {
    return this.request(`/review/next?reviewer=${encodeURIComponent(reviewer)}`);
  }

  reviewItems(status?: string): Promise<{ items: ReviewItemView[] }> {
    const query = status ? `?status=${encodeURIComponent(status)}` : "";
    return this.request(`/review/items${query}`);
  }

  submitDecision(
    itemId: string,
    body: DecisionRequest,
  ): Promise<{ item: ReviewItemView; stats: ReviewStatsView }> {
    return this.request(`/review/items/${encodeURIComponent(itemId)}/decision`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  reviewStats(): Promise<ReviewStatsView> {
    return this.request("/review/stats");
  }

  checklist(): Promise<{ checklist: string[] }> {
    return this.request("/review/checklist");
  }

  // --- templates --------------------------------------------------------------

  templateVersions(templateId: string): Promise<{ versions: TemplateVersionView[] }> {
    return this.request(`/templates/${encodeURIComponent(templateId)}/versions`);
  }

  submitFeedback(
    templateId: string,
    body: { kind: "prompt_revision" | "rule_adjustment"; new_body?: string; rule_patch?: string; justification: string },
  ): Promise<TemplateVersionView> {
    return this.request(`/templates/${encodeURIComponent(templateId)}/feedback`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  // --- graph (read-only) -------------------------------------------------------

  graphStats(): Promise<GraphStatsView> {
    return this.request("/graph/stats");
  }

  searchNodes(q: string, type?: string): Promise<{ nodes: NodeView[] }> {
    const params = new URLSearchParams({ q });
    if (type) params.set("type", type);
    return this.request(`/graph/search?${params}`);
  }

  node(entityId: string): Promise<NodeView> {
    return this.request(`/graph/nodes/${encodeURIComponent(entityId)}`);
  }

  neighborhood(entityId: string, hops: 1 | 2): Promise<NeighborhoodView> {
    return this.request(`/graph/nodes/${encodeURIComponent(entityId)}/neighborhood?hops=${hops}`);
  }

  chunk(chunkId: string): Promise<ChunkView> {
    return this.request(`/graph/chunks/${encodeURIComponent(chunkId)}`);
  }
}
