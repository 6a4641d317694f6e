// REST client for the simulation API. GET, POST and DELETE only — the
// server has no PUT, and neither do we: an update is delete + create.

export type Collection = "scenarios" | "characters" | "relationships" | "episodes";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private fetchFn: FetchLike;

  constructor(public baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(method: "GET" | "POST" | "DELETE", path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "Content-Type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const parsed = await response.json();
        detail = parsed.detail ?? JSON.stringify(parsed);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    if (response.status === 204) {
      return undefined as T;
    }
    return (await response.json()) as T;
  }

  list<T>(collection: Collection, filters?: Record<string, string>): Promise<T[]> {
    const query = filters && Object.keys(filters).length
      ? "?" + new URLSearchParams(filters).toString()
      : "";
    return this.request<T[]>("GET", `/${collection}${query}`);
  }

  get<T>(collection: Collection, pk: string): Promise<T> {
    return this.request<T>("GET", `/${collection}/${encodeURIComponent(pk)}`);
  }

  create<T>(collection: Collection, doc: unknown): Promise<T> {
    return this.request<T>("POST", `/${collection}`, doc);
  }

  remove(collection: Collection, pk: string): Promise<void> {
    return this.request<void>("DELETE", `/${collection}/${encodeURIComponent(pk)}`);
  }

  simulate(config: unknown): Promise<{ episode_pk: string }> {
    return this.request<{ episode_pk: string }>("POST", "/simulate", config);
  }

  simulationStatus(pk: string): Promise<{ status: string; progress?: number }> {
    return this.request<{ status: string; progress?: number }>(
      "GET",
      `/simulate/status/${encodeURIComponent(pk)}`,
    );
  }

  wsUrl(): string {
    return this.baseUrl.replace(/^http/, "ws") + "/ws/simulation";
  }
}
