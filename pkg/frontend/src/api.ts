// Typed client for the /v1 gateway. All dashboard traffic flows through
// here; fetch is injectable so tests can run against a scripted gateway.

import type {
  AuditRecordOut,
  CostsOut,
  JobListOut,
  JobOut,
  JobSubmit,
  ObjectOut,
  PoolsOut,
  SignedUrlOut,
  TemplateOut,
  TimelinePoint,
  TokenOut,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
    public status: number,
  ) {
    super(message);
  }

  get sessionExpired(): boolean {
    return this.status === 401;
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private token: string | null = null;
  onSessionExpired: (() => void) | null = null;

  constructor(
    private base: string = "",
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  hasSession(): boolean {
    return this.token !== null;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const response = await this.fetchImpl(this.base + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let code = `HTTP_${response.status}`;
      let message = response.statusText;
      try {
        const payload = await response.json();
        if (payload?.error) {
          code = payload.error.code;
          message = payload.error.message;
        }
      } catch {
        // non-JSON error body; keep the status line
      }
      const error = new ApiError(code, message, response.status);
      if (error.sessionExpired && this.onSessionExpired) this.onSessionExpired();
      throw error;
    }
    return (await response.json()) as T;
  }

  // --- session ---

  async login(userId: string): Promise<TokenOut> {
    const out = await this.request<TokenOut>("POST", "/v1/auth/login", { user_id: userId });
    this.token = out.token;
    return out;
  }

  // --- jobs ---

  listJobs(state?: string): Promise<JobListOut> {
    const query = state ? `?state=${encodeURIComponent(state)}` : "";
    return this.request("GET", `/v1/jobs${query}`);
  }

  getJob(id: string): Promise<JobOut> {
    return this.request("GET", `/v1/jobs/${id}`);
  }

  submitJob(description: JobSubmit): Promise<JobOut> {
    return this.request("POST", "/v1/jobs", description);
  }

  listTemplates(): Promise<{ templates: TemplateOut[] }> {
    return this.request("GET", "/v1/templates");
  }

  submitTemplate(name: string, parameters: Record<string, string>): Promise<JobOut> {
    return this.request("POST", `/v1/templates/${name}/submit`, { parameters });
  }

  // --- pool and costs ---

  pools(): Promise<PoolsOut> {
    return this.request("GET", "/v1/pool");
  }

  poolTimeline(source: "live" | "last-experiment" = "live"): Promise<{ points: TimelinePoint[] }> {
    return this.request("GET", `/v1/pool/timeline?source=${source}`);
  }

  costs(): Promise<CostsOut> {
    return this.request("GET", "/v1/costs");
  }

  // --- data ---

  listBuckets(): Promise<{ buckets: string[] }> {
    return this.request("GET", "/v1/buckets");
  }

  listObjects(bucket: string, prefix = ""): Promise<{ objects: ObjectOut[] }> {
    const query = prefix ? `?prefix=${encodeURIComponent(prefix)}` : "";
    return this.request("GET", `/v1/objects/${bucket}${query}`);
  }

  signObject(bucket: string, key: string, ttlSeconds: number): Promise<SignedUrlOut> {
    return this.request("POST", `/v1/sign/${bucket}`, { key, ttl_seconds: ttlSeconds });
  }

  fetchByUrl(url: string): Promise<ObjectOut> {
    return this.request("GET", `/v1/fetch?url=${encodeURIComponent(url)}`);
  }

  // --- audit ---

  audit(filters: { user?: string; dataset?: string; service?: string }): Promise<{ records: AuditRecordOut[] }> {
    const params = new URLSearchParams();
    if (filters.user) params.set("user", filters.user);
    if (filters.dataset) params.set("dataset", filters.dataset);
    if (filters.service) params.set("service", filters.service);
    const query = params.toString();
    return this.request("GET", `/v1/audit${query ? `?${query}` : ""}`);
  }
}
