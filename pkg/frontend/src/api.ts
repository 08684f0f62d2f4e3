/**
 * Typed client for the annotation service HTTP API. This is the UI's
 * only connection to the backend; it holds no score state of its own.
 */

export interface PendingItem {
  sample_id: string;
  image: string;
  candidate: string;
  position: number;
  total: number;
}

export interface DoneItem {
  done: true;
  total: number;
}

export type NextItem = PendingItem | DoneItem;

export interface SessionProgress {
  tagger: string;
  phase: number;
  scored: number;
  total: number;
  done: boolean;
}

export interface Progress {
  total_samples: number;
  accepted_events: number;
  open_phases: number[];
  sessions: SessionProgress[];
}

export interface AgreementTables {
  level: string;
  variant: string;
  per_tagger: Record<string, Record<string, unknown>>;
  overall: Record<string, unknown>;
}

export function isDone(item: NextItem): item is DoneItem {
  return "done" in item && item.done === true;
}

/** Error carrying the HTTP status so callers can branch on 409 etc. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

type Fetch = typeof fetch;

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: Fetch = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    const body = await response.json();
    if (!response.ok) {
      const detail =
        typeof body === "object" && body !== null && "detail" in body
          ? String((body as { detail: unknown }).detail)
          : `request failed with status ${response.status}`;
      throw new ApiError(response.status, detail);
    }
    return body;
  }

  async next(tagger: string, phase: number): Promise<NextItem> {
    const params = new URLSearchParams({ tagger, phase: String(phase) });
    return (await this.request(`/api/next?${params}`)) as NextItem;
  }

  async submitScore(
    sampleId: string,
    tagger: string,
    phase: number,
    score: number,
  ): Promise<void> {
    await this.request("/api/score", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ sample_id: sampleId, tagger, phase, score }),
    });
  }

  async progress(): Promise<Progress> {
    return (await this.request("/api/progress")) as Progress;
  }

  async agreement(level = "ordinal"): Promise<AgreementTables> {
    const params = new URLSearchParams({ level });
    return (await this.request(`/api/agreement?${params}`)) as AgreementTables;
  }
}
