/**
 * Wire protocol types and the HTTP client.
 *
 * Every message is one POST /api with a JSON body (see PROTOCOL.md at the
 * repository root). The client enforces one in-flight request per message
 * kind and can record every byte that crosses the wire, which the tests
 * use to prove that protected formula text never reaches the browser.
 */

export interface CellView {
  addr: string;
  display: string;
  editable: boolean;
  /** Present only for full-access cells; the formula bar shows it. */
  contents?: string;
}

export interface SheetView {
  name: string;
  cells: CellView[];
}

export interface RedactedView {
  workbook_version: number;
  sheets: SheetView[];
}

export interface LoginResponse {
  ok: true;
  revision: number;
  session: string;
  role: string | null;
  version: number;
}

export interface ViewResponse {
  ok: true;
  revision: number;
  view?: RedactedView;
  unchanged?: boolean;
}

export interface Delta {
  addr: string;
  display: string;
}

export interface EditResponse {
  ok: true;
  revision: number;
  deltas: Delta[];
}

export interface ErrorResponse {
  ok: false;
  error: string;
}

export type Response = (LoginResponse | ViewResponse | EditResponse | ErrorResponse) &
  Record<string, unknown>;

export interface WireRecord {
  direction: "request" | "response";
  text: string;
}

export type FetchLike = (input: string, init: RequestInit) => Promise<{
  text(): Promise<string>;
}>;

export class ApiClient {
  private readonly endpoint: string;
  private readonly fetchFn: FetchLike;
  private readonly inflight = new Set<string>();
  readonly log: WireRecord[] = [];

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.endpoint = baseUrl.replace(/\/$/, "") + "/api";
    const fn = fetchFn ?? (globalThis.fetch as unknown as FetchLike);
    if (!fn) {
      throw new Error("no fetch implementation available");
    }
    this.fetchFn = fn.bind(globalThis) as FetchLike;
  }

  /** True while a message of this kind is on the wire. */
  busy(kind: string): boolean {
    return this.inflight.has(kind);
  }

  async post(message: Record<string, unknown> & { kind: string }): Promise<Response> {
    if (this.inflight.has(message.kind)) {
      throw new Error(`a ${message.kind} request is already in flight`);
    }
    this.inflight.add(message.kind);
    try {
      const body = JSON.stringify(message);
      this.log.push({ direction: "request", text: body });
      const response = await this.fetchFn(this.endpoint, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body,
      });
      const text = await response.text();
      this.log.push({ direction: "response", text });
      return JSON.parse(text) as Response;
    } finally {
      this.inflight.delete(message.kind);
    }
  }
}
