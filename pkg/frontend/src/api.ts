/**
 * Typed client for the annotation service. Every protocol decision (queue
 * order, agreement sampling, caps, claims) lives server-side; this client
 * only moves payloads and owns idempotency tokens for safe retries.
 */

import type {
  AgreementReportDoc,
  AnnotationResult,
  CorpusStatsDoc,
  PairKey,
  TaskPayload,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class StaleClaimError extends Error {}
export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

export function newIdempotencyToken(): string {
  const cryptoObj = globalThis.crypto;
  if (cryptoObj && "randomUUID" in cryptoObj) return cryptoObj.randomUUID();
  return `tok-${Date.now()}-${Math.random().toString(36).slice(2)}`;
}

export class ApiClient {
  constructor(
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
    private readonly base: string = "",
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchImpl(this.base + path, init);
    if (response.status === 409) {
      throw new StaleClaimError(await response.text());
    }
    if (!response.ok && response.status !== 204) {
      throw new ApiError(await response.text(), response.status);
    }
    return response;
  }

  async nextTask(annotator: string): Promise<TaskPayload | null> {
    const response = await this.request(
      `/api/task?annotator=${encodeURIComponent(annotator)}`,
    );
    if (response.status === 204) return null;
    return (await response.json()) as TaskPayload;
  }

  async submitAnnotation(body: {
    annotator: string;
    pair_key: PairKey;
    verdict: "yes" | "no";
    difficult: boolean;
    idempotency_token: string;
  }): Promise<AnnotationResult> {
    const response = await this.request("/api/annotation", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return (await response.json()) as AnnotationResult;
  }

  async proposePair(body: {
    annotator: string;
    shown_pair_key: PairKey;
    doc_id: string;
    start_char: number;
    end_char: number;
  }): Promise<unknown> {
    const response = await this.request("/api/pair", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return response.json();
  }

  async adjustSpan(body: {
    annotator: string;
    mention_id: string;
    start_char: number;
    end_char: number;
  }): Promise<unknown> {
    const response = await this.request("/api/span", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return response.json();
  }

  async agreement(): Promise<AgreementReportDoc> {
    const response = await this.request("/api/stats/agreement");
    return (await response.json()) as AgreementReportDoc;
  }

  async corpusStats(): Promise<CorpusStatsDoc> {
    const response = await this.request("/api/stats/corpus");
    return (await response.json()) as CorpusStatsDoc;
  }
}
