import type { MentionView, TaskPayload } from "../src/types.js";

/** Deterministic little PRNG so generated tasks are reproducible. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomText(rng: () => number, words: number): string {
  const vocabulary = ["plasma", "blood", "donors", "patients", "study", "cells", "the", "from", "found", "team"];
  const parts: string[] = [];
  for (let i = 0; i < words; i++) {
    parts.push(vocabulary[Math.floor(rng() * vocabulary.length)]!);
  }
  return parts.join(" ");
}

export function randomSpans(
  rng: () => number,
  textLength: number,
  count: number,
): { start: number; end: number }[] {
  const spans: { start: number; end: number }[] = [];
  for (let i = 0; i < count * 4 && spans.length < count; i++) {
    const start = Math.floor(rng() * (textLength - 2));
    const end = start + 1 + Math.floor(rng() * Math.min(12, textLength - start - 1));
    spans.push({ start, end });
  }
  return spans;
}

function mention(doc_id: string, span: { start: number; end: number }, text: string): MentionView {
  return {
    mention_id: `${doc_id}:${span.start}-${span.end}`,
    doc_id,
    start_char: span.start,
    end_char: span.end,
    surface: text.slice(span.start, span.end),
  };
}

export function generateTask(seed: number): TaskPayload {
  const rng = mulberry32(seed);
  const newsText = randomText(rng, 12 + Math.floor(rng() * 10));
  const sciText = randomText(rng, 12 + Math.floor(rng() * 10));
  const newsSpans = randomSpans(rng, newsText.length, 1 + Math.floor(rng() * 3));
  const sciSpans = randomSpans(rng, sciText.length, 1 + Math.floor(rng() * 3));
  const newsActive = mention("news-doc", newsSpans[0]!, newsText);
  const sciActive = mention("sci-doc", sciSpans[0]!, sciText);
  const coClustered = [
    ...newsSpans.slice(1).map((s) => mention("news-doc", s, newsText)),
    ...sciSpans.slice(1).map((s) => mention("sci-doc", s, sciText)),
  ];
  return {
    pair_key: [newsActive.mention_id, sciActive.mention_id],
    pair_id: `pair-${seed}`,
    iaa: rng() < 0.2,
    iaa_due: false,
    similarity: rng(),
    difficult: false,
    documents: {
      news: {
        doc_id: "news-doc",
        kind: "news",
        title: "news title",
        summary_text: newsText,
        has_full_text: false,
        full_text: null,
        url: null,
      },
      science: {
        doc_id: "sci-doc",
        kind: "science",
        title: "science title",
        summary_text: sciText,
        has_full_text: false,
        full_text: null,
        url: null,
      },
    },
    mentions: { news: newsActive, science: sciActive },
    co_clustered: coClustered,
    queue: {
      position: 1,
      pending_total: 5,
      iaa_remaining_for_you: 2,
      iaa_completed_this_week: 0,
    },
    claim_expires: new Date().toISOString(),
  };
}

/**
 * In-memory stand-in for the annotation service: serves generated tasks and
 * deduplicates annotation submissions by idempotency token, counting real
 * state changes.
 */
export class MockService {
  stateChanges = 0;
  submissions: unknown[] = [];
  private byToken = new Map<string, unknown>();
  private nextSeq = 1;
  private taskSeed = 1;
  failNextSubmits = 0;

  fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    const url = new URL(input, "http://test");
    if (url.pathname === "/api/task") {
      return Response.json(generateTask(this.taskSeed++));
    }
    if (url.pathname === "/api/annotation") {
      if (this.failNextSubmits > 0) {
        this.failNextSubmits -= 1;
        throw new TypeError("network failure");
      }
      const body = JSON.parse(String(init?.body));
      this.submissions.push(body);
      const token = body.idempotency_token as string;
      if (token && this.byToken.has(token)) {
        return Response.json(this.byToken.get(token));
      }
      this.stateChanges += 1;
      const result = {
        seq: this.nextSeq++,
        pair_key: body.pair_key,
        gold: body.verdict === "yes" ? "coreferent" : "not_coreferent",
        resolved: true,
        merged_cluster: null,
        conflict: null,
        superseded_previous: false,
        replayed_token: false,
      };
      if (token) this.byToken.set(token, { ...result, replayed_token: true });
      return Response.json(result);
    }
    if (url.pathname === "/api/stats/agreement") {
      return Response.json({
        annotation_counts: { a1: 3 },
        pairwise: [
          { annotators: ["a1", "a2"], overlap: 3, kappa: 0.5, band: "moderate agreement", note: null },
        ],
        fleiss: { items: 3, raters: 2, kappa: 0.42, band: "moderate agreement" },
        difficult_fleiss: null,
      });
    }
    if (url.pathname === "/api/stats/corpus") {
      return Response.json({ counts: { documents: 4, mentions: 12 }, violations: [] });
    }
    if (url.pathname === "/api/pair" || url.pathname === "/api/span") {
      return Response.json({ ok: true });
    }
    return new Response("not found", { status: 404 });
  };
}
