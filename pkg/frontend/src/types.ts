/** Wire types for the annotation service API. */

export type PairKey = [string, string];

export interface MentionView {
  mention_id: string;
  doc_id: string;
  start_char: number;
  end_char: number;
  surface: string;
}

export interface DocumentView {
  doc_id: string;
  kind: "news" | "science";
  title: string;
  summary_text: string;
  has_full_text: boolean;
  full_text: string | null;
  url: string | null;
}

export interface QueueCounters {
  position: number;
  pending_total: number;
  iaa_remaining_for_you: number;
  iaa_completed_this_week: number;
}

export interface TaskPayload {
  pair_key: PairKey;
  pair_id: string;
  iaa: boolean;
  iaa_due: boolean;
  similarity: number | null;
  difficult: boolean;
  documents: { news: DocumentView; science: DocumentView };
  mentions: { news: MentionView; science: MentionView };
  co_clustered: MentionView[];
  queue: QueueCounters;
  claim_expires: string;
}

export interface AnnotationResult {
  seq: number;
  pair_key: PairKey;
  gold: string | null;
  resolved: boolean;
  merged_cluster: [string, string[]] | null;
  conflict: unknown | null;
  superseded_previous: boolean;
  replayed_token: boolean;
}

export interface AgreementReportDoc {
  annotation_counts: Record<string, number>;
  pairwise: {
    annotators: [string, string];
    overlap: number;
    kappa: number | null;
    band: string | null;
    note: string | null;
  }[];
  fleiss: { items: number; raters: number; kappa: number | null; band: string | null } | null;
  difficult_fleiss: {
    items: number;
    raters: number;
    kappa: number | null;
    band: string | null;
  } | null;
}

export interface CorpusStatsDoc {
  counts: Record<string, number>;
  violations: string[];
}
