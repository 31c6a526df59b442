/**
 * Session controller: one active task per browser session, optimistic
 * submission with idempotency tokens, stale-claim recovery, and the
 * progress/agreement dashboard. All queue decisions come from the service.
 */

import { ApiClient, StaleClaimError, newIdempotencyToken } from "./api.js";
import { selectionToOffsets } from "./highlight.js";
import { renderTask, TaskView } from "./taskView.js";
import type { TaskPayload } from "./types.js";

export class AnnotationSession {
  private task: TaskPayload | null = null;
  private view: TaskView | null = null;
  private pendingToken: string | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly annotator: string,
    private readonly mount: HTMLElement,
    private readonly doc: Document = document,
  ) {}

  get currentTask(): TaskPayload | null {
    return this.task;
  }

  async start(): Promise<void> {
    await this.loadNext();
  }

  async loadNext(notice?: string): Promise<void> {
    this.task = await this.api.nextTask(this.annotator);
    this.mount.replaceChildren();
    if (this.task === null) {
      const done = this.doc.createElement("p");
      done.className = "queue-empty";
      done.textContent = "No tasks pending. Thank you!";
      this.mount.appendChild(done);
      this.view = null;
      return;
    }
    this.view = renderTask(this.task, this.doc, (a, b) =>
      console.warn("overlapping highlight ranges merged", a, b),
    );
    if (notice) this.view.notice.textContent = notice;
    this.wire(this.view);
    this.mount.appendChild(this.view.root);
  }

  private wire(view: TaskView): void {
    view.yesButton.addEventListener("click", () => void this.submit("yes"));
    view.noButton.addEventListener("click", () => void this.submit("no"));
    view.proposeButton.addEventListener("click", () => void this.proposeFromSelection());
    view.resizeButton.addEventListener("click", () => void this.resizeFromSelection());
  }

  /**
   * Submit the verdict for the active task. One idempotency token per
   * verdict decision: a retry after a network failure reuses the token, so
   * the service records exactly one state change.
   */
  async submit(verdict: "yes" | "no", retries = 1): Promise<void> {
    if (!this.task || !this.view) return;
    if (this.pendingToken === null) this.pendingToken = newIdempotencyToken();
    const body = {
      annotator: this.annotator,
      pair_key: this.task.pair_key,
      verdict,
      difficult: this.view.difficultToggle.checked,
      idempotency_token: this.pendingToken,
    };
    try {
      await this.api.submitAnnotation(body);
    } catch (error) {
      if (error instanceof StaleClaimError) {
        this.pendingToken = null;
        await this.loadNext("Your claim expired; here is a fresh task.");
        return;
      }
      if (retries > 0) {
        await this.submit(verdict, retries - 1);
        return;
      }
      throw error;
    }
    this.pendingToken = null;
    await this.loadNext();
  }

  private selectedOffsets(panel: "news" | "science"): { start: number; end: number } | null {
    const view = this.view;
    const selection = this.doc.defaultView?.getSelection?.();
    if (!view || !selection || selection.rangeCount === 0) return null;
    const range = selection.getRangeAt(0);
    const container = view.summaries[panel];
    try {
      const offsets = selectionToOffsets(
        container,
        range.startContainer,
        range.startOffset,
        range.endContainer,
        range.endOffset,
      );
      return offsets.end > offsets.start ? offsets : null;
    } catch {
      return null;
    }
  }

  private selectionWithPanel(): {
    panel: "news" | "science";
    offsets: { start: number; end: number };
  } | null {
    for (const panel of ["news", "science"] as const) {
      const offsets = this.selectedOffsets(panel);
      if (offsets) return { panel, offsets };
    }
    return null;
  }

  async proposeFromSelection(): Promise<void> {
    if (!this.task || !this.view) return;
    const selected = this.selectionWithPanel();
    if (!selected) {
      this.view.notice.textContent = "Select the alternative mention text first.";
      return;
    }
    try {
      await this.api.proposePair({
        annotator: this.annotator,
        shown_pair_key: this.task.pair_key,
        doc_id: this.task.documents[selected.panel].doc_id,
        start_char: selected.offsets.start,
        end_char: selected.offsets.end,
      });
      this.view.notice.textContent = "Counter-proposal queued; it will be shown to you next.";
    } catch (error) {
      this.view.notice.textContent = `Proposal rejected: ${(error as Error).message}`;
    }
  }

  async resizeFromSelection(): Promise<void> {
    if (!this.task || !this.view) return;
    const selected = this.selectionWithPanel();
    if (!selected) {
      this.view.notice.textContent = "Select the corrected span first.";
      return;
    }
    if (selected.offsets.end <= selected.offsets.start) {
      this.view.notice.textContent = "Cannot resize to an empty span.";
      return;
    }
    try {
      await this.api.adjustSpan({
        annotator: this.annotator,
        mention_id: this.task.mentions[selected.panel].mention_id,
        start_char: selected.offsets.start,
        end_char: selected.offsets.end,
      });
      await this.loadNext("Span updated; pending pairs were re-scored.");
    } catch (error) {
      this.view.notice.textContent = `Span edit rejected: ${(error as Error).message}`;
    }
  }
}

export async function renderDashboard(
  api: ApiClient,
  mount: HTMLElement,
  doc: Document = document,
): Promise<void> {
  const [agreement, stats] = await Promise.all([api.agreement(), api.corpusStats()]);
  mount.replaceChildren();

  const counts = doc.createElement("p");
  counts.className = "corpus-counts";
  counts.textContent = Object.entries(stats.counts)
    .map(([k, v]) => `${k}: ${v}`)
    .join("  ·  ");
  mount.appendChild(counts);

  const table = doc.createElement("table");
  table.className = "kappa-table";
  const head = doc.createElement("tr");
  for (const label of ["annotators", "overlap", "kappa", "band"]) {
    const th = doc.createElement("th");
    th.textContent = label;
    head.appendChild(th);
  }
  table.appendChild(head);
  for (const row of agreement.pairwise) {
    const tr = doc.createElement("tr");
    const cells = [
      row.annotators.join(" vs "),
      String(row.overlap),
      row.kappa === null ? "n/a" : row.kappa.toFixed(3),
      row.band ?? row.note ?? "",
    ];
    for (const value of cells) {
      const td = doc.createElement("td");
      td.textContent = value;
      tr.appendChild(td);
    }
    table.appendChild(tr);
  }
  mount.appendChild(table);

  if (agreement.fleiss) {
    const fleiss = doc.createElement("p");
    fleiss.className = "fleiss";
    const k = agreement.fleiss.kappa;
    fleiss.textContent =
      `group agreement over ${agreement.fleiss.items} shared tasks: ` +
      (k === null ? "undefined" : `${k.toFixed(3)} (${agreement.fleiss.band})`);
    mount.appendChild(fleiss);
  }
}

export function boot(): void {
  const params = new URLSearchParams(window.location.search);
  const annotator = params.get("annotator") ?? "anonymous";
  const api = new ApiClient();
  const taskMount = document.getElementById("task-mount");
  const dashboardMount = document.getElementById("dashboard-mount");
  if (taskMount) {
    void new AnnotationSession(api, annotator, taskMount).start();
  }
  if (dashboardMount) {
    void renderDashboard(api, dashboardMount);
    setInterval(() => void renderDashboard(api, dashboardMount), 30_000);
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined" && document.getElementById("task-mount")) {
  boot();
}
