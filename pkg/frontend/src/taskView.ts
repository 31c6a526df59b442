/**
 * Pure rendering of one annotation task: side-by-side summaries with the
 * active pair in bold and already-co-referent mentions in green, the
 * yes/no question, difficult flag, and queue counters. No protocol logic.
 */

import {
  HighlightSpan,
  renderAnnotated,
} from "./highlight.js";
import type { DocumentView, MentionView, TaskPayload } from "./types.js";

export const QUESTION_TEMPLATE = (x: string, y: string) =>
  `Are ${x} and ${y} mentions of the same entity?`;

export interface TaskView {
  root: HTMLElement;
  question: HTMLElement;
  panels: { news: HTMLElement; science: HTMLElement };
  summaries: { news: HTMLElement; science: HTMLElement };
  yesButton: HTMLButtonElement;
  noButton: HTMLButtonElement;
  difficultToggle: HTMLInputElement;
  proposeButton: HTMLButtonElement;
  resizeButton: HTMLButtonElement;
  notice: HTMLElement;
}

function highlightsFor(
  doc: DocumentView,
  active: MentionView,
  coClustered: MentionView[],
): HighlightSpan[] {
  const spans: HighlightSpan[] = [
    { start: active.start_char, end: active.end_char, cls: "active" },
  ];
  for (const m of coClustered) {
    if (m.doc_id === doc.doc_id) {
      spans.push({ start: m.start_char, end: m.end_char, cls: "cluster" });
    }
  }
  return spans;
}

function panel(
  doc: Document,
  view: DocumentView,
  active: MentionView,
  coClustered: MentionView[],
  onOverlap?: (a: HighlightSpan, b: HighlightSpan) => void,
): { panel: HTMLElement; summary: HTMLElement } {
  const section = doc.createElement("section");
  section.className = `panel panel-${view.kind}`;
  section.dataset.docId = view.doc_id;

  const heading = doc.createElement("h3");
  heading.textContent = view.title;
  section.appendChild(heading);

  const summary = renderAnnotated(
    view.summary_text,
    highlightsFor(view, active, coClustered),
    doc,
    onOverlap,
  );
  section.appendChild(summary);

  if (view.has_full_text || view.url) {
    const link = doc.createElement("button");
    link.type = "button";
    link.className = "full-article";
    link.textContent = "read the full article";
    section.appendChild(link);
    if (view.full_text) {
      const aside = doc.createElement("aside");
      aside.className = "full-text hidden";
      aside.textContent = view.full_text;
      section.appendChild(aside);
      link.addEventListener("click", () => aside.classList.toggle("hidden"));
    }
  }
  return { panel: section, summary };
}

export function renderTask(
  task: TaskPayload,
  doc: Document = document,
  onOverlap?: (a: HighlightSpan, b: HighlightSpan) => void,
): TaskView {
  const root = doc.createElement("div");
  root.className = "task";

  const status = doc.createElement("div");
  status.className = "status-bar";
  const queue = task.queue;
  const iaaBadge = task.iaa_due ? " — agreement check due first" : "";
  status.textContent =
    `task ${queue.position} of ${queue.pending_total} pending` +
    `${iaaBadge} (${queue.iaa_remaining_for_you} agreement tasks left for you)`;
  root.appendChild(status);

  const question = doc.createElement("h2");
  question.className = "question";
  const xBold = doc.createElement("b");
  xBold.textContent = task.mentions.news.surface;
  const yBold = doc.createElement("b");
  yBold.textContent = task.mentions.science.surface;
  question.append("Are ", xBold, " and ", yBold, " mentions of the same entity?");
  root.appendChild(question);

  const panels = doc.createElement("div");
  panels.className = "panels";
  const news = panel(doc, task.documents.news, task.mentions.news, task.co_clustered, onOverlap);
  const science = panel(
    doc,
    task.documents.science,
    task.mentions.science,
    task.co_clustered,
    onOverlap,
  );
  panels.append(news.panel, science.panel);
  root.appendChild(panels);

  const controls = doc.createElement("div");
  controls.className = "controls";

  const yesButton = doc.createElement("button");
  yesButton.type = "button";
  yesButton.className = "verdict-yes";
  yesButton.textContent = "Yes";

  const noButton = doc.createElement("button");
  noButton.type = "button";
  noButton.className = "verdict-no";
  noButton.textContent = "No";

  const difficultLabel = doc.createElement("label");
  difficultLabel.className = "difficult";
  const difficultToggle = doc.createElement("input");
  difficultToggle.type = "checkbox";
  difficultToggle.checked = task.difficult;
  difficultLabel.append(difficultToggle, " flag as difficult");

  const proposeButton = doc.createElement("button");
  proposeButton.type = "button";
  proposeButton.className = "propose";
  proposeButton.textContent = "select a different co-referent mention";

  const resizeButton = doc.createElement("button");
  resizeButton.type = "button";
  resizeButton.className = "resize";
  resizeButton.textContent = "move/resize mention span";

  controls.append(yesButton, noButton, difficultLabel, proposeButton, resizeButton);
  root.appendChild(controls);

  const notice = doc.createElement("p");
  notice.className = "notice";
  root.appendChild(notice);

  return {
    root,
    question,
    panels: { news: news.panel, science: science.panel },
    summaries: { news: news.summary, science: science.summary },
    yesButton,
    noButton,
    difficultToggle,
    proposeButton,
    resizeButton,
    notice,
  };
}
