/**
 * Offset-based text highlighting and its inverse.
 *
 * All offsets are Unicode code-point offsets, matching the service's
 * convention (JS string indices count UTF-16 units, which diverge on
 * astral characters, so every length/slice here goes through code points).
 *
 * The renderer splits the text at every highlight boundary so overlapping
 * ranges are merged visually (each segment carries every class covering it)
 * without ever duplicating or dropping characters. The extractor walks the
 * rendered DOM and recovers, per class, exactly which offsets are
 * highlighted — the round-trip the tests rely on.
 */

function codePointLength(text: string): number {
  let count = 0;
  for (const _ of text) count++;
  return count;
}

export type HighlightClass = "active" | "cluster";

export interface HighlightSpan {
  start: number;
  end: number;
  cls: HighlightClass;
}

export interface OffsetRange {
  start: number;
  end: number;
}

/** Merge overlapping/adjacent ranges into a canonical sorted set. */
export function normalizeRanges(ranges: OffsetRange[]): OffsetRange[] {
  const sorted = [...ranges].sort((a, b) => a.start - b.start || a.end - b.end);
  const out: OffsetRange[] = [];
  for (const r of sorted) {
    if (r.end <= r.start) continue;
    const last = out[out.length - 1];
    if (last && r.start <= last.end) {
      last.end = Math.max(last.end, r.end);
    } else {
      out.push({ start: r.start, end: r.end });
    }
  }
  return out;
}

/**
 * Render `text` into `target`, wrapping highlighted segments in spans with
 * class `hl <cls>`. Overlapping ranges of different classes produce
 * segments carrying both classes; overlaps are reported via `onOverlap`.
 */
export function renderAnnotated(
  text: string,
  highlights: HighlightSpan[],
  doc: Document,
  onOverlap?: (a: HighlightSpan, b: HighlightSpan) => void,
): HTMLElement {
  const container = doc.createElement("div");
  container.className = "summary-text";
  const codePoints = Array.from(text);

  const clamped = highlights
    .map((h) => ({
      start: Math.max(0, Math.min(h.start, codePoints.length)),
      end: Math.max(0, Math.min(h.end, codePoints.length)),
      cls: h.cls,
    }))
    .filter((h) => h.end > h.start);

  if (onOverlap) {
    for (let i = 0; i < clamped.length; i++) {
      for (let j = i + 1; j < clamped.length; j++) {
        const a = clamped[i]!;
        const b = clamped[j]!;
        if (Math.max(a.start, b.start) < Math.min(a.end, b.end)) onOverlap(a, b);
      }
    }
  }

  const boundaries = new Set<number>([0, codePoints.length]);
  for (const h of clamped) {
    boundaries.add(h.start);
    boundaries.add(h.end);
  }
  const points = [...boundaries].sort((a, b) => a - b);

  for (let i = 0; i < points.length - 1; i++) {
    const segStart = points[i]!;
    const segEnd = points[i + 1]!;
    if (segEnd <= segStart) continue;
    const segText = codePoints.slice(segStart, segEnd).join("");
    const classes = new Set<HighlightClass>();
    for (const h of clamped) {
      if (h.start <= segStart && segEnd <= h.end) classes.add(h.cls);
    }
    if (classes.size === 0) {
      container.appendChild(doc.createTextNode(segText));
    } else {
      const span = doc.createElement("span");
      span.className = `hl ${[...classes].sort().join(" ")}`;
      span.textContent = segText;
      container.appendChild(span);
    }
  }
  return container;
}

/**
 * Recover highlighted offset ranges from a rendered container by walking
 * its nodes and counting text lengths. Adjacent segments of one class are
 * merged back, so the result is comparable with the normalized input.
 */
export function extractHighlightRanges(
  container: HTMLElement,
): Record<HighlightClass, OffsetRange[]> {
  const found: Record<HighlightClass, OffsetRange[]> = { active: [], cluster: [] };
  let offset = 0;
  for (const node of Array.from(container.childNodes)) {
    const length = codePointLength(node.textContent ?? "");
    if (node.nodeType === 1) {
      const el = node as HTMLElement;
      for (const cls of ["active", "cluster"] as HighlightClass[]) {
        if (el.classList.contains(cls)) {
          found[cls].push({ start: offset, end: offset + length });
        }
      }
    }
    offset += length;
  }
  return {
    active: normalizeRanges(found.active),
    cluster: normalizeRanges(found.cluster),
  };
}

/**
 * Translate a DOM selection endpoint inside `container` into a code-point
 * offset of the underlying text. DOM offsets are UTF-16 units (text nodes)
 * or child indices (element nodes); both are converted here.
 */
export function nodeOffsetToChar(
  container: HTMLElement,
  node: Node,
  offsetInNode: number,
): number {
  let total = 0;
  const walk = (current: Node): boolean => {
    if (current === node) {
      if (current.nodeType === 3) {
        total += codePointLength((current.textContent ?? "").slice(0, offsetInNode));
      } else {
        const children = Array.from(current.childNodes).slice(0, offsetInNode);
        for (const child of children) {
          total += codePointLength(child.textContent ?? "");
        }
      }
      return true;
    }
    if (current.nodeType === 3) {
      total += codePointLength(current.textContent ?? "");
      return false;
    }
    for (const child of Array.from(current.childNodes)) {
      if (walk(child)) return true;
    }
    return false;
  };
  if (!walk(container)) {
    throw new Error("selection endpoint outside the summary container");
  }
  return total;
}

/** A selection inside one container, as [start, end) character offsets. */
export function selectionToOffsets(
  container: HTMLElement,
  anchorNode: Node,
  anchorOffset: number,
  focusNode: Node,
  focusOffset: number,
): OffsetRange {
  const a = nodeOffsetToChar(container, anchorNode, anchorOffset);
  const b = nodeOffsetToChar(container, focusNode, focusOffset);
  return { start: Math.min(a, b), end: Math.max(a, b) };
}
