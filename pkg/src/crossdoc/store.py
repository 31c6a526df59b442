"""Durable event-sourced persistence.

The log is one JSON record per line, each carrying a sha256 checksum of its
own content. Opening a store replays the latest snapshot plus the log tail;
a torn tail (crash mid-write) is detected by checksum or truncated JSON and
discarded, so the last fully-written record always wins.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Optional

from .agreement import build_report
from .engine import AnnotationEngine, QueueConfig
from .errors import ConflictError, FormatError
from .ingest import (
    IngestReport,
    load_embedding_file,
    parse_pair_record,
    iter_jsonl,
    stub_embed,
)
from .model import ValidationReport, validate_corpus

LOG_NAME = "events.log"
SNAP_DIR = "snapshots"
DEFAULT_SNAPSHOT_INTERVAL = 1000


def _record_checksum(record: dict) -> str:
    body = {k: record[k] for k in ("seq", "ts", "kind", "payload")}
    return hashlib.sha256(
        json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()


class EventLog:
    """Append-only checksummed record log over one file."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = None

    def append(self, record: dict) -> None:
        if self._fh is None:
            self._fh = open(self.path, "a", encoding="utf-8")
        stored = dict(record)
        stored["sha"] = _record_checksum(record)
        self._fh.write(json.dumps(stored, sort_keys=True, separators=(",", ":")) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def read_valid(self, repair: bool = False) -> list[dict]:
        """All records up to the first corrupt one.

        With ``repair`` the file is truncated after the last valid record so
        subsequent appends continue a clean log.
        """
        records: list[dict] = []
        if not self.path.exists():
            return records
        good_offset = 0
        expected_seq = None
        with open(self.path, "rb") as fh:
            while True:
                line = fh.readline()
                if not line:
                    break
                if not line.endswith(b"\n"):
                    break  # torn final line
                try:
                    record = json.loads(line.decode("utf-8"))
                    sha = record.pop("sha")
                except (json.JSONDecodeError, UnicodeDecodeError, KeyError, AttributeError):
                    break
                if _record_checksum(record) != sha:
                    break
                if expected_seq is not None and record["seq"] != expected_seq:
                    break
                expected_seq = record["seq"] + 1
                records.append(record)
                good_offset = fh.tell()
        if repair and self.path.stat().st_size > good_offset:
            with open(self.path, "rb+") as fh:
                fh.truncate(good_offset)
        return records


class Store:
    """An engine bound to a durable log, with snapshotting and file ingest."""

    def __init__(
        self,
        root: Path,
        config: Optional[QueueConfig] = None,
        snapshot_interval: int = DEFAULT_SNAPSHOT_INTERVAL,
    ):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.snapshot_interval = snapshot_interval
        self.log = EventLog(self.root / LOG_NAME)
        self.engine = AnnotationEngine(sink=self._sink)
        self._sink_enabled = False
        self._since_snapshot = 0
        self._open(config)

    # -- lifecycle -----------------------------------------------------------

    def _open(self, config: Optional[QueueConfig]) -> None:
        snapshot = self._latest_snapshot()
        if snapshot is not None:
            self.engine.load_state_doc(snapshot)
        records = self.log.read_valid(repair=True)
        for record in records:
            if record["seq"] > self.engine.last_seq:
                self.engine.apply_record(record)
        self._sink_enabled = True
        if self.engine.state.config is None:
            if config is None:
                raise FormatError("new store needs a config with a sampling_seed")
            self.engine.configure(config)
        elif config is not None:
            # sampling_seed is immutable; other knobs may be re-configured
            self.engine.configure(config)

    def _sink(self, record: dict) -> None:
        if not self._sink_enabled:
            return
        self.log.append(record)
        self._since_snapshot += 1
        if self._since_snapshot >= self.snapshot_interval:
            self.write_snapshot()

    def close(self) -> None:
        self.log.close()

    # -- snapshots ------------------------------------------------------------

    def _snap_dir(self) -> Path:
        d = self.root / SNAP_DIR
        d.mkdir(exist_ok=True)
        return d

    def write_snapshot(self) -> Path:
        doc = self.engine.state_to_doc()
        path = self._snap_dir() / f"snap-{doc['seq']:09d}.json"
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True)
        os.replace(tmp, path)
        self._since_snapshot = 0
        return path

    def _latest_snapshot(self) -> Optional[dict]:
        d = self.root / SNAP_DIR
        if not d.is_dir():
            return None
        snaps = sorted(d.glob("snap-*.json"))
        for path in reversed(snaps):
            try:
                with open(path, encoding="utf-8") as fh:
                    return json.load(fh)
            except (json.JSONDecodeError, OSError):
                continue
        return None

    # -- file ingestion --------------------------------------------------------

    def ingest_document_pairs(self, path) -> IngestReport:
        """Load a document-pair file; idempotent for identical records."""
        report = IngestReport()
        for lineno, record in iter_jsonl(path):
            if isinstance(record, FormatError):
                report.error(lineno, str(record))
                continue
            try:
                pair = parse_pair_record(record)
            except (FormatError, ValueError) as exc:
                report.error(lineno, str(exc))
                continue
            try:
                if self.engine.ingest_pair(pair):
                    report.new += 1
                else:
                    report.duplicates += 1
            except ConflictError as exc:
                report.error(lineno, str(exc))
        return report

    def load_mentions(self, path) -> IngestReport:
        """Load a mentions file; surfaces derive from stored summaries."""
        report = IngestReport()
        for lineno, record in iter_jsonl(path):
            if isinstance(record, FormatError):
                report.error(lineno, str(record))
                continue
            try:
                doc_id = str(record["doc_id"])
                start, end = int(record["start_char"]), int(record["end_char"])
            except (KeyError, TypeError, ValueError) as exc:
                report.error(lineno, f"malformed mention record ({exc})")
                continue
            try:
                created = self.engine.add_mention(doc_id, start, end)
            except KeyError as exc:
                report.error(lineno, str(exc))
                continue
            except Exception as exc:  # span errors carry their own message
                report.error(lineno, str(exc))
                continue
            if created:
                report.new += 1
            else:
                report.duplicates += 1
        return report

    def load_embeddings(self, path):
        """Load one embedding table file and attach it to its document pair."""
        table = load_embedding_file(path, self.engine.state.documents)
        self.engine.add_embeddings(table)
        return table

    def stub_embed_pair(self, pair_id: str, d: int = 32, seed: Optional[int] = None):
        """Attach deterministic stub embeddings to a stored pair (for tests/demos)."""
        pair = self.engine.state.document_pairs[pair_id]
        table = stub_embed(pair, d=d, seed=self.engine.config.sampling_seed if seed is None else seed)
        self.engine.add_embeddings(table)
        return table

    # -- reporting -------------------------------------------------------------

    def validate(self) -> ValidationReport:
        return validate_corpus(self.engine.state)

    def agreement_report(self):
        state = self.engine.state
        verdicts = {(a, k): v for (a, k), (v, _, _) in state.verdicts.items()}
        difficult = {k: set(flags) for k, flags in state.difficult_by.items() if flags}
        return build_report(verdicts, difficult)

    def _split_of(self, pair_id: str) -> Optional[str]:
        pair = self.engine.state.document_pairs.get(pair_id)
        return pair.split if pair else None

    def labeled_pairs(self, split: Optional[str] = None) -> list[tuple[Optional[float], bool]]:
        """(similarity, is-coreferent) for every gold-labelled candidate pair."""
        out = []
        for pair in self.engine.state.pairs.values():
            if pair.gold not in ("coreferent", "not_coreferent"):
                continue
            if split is not None and self._split_of(pair.pair_id) != split:
                continue
            out.append((pair.similarity, pair.gold == "coreferent"))
        return out

    def export_clusters(
        self, split: Optional[str] = None
    ) -> list[tuple[str, list[tuple[str, int, int]]]]:
        """(cluster_id, [(doc_id, start, end), ...]) groups in export order."""
        state = self.engine.state
        groups = []
        for cluster in state.clusters.partition():
            mentions = []
            for mid in cluster.mention_ids:
                mention = state.mentions.get(mid)
                if mention is None:
                    continue
                if split is not None:
                    pair_id = state.doc_to_pair.get(mention.doc_id)
                    if pair_id is None or self._split_of(pair_id) != split:
                        continue
                mentions.append((mention.doc_id, mention.start_char, mention.end_char))
            if mentions:
                groups.append((cluster.cluster_id, sorted(mentions)))
        return sorted(groups)

    def difficult_pairs(self) -> list[dict]:
        """One record per pair flagged difficult (by a user or by a consensus tie)."""
        state = self.engine.state
        out = []
        flagged = set(k for k, v in state.difficult_by.items() if v) | state.auto_difficult
        for key in sorted(flagged):
            pair = state.pairs.get(key)
            if pair is None:
                continue
            out.append(
                {
                    "pair_key": list(key),
                    "pair_id": pair.pair_id,
                    "flagged_by": sorted(state.difficult_by.get(key, set())),
                    "auto_flagged": key in state.auto_difficult,
                    "gold": pair.gold,
                }
            )
        return out
