"""Command-line interface for the workbench."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import _kernels, baselines, metrics
from .config import load_config
from .errors import CrossdocError
from .pairs import rank_candidates
from .store import Store


def _open_store(ctx) -> Store:
    config = ctx.obj["config"]
    return Store(
        config.store_dir,
        config=config.queue_config(),
        snapshot_interval=config.snapshot_interval,
    )


def _echo_report(report) -> None:
    click.echo(f"new: {report.new}  duplicates: {report.duplicates}")
    for err in report.errors:
        click.echo(f"  error: {err}", err=True)


@click.group()
@click.option(
    "--config",
    "-c",
    "config_path",
    type=click.Path(exists=True, path_type=Path),
    default=None,
    help="YAML config file; flags override it.",
)
@click.option("--store-dir", type=click.Path(path_type=Path), default=None)
@click.option("--seed", type=int, default=None, help="Sampling seed (overrides config).")
@click.pass_context
def main(ctx, config_path, store_dir, seed):
    ctx.ensure_object(dict)
    ctx.obj["config"] = load_config(config_path, store_dir=store_dir, sampling_seed=seed)


@main.command()
@click.option("--pairs", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--mentions", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--embeddings", type=click.Path(exists=True, path_type=Path), default=None)
@click.option(
    "--stub-embed",
    "stub_dim",
    type=int,
    default=None,
    help="Attach deterministic stub embeddings of this dimension to every pair.",
)
@click.pass_context
def ingest(ctx, pairs, mentions, embeddings, stub_dim):
    """Load document pairs, mentions and/or embeddings into the store."""
    store = _open_store(ctx)
    try:
        if pairs:
            click.echo(f"document pairs from {pairs}")
            _echo_report(store.ingest_document_pairs(pairs))
        if embeddings:
            table = store.load_embeddings(embeddings)
            click.echo(f"embeddings for pair {table.pair_id} (dim {table.dim})")
        if stub_dim:
            for pair_id in list(store.engine.state.document_pairs):
                if pair_id not in store.engine.state.embeddings:
                    store.stub_embed_pair(pair_id, d=stub_dim)
            click.echo(f"stub embeddings attached (dim {stub_dim})")
        if mentions:
            click.echo(f"mentions from {mentions}")
            _echo_report(store.load_mentions(mentions))
        report = store.validate()
        click.echo(json.dumps(report.to_doc()))
    finally:
        store.close()


@main.command("gen-pairs")
@click.option("--pair-id", default=None, help="Only this document pair.")
@click.option("--out", "-o", type=click.File("w"), default="-")
@click.pass_context
def gen_pairs(ctx, pair_id, out):
    """Generate and rank candidate mention pairs; emits one record per line."""
    store = _open_store(ctx)
    try:
        engine = store.engine
        pair_ids = [pair_id] if pair_id else sorted(engine.state.document_pairs)
        created = 0
        for pid in pair_ids:
            created += len(engine.generate_candidates(pid))
        ranked = rank_candidates(
            list(engine.state.pairs.values()), mode=engine.config.ranking_mode
        )
        for pair in ranked:
            a, b = (engine.state.mentions[m] for m in pair.pair_key)
            out.write(
                json.dumps(
                    {
                        "pair_key": list(pair.pair_key),
                        "surfaces": [a.surface, b.surface],
                        "similarity": pair.similarity,
                        "iaa": pair.iaa,
                        "status": pair.status,
                    }
                )
                + "\n"
            )
        click.echo(f"created {created} new candidates", err=True)
    finally:
        store.close()


@main.command()
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option(
    "--static",
    "static_dir",
    type=click.Path(path_type=Path),
    default=None,
    help="Directory with the built browser UI to serve at /.",
)
@click.pass_context
def serve(ctx, host, port, static_dir):
    """Run the annotation HTTP service."""
    from .service import serve as run_service

    config = ctx.obj["config"]
    store = _open_store(ctx)
    run_service(
        store,
        host=host or config.host,
        port=port or config.port,
        static_dir=static_dir,
    )


@main.command()
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.pass_context
def kappa(ctx, as_json):
    """Inter-annotator agreement report."""
    store = _open_store(ctx)
    try:
        report = store.agreement_report()
        if as_json:
            click.echo(json.dumps(report.to_doc()))
            return
        click.echo("annotations per annotator:")
        for annotator, count in report.annotation_counts.items():
            click.echo(f"  {annotator}: {count}")
        click.echo("pairwise Cohen's kappa:")
        for p in report.pairwise:
            value = "undefined" if p.kappa is None else f"{p.kappa:.3f} ({p.band})"
            click.echo(f"  {p.annotator_a} vs {p.annotator_b}: {value} over {p.overlap} pairs")
        for name, f in (("Fleiss", report.fleiss), ("difficult-subset Fleiss", report.difficult_fleiss)):
            if f is None:
                continue
            value = "undefined" if f.kappa is None else f"{f.kappa:.3f} ({f.band})"
            click.echo(f"{name}: {value} over {f.items} items, {f.raters} raters")
    finally:
        store.close()


@main.command()
@click.argument("gold", type=click.Path(exists=True, path_type=Path))
@click.argument("system", type=click.Path(exists=True, path_type=Path))
@click.option("--metric", type=click.Choice(["muc", "b3"]), required=True)
@click.option("--keep-singletons", is_flag=True, help="Skip gold singleton removal (B3 only).")
def score(gold, system, metric, keep_singletons):
    """Score a system cluster file against a gold cluster file."""
    gold_clusters = metrics.read_cluster_file(gold)
    system_clusters = metrics.read_cluster_file(system)
    if metric == "muc":
        report = metrics.muc_score(gold_clusters, system_clusters)
    else:
        report = metrics.b3_score(
            gold_clusters, system_clusters, remove_singletons=not keep_singletons
        )
    click.echo(json.dumps(report.to_doc()))


@main.command("sweep-threshold")
@click.option("--split", default=None, help="Restrict to document pairs with this split label.")
@click.option("--t-min", type=float, default=0.30, show_default=True)
@click.option("--t-max", type=float, default=0.80, show_default=True)
@click.option("--step", type=float, default=0.01, show_default=True)
@click.pass_context
def sweep_threshold_cmd(ctx, split, t_min, t_max, step):
    """Grid-search the similarity cutoff on gold-labelled pairs in the store."""
    store = _open_store(ctx)
    try:
        dev = store.labeled_pairs(split=split)
        best_t, curve = baselines.sweep_threshold(dev, t_min=t_min, t_max=t_max, step=step)
        click.echo(
            json.dumps(
                {
                    "best_t": best_t,
                    "pairs": len(dev),
                    "thresholds_evaluated": len(curve),
                    "curve": [[t, a] for t, a in curve],
                }
            )
        )
    finally:
        store.close()


@main.command("cluster-scores")
@click.argument("scores", type=click.Path(exists=True, path_type=Path))
@click.option("--tau", type=float, default=None, help="Stop threshold (default from config).")
@click.option("--linkage", type=click.Choice(["average", "single", "complete"]), default=None)
@click.option("--out", "-o", type=click.File("w"), default="-")
@click.pass_context
def cluster_scores(ctx, scores, tau, linkage, out):
    """Agglomerate an external pairwise-score file into clusters."""
    config = ctx.obj["config"]
    matrix, errors = baselines.load_external_scores(scores)
    for err in errors:
        click.echo(f"  error: {err}", err=True)
    clusters = baselines.agglomerative_cluster(
        matrix,
        stop_threshold=config.cluster_tau if tau is None else tau,
        linkage=linkage or config.linkage,
    )
    baselines.write_clusters_jsonl(clusters, out)
    click.echo(f"{len(clusters)} clusters from {len(matrix.mention_ids)} mentions", err=True)


@main.command("capability-test")
@click.argument("cases", type=click.Path(exists=True, path_type=Path))
@click.option(
    "--predictions",
    type=click.Path(exists=True, path_type=Path),
    required=True,
    help="JSONL of {mention_id_a, mention_id_b, predicted}.",
)
@click.option("--json", "as_json", is_flag=True)
def capability_test(cases, predictions, as_json):
    """Per-category pass rates for expected-coreference test cases."""
    case_list = []
    with open(cases, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            case_list.append(
                metrics.CapabilityCase(
                    category=row["category"],
                    expected=row["expected"],
                    mention_id_a=row["mention_id_a"],
                    mention_id_b=row["mention_id_b"],
                )
            )
    predicted = {}
    with open(predictions, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            key = tuple(sorted((row["mention_id_a"], row["mention_id_b"])))
            predicted[key] = row["predicted"]
    cells = metrics.capability_report(case_list, predicted)
    if as_json:
        click.echo(
            json.dumps(
                [
                    {
                        "category": c.category,
                        "expected": c.expected,
                        "passes": c.passes,
                        "total": c.total,
                        "pass_rate": c.pass_rate,
                    }
                    for c in cells
                ]
            )
        )
        return
    for cell in cells:
        click.echo(f"{cell.category} / {cell.expected}: {cell.formatted()}")


@main.command()
@click.option("--split", default=None)
@click.option("--bin-width", type=float, default=0.05, show_default=True)
@click.option("--out", "-o", type=click.File("w"), default="-")
@click.pass_context
def histogram(ctx, split, bin_width, out):
    """Similarity distribution of labelled pairs as CSV rows."""
    store = _open_store(ctx)
    try:
        labelled = [
            (sim, gold) for sim, gold in store.labeled_pairs(split=split) if sim is not None
        ]
        rows = metrics.similarity_histogram(labelled, bin_width=bin_width)
        out.write("bin_start,count_yes,count_no\n")
        for start, yes, no in rows:
            out.write(f"{start},{yes},{no}\n")
    finally:
        store.close()


@main.command()
@click.argument("what", type=click.Choice(["clusters", "difficult"]))
@click.option("--split", default=None)
@click.option("--out", "-o", type=click.File("w"), default="-")
@click.pass_context
def export(ctx, what, split, out):
    """Export clusters (scorer format) or difficult-flagged pairs."""
    store = _open_store(ctx)
    try:
        if what == "clusters":
            metrics.write_cluster_file(out, store.export_clusters(split=split))
        else:
            for row in store.difficult_pairs():
                out.write(json.dumps(row) + "\n")
    finally:
        store.close()


@main.command()
def backend():
    """Print which kernel backend is active."""
    click.echo(_kernels.backend())


def run() -> None:
    try:
        main(obj={})
    except CrossdocError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    run()
