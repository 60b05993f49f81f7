"""Command-line entrypoint binding all pipeline stages.

Stage boundaries are files so any stage can be swapped out; every command
re-run on identical inputs produces identical outputs (given seeds/stubs).
Exit codes: 0 success, 1 input validation failure, 2 runtime failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import yaml

from . import baselines as baselines_mod
from . import dataset as dataset_mod
from . import evaluation as eval_mod
from . import pipeline as pipeline_mod
from .config import load_feature_config
from .errors import SchemaError, StorageBenchError
from .features import featurize
from .gateway import EndpointConfig
from .prompting import (
    STRATEGIES,
    build_bbox_prompt,
    build_gdino_prompt,
    build_instructional,
    build_kosmos_prompt,
    build_story,
    build_structured,
)
from .scene import detections_from_dict, table_from_dict, table_to_dict
from .verbalize import describe_scene

TABLES_SCHEMA = "storagebench/tables@1"


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}", line=exc.lineno) from None


def _load_tables(path) -> dict:
    doc = _load_json(path)
    if not isinstance(doc, dict) or doc.get("schema") != TABLES_SCHEMA:
        raise SchemaError(
            f"{path} does not declare schema {TABLES_SCHEMA!r}", field="schema"
        )
    return {t["image_id"]: table_from_dict(t) for t in doc["tables"]}


def _save_tables(path, tables) -> None:
    payload = {
        "schema": TABLES_SCHEMA,
        "tables": [table_to_dict(t) for t in tables],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1), encoding="utf-8")


def _load_endpoint(path) -> EndpointConfig:
    text = Path(path).read_text(encoding="utf-8")
    doc = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    try:
        return EndpointConfig(**doc)
    except TypeError as exc:
        raise SchemaError(f"bad endpoint config: {exc}") from None


def run_guarded(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (SchemaError, ValueError) as exc:
        _fail(str(exc), 1)
    except (StorageBenchError, OSError) as exc:
        _fail(str(exc), 2)


@click.group()
def main():
    """Storage-prediction benchmark pipeline."""


@main.command()
@click.option("--detections", "detections_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
def ingest(detections_path, out_path, config_path):
    """Detections JSON -> container tables (ids assigned, labels parsed)."""

    def run():
        cfg = load_feature_config(config_path)
        doc = _load_json(detections_path)
        documents = doc if isinstance(doc, list) else [doc]
        tables = []
        next_global = 1
        for index, entry in enumerate(documents):
            try:
                table = detections_from_dict(entry, global_id_start=next_global, config=cfg)
            except SchemaError as exc:
                raise SchemaError(f"document {index}: {exc}", line=index) from None
            next_global += len(table.containers)
            tables.append(table)
        _save_tables(out_path, tables)
        click.echo(f"ingested {len(tables)} images, {next_global - 1} containers")

    run_guarded(run)


@main.command()
@click.option("--tables", "tables_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
def features(tables_path, out_path, config_path):
    """Populate aspect, countertop, neighbor, and anchor features."""

    def run():
        cfg = load_feature_config(config_path)
        tables = _load_tables(tables_path)
        done = [featurize(t, cfg) for t in tables.values()]
        _save_tables(out_path, done)
        click.echo(f"featurized {len(done)} images")

    run_guarded(run)


@main.command()
@click.option("--tables", "tables_path", required=True, type=click.Path(exists=True))
@click.option("--image-id", "image_id")
def describe(tables_path, image_id):
    """Print container description lines."""

    def run():
        tables = _load_tables(tables_path)
        selected = [tables[image_id]] if image_id else list(tables.values())
        for table in selected:
            for line in describe_scene(table):
                click.echo(line)

    run_guarded(run)


@main.command()
@click.option("--tables", "tables_path", required=True, type=click.Path(exists=True))
@click.option("--image-id", "image_id", required=True)
@click.option("--item", required=True)
@click.option("--strategy", type=click.Choice(STRATEGIES), default="structured")
def prompt(tables_path, image_id, item, strategy):
    """Print the exact prompt for one item-image pair as JSON."""

    def run():
        tables = _load_tables(tables_path)
        table = tables[image_id]
        if strategy == "gdino":
            click.echo(json.dumps({"strategy": strategy, "text": build_gdino_prompt(item)}))
            return
        if strategy == "gdino_no_item":
            click.echo(json.dumps({"strategy": strategy, "text": build_gdino_prompt(None)}))
            return
        if strategy == "kosmos":
            click.echo(json.dumps({"strategy": strategy, "text": build_kosmos_prompt(item)}))
            return
        descriptions = describe_scene(table)
        if strategy == "structured":
            bundle = build_structured(item, descriptions)
        elif strategy == "instructional":
            bundle = build_instructional([item], descriptions)
        elif strategy == "story":
            bundle = build_story(item, descriptions)
        else:
            flavor = "gemini" if strategy == "bbox_gemini" else "openai_style"
            bundle = build_bbox_prompt(item, flavor)
        click.echo(
            json.dumps(
                {
                    "strategy": bundle.strategy,
                    "system_text": bundle.system_text,
                    "user_text": bundle.user_text,
                },
                sort_keys=True,
            )
        )

    run_guarded(run)


@main.command("sample-pairs")
@click.option("--tables", "tables_path", required=True, type=click.Path(exists=True))
@click.option("--items", required=True, help="comma-separated item names")
@click.option("--per-item", type=int, required=True)
@click.option("--seed", type=int, default=0)
@click.option("--real-world-ids", "real_world_path", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def sample_pairs_cmd(tables_path, items, per_item, seed, real_world_path, config_path, out_path):
    """Sample benchmark item-image pairs from eligible scenes."""

    def run():
        cfg = load_feature_config(config_path)
        tables = list(_load_tables(tables_path).values())
        real_ids = frozenset()
        if real_world_path:
            real_ids = frozenset(
                line.strip()
                for line in Path(real_world_path).read_text(encoding="utf-8").splitlines()
                if line.strip()
            )
        pairs = dataset_mod.sample_pairs(
            tables, [i.strip() for i in items.split(",")], per_item, seed, real_ids,
            vocabulary=cfg.items,
        )
        dataset_mod.save_jsonl(out_path, pairs)
        click.echo(f"sampled {len(pairs)} pairs")

    run_guarded(run)


@main.command()
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True))
@click.option("--tables", "tables_path", required=True, type=click.Path(exists=True))
@click.option("--strategy", type=click.Choice(pipeline_mod.GATEWAY_STRATEGIES), default="structured")
@click.option("--endpoint-config", "endpoint_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--resume", is_flag=True, default=False)
@click.option("--workers", type=int, default=1)
@click.option("--images-dir", "images_dir", type=click.Path(exists=True))
@click.option("--audit-log", "audit_log", type=click.Path())
def predict(pairs_path, tables_path, strategy, endpoint_path, out_path, resume, workers, images_dir, audit_log):
    """Query an LLM endpoint for every pair; checkpoint and resume safely."""

    def run():
        from .gateway import ChatGateway

        pairs = dataset_mod.load_pairs(pairs_path)
        tables = _load_tables(tables_path)
        endpoint = _load_endpoint(endpoint_path)
        gateway = ChatGateway(audit_log_path=audit_log)
        total = pipeline_mod.run_predictions(
            pairs,
            tables,
            strategy,
            endpoint,
            out_path,
            gateway=gateway,
            resume=resume,
            workers=workers,
            images_dir=images_dir,
        )
        click.echo(f"wrote {total} predictions")

    run_guarded(run)


@main.command()
@click.option("--kind", type=click.Choice(["random", "gdino_item", "gdino_no_item"]), required=True)
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True))
@click.option("--tables", "tables_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=0)
@click.option("--item-detections", "item_detections_path", type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def baseline(kind, pairs_path, tables_path, seed, item_detections_path, out_path):
    """Run a non-LLM reference predictor."""

    def run():
        pairs = dataset_mod.load_pairs(pairs_path)
        if kind == "random":
            if not tables_path:
                raise ValueError("random baseline needs --tables")
            tables = _load_tables(tables_path)
            total = baselines_mod.run_random_baseline(pairs, tables, seed, out_path)
        else:
            if not item_detections_path:
                raise ValueError(f"{kind} baseline needs --item-detections")
            detections = baselines_mod.load_item_detections(item_detections_path)
            total = baselines_mod.run_highest_confidence_baseline(
                pairs, detections, kind, out_path
            )
        click.echo(f"wrote {total} predictions")

    run_guarded(run)


@main.command()
@click.option("--annotations", "annotations_path", required=True, type=click.Path(exists=True))
@click.option("--pairs", "pairs_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--audit", "audit_path", type=click.Path())
def consolidate(annotations_path, pairs_path, seed, out_path, audit_path):
    """Dedup annotations and consolidate them into ground truth."""

    def run():
        annotations = dataset_mod.load_annotations(annotations_path)
        cleaned, conflicts = dataset_mod.dedup(annotations)
        expected = None
        if pairs_path:
            expected = [p.pair_id for p in dataset_mod.load_pairs(pairs_path)]
        truths, missing = dataset_mod.consolidate(cleaned, seed, expected_pair_ids=expected)
        dataset_mod.save_jsonl(out_path, truths)
        if audit_path:
            with open(audit_path, "w", encoding="utf-8") as fh:
                for entry in conflicts + missing:
                    fh.write(json.dumps(entry, sort_keys=True) + "\n")
        click.echo(
            f"consolidated {len(truths)} pairs "
            f"({len(conflicts)} conflicts, {len(missing)} without annotations)"
        )

    run_guarded(run)


@main.command()
@click.option("--annotations", "annotations_path", required=True, type=click.Path(exists=True))
@click.option("--per-item", "per_item", is_flag=True, default=False)
@click.option("--pairs", "pairs_path", type=click.Path(exists=True))
@click.option("--raters", type=int, default=3)
def agreement(annotations_path, per_item, pairs_path, raters):
    """Fleiss' kappa over triple-labeled pairs."""

    def run():
        annotations = dataset_mod.load_annotations(annotations_path)
        cleaned, _ = dataset_mod.dedup(annotations)
        if per_item:
            if not pairs_path:
                raise ValueError("--per-item needs --pairs for the item mapping")
            pair_items = {
                p.pair_id: p.item for p in dataset_mod.load_pairs(pairs_path)
            }
            matrices = eval_mod.build_kappa_matrix(
                cleaned, mode="per_item", raters=raters, pair_items=pair_items
            )
            for item, matrix in matrices.items():
                kappa = eval_mod.fleiss_kappa(matrix, raters)
                click.echo(f"{item}: kappa = {kappa:.4f} over {matrix.shape[0]} pairs")
        else:
            matrix = eval_mod.build_kappa_matrix(cleaned, raters=raters)
            kappa = eval_mod.fleiss_kappa(matrix, raters)
            click.echo(f"kappa = {kappa:.4f} over {matrix.shape[0]} pairs")

    run_guarded(run)


@main.command()
@click.option("--predictions", "predictions_path", required=True, type=click.Path(exists=True))
@click.option("--truth", "truth_path", required=True, type=click.Path(exists=True))
@click.option("--tables", "tables_path", required=True, type=click.Path(exists=True))
@click.option("--threshold", type=float, default=0.5)
@click.option("--out", "out_path", type=click.Path())
def evaluate(predictions_path, truth_path, tables_path, threshold, out_path):
    """Score predictions against ground truth; print accuracy and mean IoU."""

    def run():
        predictions = pipeline_mod.load_predictions(predictions_path)
        truths = {t.pair_id: t for t in dataset_mod.load_ground_truth(truth_path)}
        tables = _load_tables(tables_path)
        thresholds = tuple(sorted({0.5, 0.95, 1.0, threshold}))
        records = []
        skipped = 0
        for prediction in predictions:
            truth = truths.get(prediction.pair_id)
            if truth is None or truth.container_local_id is None:
                skipped += 1
                continue
            table = tables[prediction.image_id]
            records.append(eval_mod.score_prediction(prediction, truth, table, thresholds))
        if out_path:
            eval_mod.save_eval_records(out_path, records)
        if not records:
            raise ValueError("no scorable predictions (missing or none-valued ground truth)")
        click.echo(f"accuracy@{threshold:g}: {eval_mod.accuracy(records, threshold):.1f}")
        click.echo(f"mean IoU: {eval_mod.mean_iou(records):.4f}")
        if skipped:
            click.echo(f"skipped {skipped} pairs without container-valued ground truth")

    run_guarded(run)


@main.command("analyze-thresholds")
@click.option("--scored", "scored_path", required=True, type=click.Path(exists=True))
def analyze_thresholds(scored_path):
    """Quality-score vs IoU analysis: per-class stats, weighted average,
    recommended cutoff interval."""

    def run():
        records = []
        for number, line in enumerate(
            Path(scored_path).read_text(encoding="utf-8").splitlines(), start=1
        ):
            if not line.strip():
                continue
            doc = json.loads(line)
            try:
                records.append(
                    eval_mod.QualityScoredRecord(
                        pair_id=doc["pair_id"], iou=doc["iou"], human_score=doc["human_score"]
                    )
                )
            except (KeyError, ValueError) as exc:
                raise SchemaError(f"bad quality record: {exc}", line=number) from None
        report = eval_mod.threshold_analysis(records)
        click.echo(json.dumps(report.to_dict(), sort_keys=True, indent=1))

    run_guarded(run)


@main.command()
@click.argument("eval_files", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--threshold", type=float, default=0.5)
def significance(eval_files, threshold):
    """One-way ANOVA + Bonferroni pairwise tests across eval files."""

    def run():
        per_model = {}
        for path in eval_files:
            records = sorted(eval_mod.load_eval_records(path), key=lambda r: r.pair_id)
            per_model[Path(path).stem] = [int(r.iou >= threshold) for r in records]
        result = eval_mod.significance(per_model)
        click.echo(json.dumps(result.to_dict(), sort_keys=True, indent=1))

    run_guarded(run)


@main.command()
@click.argument("eval_files", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--csv", "csv_path", type=click.Path())
def report(eval_files, csv_path):
    """Accuracy / mean-IoU table across strategies."""

    def run():
        eval_sets = {}
        for path in eval_files:
            records = eval_mod.load_eval_records(path)
            for record in records:
                eval_sets.setdefault(record.strategy, []).append(record)
        text, csv_text = eval_mod.report_tables(eval_sets)
        click.echo(text, nl=False)
        if csv_path:
            Path(csv_path).write_text(csv_text, encoding="utf-8")

    run_guarded(run)


@main.command()
@click.option("--data-dir", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(data_dir, host, port):
    """Serve the annotation API (and UI assets if installed)."""

    def run():
        import uvicorn

        from .service import AnnotationStore, create_app

        app = create_app(AnnotationStore(data_dir))
        uvicorn.run(app, host=host, port=port, log_level="warning")

    run_guarded(run)


if __name__ == "__main__":
    main()
