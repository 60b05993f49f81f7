"""Scoring, aggregate metrics, agreement statistics, and reporting.

IoU conventions: picking the ground-truth container scores exactly 1.0
without touching the rasterizer; abstentions, parse failures, and pipeline
errors score 0.0; a different container or a raw bounding box is scored by
mask IoU against the true container polygon on the image grid.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as scipy_stats

from . import geometry
from .dataset import AnnotationRecord, GroundTruth
from .errors import DataIntegrityError, UndefinedKappaError
from .pipeline import PredictionRecord
from .scene import ContainerTable

DEFAULT_THRESHOLDS = (0.5, 0.95, 1.0)

QUALITY_SCORES = (0.0, 0.5, 1.0)


@dataclass
class EvalRecord:
    pair_id: str
    strategy: str
    iou: float
    correct_at: dict[float, bool]
    parse_failed: bool = False

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "strategy": self.strategy,
            "iou": self.iou,
            "correct_at": {f"{t:g}": v for t, v in sorted(self.correct_at.items())},
            "parse_failed": self.parse_failed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalRecord":
        return cls(
            pair_id=doc["pair_id"],
            strategy=doc["strategy"],
            iou=doc["iou"],
            correct_at={float(t): v for t, v in doc["correct_at"].items()},
            parse_failed=doc.get("parse_failed", False),
        )


@dataclass
class QualityScoredRecord:
    pair_id: str
    iou: float
    human_score: float  # 0 incorrect, 0.5 partially correct, 1 fully correct

    def __post_init__(self):
        if self.human_score not in QUALITY_SCORES:
            raise ValueError(f"human_score must be one of {QUALITY_SCORES}")


def score_prediction(
    pred: PredictionRecord,
    truth: GroundTruth,
    table: ContainerTable,
    thresholds=DEFAULT_THRESHOLDS,
) -> EvalRecord:
    """Score one prediction against the consolidated ground truth."""
    if truth.container_local_id is None:
        raise DataIntegrityError(f"ground truth for pair {truth.pair_id!r} has no container")
    true_container = table.container_by_local_id(truth.container_local_id)
    if true_container is None:
        raise DataIntegrityError(
            f"ground truth container {truth.container_local_id} missing from "
            f"image {table.image_id!r}"
        )
    image_size = (table.image_width, table.image_height)

    choice = pred.choice
    if pred.error is not None or choice.kind == "none":
        value = 0.0
    elif choice.kind == "container_id":
        if choice.container_local_id == truth.container_local_id:
            value = 1.0
        else:
            chosen = table.container_by_local_id(choice.container_local_id)
            if chosen is None:
                value = 0.0
            else:
                value = geometry.iou(chosen.polygon, true_container.polygon, image_size)
    elif choice.kind == "bbox":
        value = geometry.iou(choice.bbox, true_container.polygon, image_size)
    else:
        raise ValueError(f"unknown choice kind {choice.kind!r}")

    value = min(1.0, max(0.0, value))
    return EvalRecord(
        pair_id=pred.pair_id,
        strategy=pred.strategy,
        iou=value,
        correct_at={t: value >= t for t in thresholds},
        parse_failed=choice.unparsed,
    )


def accuracy(records: list[EvalRecord], threshold: float) -> float:
    """Percentage of records with IoU >= threshold; abstentions and parse
    failures stay in the denominator."""
    if not records:
        raise ValueError("no records to aggregate")
    hits = sum(1 for r in records if r.iou >= threshold)
    return 100.0 * hits / len(records)


def mean_iou(records: list[EvalRecord]) -> float:
    if not records:
        raise ValueError("no records to aggregate")
    return sum(r.iou for r in records) / len(records)


def fleiss_kappa(counts, raters_per_subject: int) -> float:
    """Fleiss' kappa from a subjects x categories matrix of rating counts."""
    matrix = np.asarray(counts, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 2:
        raise ValueError("counts must be a subjects x categories matrix with >= 2 categories")
    n = raters_per_subject
    if n < 2:
        raise ValueError("need at least 2 raters per subject")
    if not np.all(matrix.sum(axis=1) == n):
        raise ValueError(f"every row must sum to {n} ratings")
    subject_agreement = (np.sum(matrix**2, axis=1) - n) / (n * (n - 1))
    p_bar = float(subject_agreement.mean())
    proportions = matrix.sum(axis=0) / matrix.sum()
    p_expected = float(np.sum(proportions**2))
    if p_expected == 1.0:
        raise UndefinedKappaError("all ratings fall in a single category")
    return (p_bar - p_expected) / (1.0 - p_expected)


def build_kappa_matrix(
    annotations: list[AnnotationRecord],
    mode: str = "global",
    raters: int = 3,
    k_max: int | None = None,
    pair_items: dict[str, str] | None = None,
):
    """Rating-count matrix for agreement analysis.

    Subjects are pairs rated by exactly ``raters`` annotators; categories
    are local container indices 1..K_max plus a final "none" column.
    ``global`` returns one matrix; ``per_item`` a dict of matrices keyed by
    item (requires ``pair_items``).
    """
    by_pair: dict[str, list[int | None]] = {}
    for record in annotations:
        by_pair.setdefault(record.pair_id, []).append(record.container_local_id)
    selected = {pid: votes for pid, votes in by_pair.items() if len(votes) == raters}

    def matrix_for(pair_ids):
        votes = [selected[pid] for pid in sorted(pair_ids)]
        top = k_max
        if top is None:
            top = max((v for row in votes for v in row if v is not None), default=0)
        matrix = np.zeros((len(votes), top + 1), dtype=int)
        for row_index, row in enumerate(votes):
            for vote in row:
                column = top if vote is None else vote - 1
                matrix[row_index, column] += 1
        return matrix

    if mode == "global":
        return matrix_for(selected.keys())
    if mode == "per_item":
        if pair_items is None:
            raise ValueError("per_item mode needs a pair_id -> item mapping")
        by_item: dict[str, list[str]] = {}
        for pid in selected:
            by_item.setdefault(pair_items[pid], []).append(pid)
        return {item: matrix_for(pids) for item, pids in sorted(by_item.items())}
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class ThresholdReport:
    per_class: dict[float, dict | None]
    weighted_average: float | None
    cutoff_interval: tuple[float, float] | None

    def to_dict(self) -> dict:
        return {
            "per_class": {f"{k:g}": v for k, v in self.per_class.items()},
            "weighted_average": self.weighted_average,
            "cutoff_interval": list(self.cutoff_interval) if self.cutoff_interval else None,
        }


def threshold_analysis(records: list[QualityScoredRecord]) -> ThresholdReport:
    """Per-quality-class IoU statistics plus the quality-weighted average
    IoU and the recommended binary-threshold interval
    [max IoU among score-0, min IoU among score-1]."""
    per_class: dict[float, dict | None] = {}
    for score in QUALITY_SCORES:
        values = [r.iou for r in records if r.human_score == score]
        if not values:
            per_class[score] = None
            continue
        per_class[score] = {
            "count": len(values),
            "min": min(values),
            "max": max(values),
            "mean": sum(values) / len(values),
        }
    score_sum = sum(r.human_score for r in records)
    weighted = (
        sum(r.human_score * r.iou for r in records) / score_sum if score_sum > 0 else None
    )
    interval = None
    if per_class[0.0] is not None and per_class[1.0] is not None:
        interval = (per_class[0.0]["max"], per_class[1.0]["min"])
    return ThresholdReport(per_class=per_class, weighted_average=weighted, cutoff_interval=interval)


@dataclass
class SignificanceResult:
    f_stat: float
    p_value: float
    comparisons: list[dict]

    def to_dict(self) -> dict:
        return {
            "f_stat": self.f_stat,
            "p_value": self.p_value,
            "comparisons": self.comparisons,
        }


def significance(per_model_correctness: dict[str, list[int]]) -> SignificanceResult:
    """One-way ANOVA over per-pair 0/1 outcomes plus Bonferroni-adjusted
    pairwise t-tests. Degenerate all-identical input is reported as
    F=0, p=1 rather than NaN."""
    if len(per_model_correctness) < 2:
        raise ValueError("need at least 2 models")
    lengths = {len(v) for v in per_model_correctness.values()}
    if len(lengths) != 1:
        raise ValueError("correctness vectors must have equal length")

    groups = {name: np.asarray(v, dtype=float) for name, v in per_model_correctness.items()}
    values = list(groups.values())
    if all(np.all(v == values[0][0]) for v in values):
        f_stat, p_value = 0.0, 1.0
    elif all(np.all(v == v[0]) for v in values):
        # zero within-group variance but different means: perfect separation
        f_stat, p_value = math.inf, 0.0
    else:
        f_stat, p_value = scipy_stats.f_oneway(*values)
        f_stat, p_value = float(f_stat), float(p_value)

    names = sorted(groups)
    pairs = list(itertools.combinations(names, 2))
    comparisons = []
    for a, b in pairs:
        ga, gb = groups[a], groups[b]
        if np.all(ga == ga[0]) and np.all(gb == gb[0]):
            raw = 1.0 if ga[0] == gb[0] else 0.0
        else:
            raw = float(scipy_stats.ttest_ind(ga, gb).pvalue)
            if math.isnan(raw):
                raw = 1.0
        comparisons.append(
            {
                "models": [a, b],
                "raw_p": raw,
                "adjusted_p": min(1.0, raw * len(pairs)),
            }
        )
    return SignificanceResult(f_stat=f_stat, p_value=p_value, comparisons=comparisons)


def report_tables(
    eval_sets: dict[str, list[EvalRecord]],
    thresholds=DEFAULT_THRESHOLDS,
) -> tuple[str, str]:
    """(plain text, CSV) renderings of accuracy/IoU per strategy."""
    header = ["strategy", "pairs"]
    header += [f"accuracy@{t:g} (%)" for t in thresholds]
    header += ["mean IoU"]

    rows = []
    for strategy in sorted(eval_sets):
        records = eval_sets[strategy]
        row = [strategy, str(len(records))]
        row += [f"{accuracy(records, t):.2f}" for t in thresholds]
        row += [f"{mean_iou(records):.3f}"]
        rows.append(row)

    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i]) for i in range(len(header))]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    text = "\n".join(lines) + "\n"

    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(header)
    writer.writerows(rows)
    return text, buffer.getvalue()


def save_eval_records(path, records: list[EvalRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")


def load_eval_records(path) -> list[EvalRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(EvalRecord.from_dict(json.loads(line)))
    return records
