"""Ante hoc candidate ranking and the distance/accuracy correlation table.

``rank_candidates`` applies one dissimilarity computation per candidate
dataset (same labelled reference, same master seed) and orders the
candidates by ascending mean distance -- the lowest-distance candidate
is the one expected to help semi-supervised training most.

``correlate_tables`` reproduces the bundled benchmark analysis: for
each (task, labelled-set size, measure) group it computes the Pearson
correlation between the recorded mean distances and mean accuracies over
the matched (ood_source, pct_ood) configurations.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .dissimilarity import (
    MEASURES,
    DissimilarityParams,
    DistanceReport,
    measure_dissimilarity,
)
from .errors import ValidationError
from .stats import pearson

DATA_DIR_ENV = "MIXMOOD_DATA_DIR"
ACCURACIES_CSV = "accuracies.csv"
DISTANCES_CSV = "distances.csv"
_PCTS = (0, 50, 100)


@dataclass(frozen=True)
class RankingReport:
    labelled_id: str
    entries: tuple[tuple[str, DistanceReport], ...]  # ascending by d_bar
    best: str
    measure: str
    params: DissimilarityParams

    def to_json_dict(self) -> dict:
        return {
            "labelled_id": self.labelled_id,
            "entries": [
                {"candidate_id": name, **report.to_json_dict()}
                for name, report in self.entries
            ],
            "best": self.best,
            "measure": self.measure,
            "params": {
                "measure": self.params.measure,
                "tau": self.params.tau,
                "rounds": self.params.rounds,
                "bins": self.params.bins,
                "seed": self.params.seed,
            },
        }


@dataclass(frozen=True)
class AccuracyRow:
    task: str
    ood_source: str
    pct_ood: int
    n_l: int
    mean: float
    std: float


@dataclass(frozen=True)
class DistanceRow:
    task: str
    ood_source: str
    pct_ood: int
    measure: str
    mean: float
    std: float


@dataclass(frozen=True)
class CorrelationTable:
    rows: tuple[tuple[str, int, str, float], ...]  # (task, n_l, measure, r)

    def to_csv(self) -> str:
        lines = ["task,n_l,measure,r"]
        lines.extend(
            f"{task},{n_l},{measure},{r:.6f}" for task, n_l, measure, r in self.rows
        )
        return "\n".join(lines) + "\n"


def rank_candidates(
    labelled,
    candidates,
    params: DissimilarityParams,
    labelled_id: str = "labelled",
    n_threads: int = 1,
) -> RankingReport:
    """Rank named candidate datasets by dissimilarity to the labelled set.

    ``candidates`` maps candidate id to feature matrix (a mapping or a
    sequence of (id, matrix) pairs).  Entries come back sorted ascending
    by mean distance, ties broken lexicographically by id; candidates
    with a low-confidence p-value stay in the ranking, only flagged.
    """
    if hasattr(candidates, "items"):
        pairs = list(candidates.items())
    else:
        pairs = list(candidates)
    if not pairs:
        raise ValidationError("candidate list is empty")
    names = [name for name, _ in pairs]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise ValidationError(f"duplicate candidate names: {', '.join(dupes)}")

    scored = []
    for name, matrix in pairs:
        try:
            report = measure_dissimilarity(labelled, matrix, params, n_threads=n_threads)
        except ValidationError as exc:
            raise ValidationError(f"candidate {name!r}: {exc}") from exc
        scored.append((name, report))
    scored.sort(key=lambda item: (item[1].d_bar, item[0]))
    return RankingReport(
        labelled_id=labelled_id,
        entries=tuple(scored),
        best=scored[0][0],
        measure=params.measure,
        params=params,
    )


def emit_ranking_json(report: RankingReport) -> str:
    """Stable-key-order JSON; byte-identical for identical inputs."""
    return json.dumps(report.to_json_dict(), indent=2)


# --- bundled benchmark tables -------------------------------------------------


def bundled_table_path(name: str) -> Path:
    """Resolve a bundled table: $MIXMOOD_DATA_DIR first, package data else."""
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env) / name
    return Path(resources.files("mixmood").joinpath(f"data/paper/{name}"))


def _read_rows(path, expected: list[str]) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != expected:
            raise ValidationError(
                f"{path}: header {reader.fieldnames} does not match {expected}"
            )
        return list(reader)


def _parse_common(path, lineno: int, row: dict) -> tuple[str, str, int, float, float]:
    try:
        pct = int(row["pct_ood"])
        mean = float(row["mean"])
        std = float(row["std"])
    except ValueError as exc:
        raise ValidationError(f"{path}: line {lineno}: {exc}") from None
    if pct not in _PCTS:
        raise ValidationError(
            f"{path}: line {lineno}: pct_ood must be one of {_PCTS}, got {pct}"
        )
    if std < 0:
        raise ValidationError(f"{path}: line {lineno}: std must be >= 0, got {std}")
    return row["task"], row["ood_source"], pct, mean, std


def load_accuracy_table(path) -> list[AccuracyRow]:
    rows = []
    for lineno, raw in enumerate(
        _read_rows(path, ["task", "ood_source", "pct_ood", "n_l", "mean", "std"]),
        start=2,
    ):
        task, src, pct, mean, std = _parse_common(path, lineno, raw)
        try:
            n_l = int(raw["n_l"])
        except ValueError:
            raise ValidationError(
                f"{path}: line {lineno}: n_l must be an integer, got {raw['n_l']!r}"
            ) from None
        rows.append(AccuracyRow(task, src, pct, n_l, mean, std))
    return rows


def load_distance_table(path) -> list[DistanceRow]:
    rows = []
    for lineno, raw in enumerate(
        _read_rows(path, ["task", "ood_source", "pct_ood", "measure", "mean", "std"]),
        start=2,
    ):
        task, src, pct, mean, std = _parse_common(path, lineno, raw)
        measure = raw["measure"]
        if measure not in MEASURES:
            raise ValidationError(
                f"{path}: line {lineno}: unknown measure {measure!r}"
            )
        rows.append(DistanceRow(task, src, pct, measure, mean, std))
    return rows


def correlate_tables(
    accuracies: list[AccuracyRow], distances: list[DistanceRow]
) -> CorrelationTable:
    """Pearson r between mean distances and mean accuracies per group.

    Groups are (task, n_l, measure); the paired configurations are the
    (ood_source, pct_ood) keys present in the distance table for that
    task.  Accuracy rows without a distance counterpart (the 0% OOD
    baselines) take no part in the correlation.
    """
    acc_by_key = {(r.task, r.ood_source, r.pct_ood, r.n_l): r.mean for r in accuracies}
    dist_groups: dict[tuple[str, str], list[DistanceRow]] = {}
    for row in distances:
        dist_groups.setdefault((row.task, row.measure), []).append(row)

    tasks = list(dict.fromkeys(r.task for r in accuracies))
    n_ls = sorted({r.n_l for r in accuracies})
    out = []
    for task in tasks:
        for n_l in n_ls:
            for measure in MEASURES:
                group = dist_groups.get((task, measure))
                if not group:
                    raise ValidationError(
                        f"no distance rows for task {task!r}, measure {measure!r}"
                    )
                missing = [
                    (row.ood_source, row.pct_ood)
                    for row in group
                    if (task, row.ood_source, row.pct_ood, n_l) not in acc_by_key
                ]
                if missing:
                    raise ValidationError(
                        f"accuracy rows missing for task {task!r}, n_l={n_l}: "
                        f"{sorted(set(missing))}"
                    )
                if len(group) < 2:
                    raise ValidationError(
                        f"need >= 2 matched pairs for task {task!r}, "
                        f"measure {measure!r}, got {len(group)}"
                    )
                xs = [row.mean for row in group]
                ys = [acc_by_key[(task, row.ood_source, row.pct_ood, n_l)] for row in group]
                out.append((task, n_l, measure, pearson(xs, ys).r))
    return CorrelationTable(rows=tuple(out))


def correlate_bundled() -> CorrelationTable:
    """Correlation table from the bundled benchmark CSVs."""
    return correlate_tables(
        load_accuracy_table(bundled_table_path(ACCURACIES_CSV)),
        load_distance_table(bundled_table_path(DISTANCES_CSV)),
    )
