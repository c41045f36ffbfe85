"""Evaluation of estimated structures against ground truth.

Arrowhead metrics score directed observed-observed edges against the true
DAG; latent-pair metrics score unordered pairs covered by a latent group or
a bidirected edge against pairs sharing a latent parent in the model.
Undetermined (circle-bearing) edges assert no arrowhead and are excluded
from arrowhead positives; bidirected edges count toward latent pairs only.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from fritl.graph import LatentGroup, MixedGraph
from fritl.synth import LvLingamModel


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class MetricReport:
    precision: float | None
    recall: float | None
    f1: float | None
    true_positive: int
    returned: int
    actual: int

    @classmethod
    def from_counts(cls, tp: int, returned: int, actual: int) -> "MetricReport":
        precision = tp / returned if returned else None
        recall = tp / actual if actual else None
        if precision and recall:
            f1 = 2.0 * precision * recall / (precision + recall)
        elif precision is None and recall is None:
            f1 = None
        else:
            f1 = 0.0
        return cls(precision, recall, f1, tp, returned, actual)


def arrowhead_metrics(est: MixedGraph, truth: MixedGraph) -> MetricReport:
    """Precision/recall/F1 of returned directed edges against the true DAG."""
    if set(est.nodes) != set(truth.nodes):
        raise MetricsError("variable sets differ between estimate and truth")
    true_edges = set(truth.directed_edges())
    returned = set(est.directed_edges())
    tp = len(returned & true_edges)
    return MetricReport.from_counts(tp, len(returned), len(true_edges))


def latent_pair_metrics(
    est_groups: Sequence[LatentGroup],
    truth: LvLingamModel,
    est_graph: MixedGraph | None = None,
) -> MetricReport:
    """Precision/recall/F1 over unordered pairs flagged as latent-confounded.

    Estimated positives are pairs inside any latent group plus bidirected
    edges in the estimated graph; true positives are pairs with a shared
    latent parent in the model.
    """
    true_pairs = truth.shared_latent_pairs()
    est_pairs: set[tuple[str, str]] = set()
    for group in est_groups:
        est_pairs |= group.pairs()
    if est_graph is not None:
        for a, b in est_graph.bidirected_edges():
            est_pairs.add(tuple(sorted((a, b))))
    tp = len(est_pairs & true_pairs)
    return MetricReport.from_counts(tp, len(est_pairs), len(true_pairs))


METRICS_CSV_HEADER = "seed,stage,metric_family,precision,recall,f1,tp,returned,actual"


def _fmt(v: float | None) -> str:
    return "" if v is None else format(v, ".6f")


def metrics_rows(
    seed: int, stage: str, reports: dict[str, MetricReport]
) -> list[str]:
    rows = []
    for family in sorted(reports):
        r = reports[family]
        rows.append(
            f"{seed},{stage},{family},{_fmt(r.precision)},{_fmt(r.recall)},"
            f"{_fmt(r.f1)},{r.true_positive},{r.returned},{r.actual}"
        )
    return rows


def write_metrics_csv(path: str | Path, rows: Iterable[str]) -> None:
    body = "\n".join([METRICS_CSV_HEADER, *rows])
    Path(path).write_text(body + "\n", encoding="utf-8")
