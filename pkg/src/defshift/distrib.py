"""Change scores between two sense distributions of the same word.

Treats each period's definition counts as a categorical distribution over
senses and scores the divergence between periods:

* ``jsd`` - Jensen-Shannon divergence with base-2 logarithms, bounded [0, 1];
* ``cosine`` - cosine distance between the raw count vectors, bounded [0, 1]
  for non-negative counts.

Both operate on the union of the two key sets with missing keys counted as
zero. The plain divergence is used, not its square root.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import FormatError, UndefinedScoreError
from .sensebank import SenseDistribution

__all__ = [
    "CHANGE_METRICS",
    "DISTRIBUTION_METRICS",
    "Provenance",
    "ChangeScoreRecord",
    "jsd",
    "cosine_distribution_distance",
    "score_distribution_pairs",
    "write_scores",
    "load_scores",
]

DISTRIBUTION_METRICS = ("jsd", "cosine")
EMBEDDING_METRICS = ("apd", "prt", "am")
CHANGE_METRICS = DISTRIBUTION_METRICS + EMBEDDING_METRICS

_METRIC_RANGE = {
    "jsd": (0.0, 1.0),
    "cosine": (0.0, 1.0),
    "apd": (0.0, 2.0),
    "prt": (0.0, 2.0),
    "am": (0.0, 2.0),
}


@dataclass(frozen=True)
class Provenance:
    """How a score was produced: generation strategy, merge strategy, threshold."""

    generation: str
    merge: str = "none"
    threshold: int = 0

    def to_string(self) -> str:
        return f"generation={self.generation};merge={self.merge};threshold={self.threshold}"

    @classmethod
    def from_string(cls, text: str) -> "Provenance":
        fields: dict[str, str] = {}
        for part in text.split(";"):
            if not part:
                continue
            key, sep, value = part.partition("=")
            if not sep:
                raise ValueError(f"bad provenance field {part!r}")
            fields[key.strip()] = value.strip()
        try:
            return cls(
                generation=fields["generation"],
                merge=fields.get("merge", "none"),
                threshold=int(fields.get("threshold", "0")),
            )
        except KeyError as exc:
            raise ValueError(f"provenance missing field {exc}") from exc


@dataclass(frozen=True)
class ChangeScoreRecord:
    word: str
    metric: str
    score: float
    provenance: Provenance

    def __post_init__(self):
        if self.metric not in CHANGE_METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        lo, hi = _METRIC_RANGE[self.metric]
        if not (lo <= self.score <= hi) or math.isnan(self.score):
            raise ValueError(f"{self.metric} score {self.score} outside [{lo}, {hi}]")


def _union_probs(p: SenseDistribution, q: SenseDistribution) -> tuple[list[float], list[float]]:
    keys = sorted(set(p.counts) | set(q.counts))
    pv = [p.counts.get(k, 0) / p.total for k in keys]
    qv = [q.counts.get(k, 0) / q.total for k in keys]
    return pv, qv


def _check_pair(p: SenseDistribution, q: SenseDistribution) -> None:
    if p.word != q.word:
        raise ValueError(f"cannot compare distributions for {p.word!r} and {q.word!r}")
    if p.total == 0 or q.total == 0 or not p.counts or not q.counts:
        side = p.period if (p.total == 0 or not p.counts) else q.period
        raise UndefinedScoreError(f"{p.word}: no senses in period {side}")


def jsd(p: SenseDistribution, q: SenseDistribution) -> float:
    """Jensen-Shannon divergence, base 2: 0 for identical, 1 for disjoint."""
    _check_pair(p, q)
    pv, qv = _union_probs(p, q)
    total = 0.0
    for pi, qi in zip(pv, qv):
        mi = 0.5 * (pi + qi)
        if pi > 0.0:
            total += 0.5 * pi * math.log2(pi / mi)
        if qi > 0.0:
            total += 0.5 * qi * math.log2(qi / mi)
    return min(max(total, 0.0), 1.0)


def cosine_distribution_distance(p: SenseDistribution, q: SenseDistribution) -> float:
    """One minus the cosine of the raw count vectors on the union support."""
    _check_pair(p, q)
    pv, qv = _union_probs(p, q)
    dot = sum(a * b for a, b in zip(pv, qv))
    norm_p = math.sqrt(sum(a * a for a in pv))
    norm_q = math.sqrt(sum(b * b for b in qv))
    cos = dot / (norm_p * norm_q)
    return min(max(1.0 - cos, 0.0), 1.0)


_DISTRIBUTION_FUNCS = {"jsd": jsd, "cosine": cosine_distribution_distance}


def score_distribution_pairs(
    distributions: Iterable[SenseDistribution],
    metrics: Sequence[str],
    provenance: Provenance,
) -> tuple[list[ChangeScoreRecord], list[str]]:
    """Score every word that has a distribution for both periods.

    Returns the score records plus diagnostics for words that could not be
    scored (missing or empty period); those words are excluded, never given
    a placeholder score.
    """
    for metric in metrics:
        if metric not in _DISTRIBUTION_FUNCS:
            raise ValueError(f"not a distribution metric: {metric!r}")
    by_word: dict[str, dict[int, SenseDistribution]] = {}
    for dist in distributions:
        periods = by_word.setdefault(dist.word, {})
        if dist.period in periods:
            raise ValueError(f"duplicate distribution for {dist.word!r} period {dist.period}")
        periods[dist.period] = dist

    records: list[ChangeScoreRecord] = []
    skipped: list[str] = []
    for word in sorted(by_word):
        periods = by_word[word]
        if 1 not in periods or 2 not in periods:
            missing = 1 if 1 not in periods else 2
            skipped.append(f"{word}: no distribution for period {missing}")
            continue
        try:
            for metric in metrics:
                score = _DISTRIBUTION_FUNCS[metric](periods[1], periods[2])
                records.append(ChangeScoreRecord(word, metric, score, provenance))
        except UndefinedScoreError as exc:
            records = [r for r in records if r.word != word]
            skipped.append(str(exc))
    return records, skipped


def write_scores(records: Iterable[ChangeScoreRecord], path: str | Path) -> None:
    """Write scores as TSV: word, metric, score, provenance."""
    rows = sorted(records, key=lambda r: (r.word, r.metric, r.provenance.to_string()))
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["word", "metric", "score", "provenance"])
        for rec in rows:
            writer.writerow([rec.word, rec.metric, f"{rec.score:.10f}", rec.provenance.to_string()])


def load_scores(path: str | Path) -> list[ChangeScoreRecord]:
    path = Path(path)
    records: list[ChangeScoreRecord] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        for lineno, row in enumerate(reader, start=1):
            if not row or (lineno == 1 and row[0] == "word"):
                continue
            if len(row) != 4:
                raise FormatError(f"expected 4 columns, got {len(row)}", path=str(path), line=lineno)
            word, metric, score_text, prov_text = row
            try:
                records.append(
                    ChangeScoreRecord(word, metric, float(score_text), Provenance.from_string(prov_text))
                )
            except ValueError as exc:
                raise FormatError(str(exc), path=str(path), line=lineno) from exc
    return records
