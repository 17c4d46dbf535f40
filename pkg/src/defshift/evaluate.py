"""Rank-correlation evaluation of change scores against graded gold data.

Gold files are TSV word/score pairs; datasets annotated with *similarity*
between periods are sign-flipped at load time so that a higher value always
means more change. Predictions and gold are aligned on case- and
whitespace-insensitive words; anything unmatched on either side is reported,
never silently dropped. Spearman's rho is Pearson's correlation on
fractional (average) ranks, with a two-sided p-value from the t
approximation on n-2 degrees of freedom.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .distrib import ChangeScoreRecord
from .errors import FormatError, InsufficientDataError

__all__ = [
    "GoldScores",
    "SpearmanResult",
    "EvaluationRow",
    "load_gold",
    "spearman",
    "evaluate_records",
    "write_evaluation",
    "load_evaluation",
]


def _norm_word(word: str) -> str:
    return word.strip().lower()


@dataclass(frozen=True)
class GoldScores:
    """Gold change scores, already oriented so higher means more change."""

    scores: Mapping[str, float]
    is_similarity: bool = False

    def __len__(self) -> int:
        return len(self.scores)


def load_gold(path: str | Path, is_similarity: bool = False) -> GoldScores:
    """Read a two-column TSV of word and score; '#' lines are comments.

    With ``is_similarity`` the scores are negated, turning a similarity
    scale into a change scale.
    """
    path = Path(path)
    scores: dict[str, float] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        for lineno, row in enumerate(reader, start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 2:
                raise FormatError(f"expected 2 columns, got {len(row)}", path=str(path), line=lineno)
            word = row[0].strip()
            if not word:
                raise FormatError("empty word", path=str(path), line=lineno)
            try:
                value = float(row[1])
            except ValueError:
                raise FormatError(f"non-numeric score {row[1]!r}", path=str(path), line=lineno) from None
            if math.isnan(value):
                raise FormatError("score is NaN", path=str(path), line=lineno)
            if word in scores:
                raise FormatError(f"duplicate word {word!r}", path=str(path), line=lineno)
            scores[word] = -value if is_similarity else value
    if not scores:
        raise FormatError("gold file has no scores", path=str(path))
    return GoldScores(scores=scores, is_similarity=is_similarity)


@dataclass(frozen=True)
class SpearmanResult:
    rho: float
    p_value: float
    n: int
    missing_pred: tuple[str, ...] = ()
    missing_gold: tuple[str, ...] = ()


def spearman(predicted: Mapping[str, float], gold: GoldScores) -> SpearmanResult:
    """Spearman's rho between predictions and gold over their shared words.

    Both sides are keyed case- and whitespace-insensitively. Fewer than 3
    shared words raises; ties get fractional ranks.
    """
    pred_norm: dict[str, float] = {}
    for word, value in predicted.items():
        key = _norm_word(word)
        if key in pred_norm:
            raise ValueError(f"duplicate predicted word after normalization: {word!r}")
        pred_norm[key] = value
    gold_norm: dict[str, float] = {}
    for word, value in gold.scores.items():
        key = _norm_word(word)
        if key in gold_norm:
            raise ValueError(f"duplicate gold word after normalization: {word!r}")
        gold_norm[key] = value

    shared = sorted(set(pred_norm) & set(gold_norm))
    missing_pred = tuple(sorted(set(gold_norm) - set(pred_norm)))
    missing_gold = tuple(sorted(set(pred_norm) - set(gold_norm)))
    n = len(shared)
    if n < 3:
        raise InsufficientDataError(f"need at least 3 shared words, got {n}")

    x = stats.rankdata([pred_norm[w] for w in shared], method="average")
    y = stats.rankdata([gold_norm[w] for w in shared], method="average")
    if np.all(x == x[0]) or np.all(y == y[0]):
        rho = math.nan
        p = math.nan
    else:
        rho = float(np.corrcoef(x, y)[0, 1])
        rho = min(max(rho, -1.0), 1.0)
        if abs(rho) == 1.0:
            p = 0.0
        else:
            t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
            p = float(2.0 * stats.t.sf(abs(t), n - 2))
    return SpearmanResult(rho=rho, p_value=p, n=n,
                          missing_pred=missing_pred, missing_gold=missing_gold)


@dataclass(frozen=True)
class EvaluationRow:
    metric: str
    strategy: str
    rho: float
    p_value: float
    n: int
    missing_pred: tuple[str, ...] = ()
    missing_gold: tuple[str, ...] = ()


def evaluate_records(
    records: Iterable[ChangeScoreRecord],
    gold: GoldScores,
) -> list[EvaluationRow]:
    """One evaluation row per (metric, provenance) group found in the records."""
    grouped: dict[tuple[str, str], dict[str, float]] = {}
    for rec in records:
        key = (rec.metric, rec.provenance.to_string())
        grouped.setdefault(key, {})
        if rec.word in grouped[key]:
            raise ValueError(f"duplicate score for {rec.word!r} under {key}")
        grouped[key][rec.word] = rec.score

    rows: list[EvaluationRow] = []
    for (metric, strategy) in sorted(grouped):
        res = spearman(grouped[(metric, strategy)], gold)
        rows.append(
            EvaluationRow(
                metric=metric,
                strategy=strategy,
                rho=res.rho,
                p_value=res.p_value,
                n=res.n,
                missing_pred=res.missing_pred,
                missing_gold=res.missing_gold,
            )
        )
    return rows


def write_evaluation(rows: Sequence[EvaluationRow], path: str | Path) -> None:
    """Write the evaluation report as TSV: metric, strategy, rho, p_value, n."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["metric", "strategy", "rho", "p_value", "n"])
        for row in rows:
            writer.writerow([row.metric, row.strategy, f"{row.rho:.6f}", f"{row.p_value:.6g}", row.n])


def load_evaluation(path: str | Path) -> list[EvaluationRow]:
    path = Path(path)
    rows: list[EvaluationRow] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        for lineno, row in enumerate(reader, start=1):
            if not row or (lineno == 1 and row[0] == "metric"):
                continue
            if len(row) != 5:
                raise FormatError(f"expected 5 columns, got {len(row)}", path=str(path), line=lineno)
            try:
                rows.append(
                    EvaluationRow(
                        metric=row[0],
                        strategy=row[1],
                        rho=float(row[2]),
                        p_value=float(row[3]),
                        n=int(row[4]),
                    )
                )
            except ValueError as exc:
                raise FormatError(str(exc), path=str(path), line=lineno) from exc
    return rows
