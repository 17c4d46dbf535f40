"""Normalize definition strings and build per-(word, period) sense distributions.

Each distinct normalized definition counts as one discrete word sense. The
comparison key strips all Unicode punctuation (general categories P*),
collapses whitespace and lower-cases; the display form keeps the original
casing of the first definition seen with that key.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

from .errors import FormatError

if TYPE_CHECKING:  # pragma: no cover
    from .defgen import Definition

__all__ = [
    "normalize_definition",
    "SenseDistribution",
    "build_distribution",
    "write_distributions",
    "load_distributions",
]


@lru_cache(maxsize=4096)
def _is_punct(ch: str) -> bool:
    # Unicode general categories Pc, Pd, Pe, Pf, Pi, Po, Ps.
    return unicodedata.category(ch).startswith("P")


def normalize_definition(text: str) -> tuple[str, str] | None:
    """Return ``(key, display)`` for a definition, or None when nothing is left.

    ``display`` is the input with punctuation deleted and whitespace collapsed
    to single spaces; ``key`` is the display lower-cased. Both are stable
    under repeated application. ``None`` signals that the definition consisted
    of punctuation/whitespace only and should be dropped by the caller.
    """
    display = " ".join("".join(ch for ch in text if not _is_punct(ch)).split())
    if not display:
        return None
    return display.lower(), display


@dataclass(frozen=True)
class SenseDistribution:
    """Sense-key -> usage-count map for one word in one period."""

    word: str
    period: int
    counts: dict[str, int]
    display: dict[str, str]
    total: int

    def __post_init__(self):
        if self.total != sum(self.counts.values()):
            raise ValueError("total must equal the sum of counts")
        if any(c < 1 for c in self.counts.values()):
            raise ValueError("every sense count must be >= 1")
        if set(self.display) != set(self.counts):
            raise ValueError("display must have exactly the keys of counts")

    def shares(self) -> dict[str, float]:
        """Relative frequency of each sense (empty dict for an empty side)."""
        if self.total == 0:
            return {}
        return {k: c / self.total for k, c in self.counts.items()}

    def sense_count(self) -> int:
        return len(self.counts)


def build_distribution(defs: Iterable["Definition"], word: str, period: int) -> SenseDistribution:
    """Count definitions by normalized key; first-seen display wins ties."""
    counts: dict[str, int] = {}
    display: dict[str, str] = {}
    total = 0
    for d in defs:
        if d.word != word or d.period != period:
            raise ValueError(
                f"definition {d.usage_id} belongs to {(d.word, d.period)}, not {(word, period)}"
            )
        counts[d.key] = counts.get(d.key, 0) + 1
        display.setdefault(d.key, d.display_text)
        total += 1
    return SenseDistribution(word=word, period=period, counts=counts, display=display, total=total)


def write_distributions(dists: Iterable[SenseDistribution], path: str | Path) -> None:
    """Dump distributions as JSON-lines, one record per (word, period)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in sorted(dists, key=lambda d: (d.word, d.period)):
            record = {
                "word": d.word,
                "period": d.period,
                "counts": d.counts,
                "display": d.display,
                "total": d.total,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_distributions(path: str | Path) -> list[SenseDistribution]:
    dists: list[SenseDistribution] = []
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                dists.append(
                    SenseDistribution(
                        word=rec["word"],
                        period=int(rec["period"]),
                        counts={k: int(v) for k, v in rec["counts"].items()},
                        display=dict(rec["display"]),
                        total=int(rec["total"]),
                    )
                )
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise FormatError(f"bad distribution record: {exc}", path=str(path), line=lineno) from exc
    return dists
