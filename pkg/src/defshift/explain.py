"""Human-readable accounts of what changed for a word.

Because senses are definitions, a change score can be explained in plain
language: show each period's dominant definitions with their usage shares,
and partition the sense union into senses that appeared, disappeared, or
shifted in share between the periods. Shares below one percent render as
"<1%" rather than a misleading "0.0%".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

from .sensebank import SenseDistribution

__all__ = [
    "SenseShare",
    "TopSensesReport",
    "ShiftEntry",
    "ShiftSummary",
    "render_share",
    "top_senses_report",
    "shift_summary",
    "format_report",
    "report_to_json",
]


def render_share(share: float) -> str:
    """Format a share as a percentage with one decimal; below 1% becomes '<1%'."""
    pct = share * 100.0
    if 0.0 < pct < 1.0:
        return "<1%"
    return f"{pct:.1f}%"


@dataclass(frozen=True)
class SenseShare:
    key: str
    display: str
    count: int
    share: float

    @property
    def share_text(self) -> str:
        return render_share(self.share)


@dataclass(frozen=True)
class TopSensesReport:
    word: str
    k: int
    period1: tuple[SenseShare, ...]
    period2: tuple[SenseShare, ...]
    total1: int
    total2: int
    scores: Mapping[str, float] = field(default_factory=dict)
    partial: bool = False


def _top_shares(dist: SenseDistribution | None, k: int) -> tuple[SenseShare, ...]:
    if dist is None or dist.total == 0:
        return ()
    order = sorted(dist.counts, key=lambda key: (-dist.counts[key], key))
    return tuple(
        SenseShare(
            key=key,
            display=dist.display[key],
            count=dist.counts[key],
            share=dist.counts[key] / dist.total,
        )
        for key in order[:k]
    )


def top_senses_report(
    word: str,
    dist1: SenseDistribution | None,
    dist2: SenseDistribution | None,
    k: int = 3,
    scores: Mapping[str, float] | None = None,
) -> TopSensesReport:
    """Top-k senses per period with usage shares and any change scores.

    A missing or empty period yields a partial report (flagged) instead of
    an error, so single-period words still get some explanation.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    for dist in (dist1, dist2):
        if dist is not None and dist.word != word:
            raise ValueError(f"distribution for {dist.word!r} passed to report for {word!r}")
    p1 = _top_shares(dist1, k)
    p2 = _top_shares(dist2, k)
    return TopSensesReport(
        word=word,
        k=k,
        period1=p1,
        period2=p2,
        total1=dist1.total if dist1 is not None else 0,
        total2=dist2.total if dist2 is not None else 0,
        scores=dict(scores or {}),
        partial=not p1 or not p2,
    )


@dataclass(frozen=True)
class ShiftEntry:
    key: str
    display: str
    share1: float
    share2: float

    @property
    def delta(self) -> float:
        return self.share2 - self.share1


@dataclass(frozen=True)
class ShiftSummary:
    word: str
    min_share: float
    appeared: tuple[ShiftEntry, ...]
    disappeared: tuple[ShiftEntry, ...]
    shifted: tuple[ShiftEntry, ...]


def shift_summary(
    word: str,
    dist1: SenseDistribution | None,
    dist2: SenseDistribution | None,
    min_share: float = 0.01,
) -> ShiftSummary:
    """Partition the union of senses into appeared / disappeared / shifted.

    Appeared: present only in period 2 with share >= min_share. Disappeared:
    present only in period 1 with share >= min_share. Shifted: present in
    both with |share delta| >= min_share. Each partition is sorted by the
    magnitude of the change. With min_share 0 every union sense lands in
    exactly one partition.
    """
    if min_share < 0:
        raise ValueError("min_share must be >= 0")
    c1 = dist1.counts if dist1 is not None else {}
    c2 = dist2.counts if dist2 is not None else {}
    t1 = dist1.total if dist1 is not None else 0
    t2 = dist2.total if dist2 is not None else 0
    display: dict[str, str] = {}
    if dist2 is not None:
        display.update(dist2.display)
    if dist1 is not None:
        display.update(dist1.display)

    appeared: list[ShiftEntry] = []
    disappeared: list[ShiftEntry] = []
    shifted: list[ShiftEntry] = []
    for key in set(c1) | set(c2):
        share1 = c1.get(key, 0) / t1 if t1 else 0.0
        share2 = c2.get(key, 0) / t2 if t2 else 0.0
        entry = ShiftEntry(key=key, display=display[key], share1=share1, share2=share2)
        if key not in c1:
            if share2 >= min_share:
                appeared.append(entry)
        elif key not in c2:
            if share1 >= min_share:
                disappeared.append(entry)
        elif abs(entry.delta) >= min_share:
            shifted.append(entry)

    def order(entries: list[ShiftEntry]) -> tuple[ShiftEntry, ...]:
        return tuple(sorted(entries, key=lambda e: (-abs(e.delta), e.key)))

    return ShiftSummary(
        word=word,
        min_share=min_share,
        appeared=order(appeared),
        disappeared=order(disappeared),
        shifted=order(shifted),
    )


def _truncate(text: str, width: int = 60) -> str:
    return text if len(text) <= width else text[: width - 3] + "..."


def format_report(report: TopSensesReport, summary: ShiftSummary | None = None) -> str:
    """Render a plain-text table of the report (and optional shift summary)."""
    lines: list[str] = []
    title = f"== {report.word} =="
    if report.partial:
        title += "  [partial: one period has no senses]"
    lines.append(title)
    if report.scores:
        parts = [f"{metric}={score:.4f}" for metric, score in sorted(report.scores.items())]
        lines.append("scores: " + "  ".join(parts))
    for period, shares, total in (
        (1, report.period1, report.total1),
        (2, report.period2, report.total2),
    ):
        lines.append(f"period {period} ({total} usages), top {report.k} senses:")
        if not shares:
            lines.append("  (none)")
        for s in shares:
            lines.append(f"  {s.share_text:>6}  ({s.count:>4})  {_truncate(s.display)}")
    if summary is not None:
        for label, entries in (
            ("appeared", summary.appeared),
            ("disappeared", summary.disappeared),
            ("shifted", summary.shifted),
        ):
            lines.append(f"{label} (min share {render_share(summary.min_share)}):")
            if not entries:
                lines.append("  (none)")
            for e in entries:
                lines.append(
                    f"  {render_share(e.share1):>6} -> {render_share(e.share2):>6}  {_truncate(e.display)}"
                )
    return "\n".join(lines) + "\n"


def report_to_json(report: TopSensesReport, summary: ShiftSummary | None = None) -> dict:
    """The same content as a JSON-serializable record."""
    def share_dict(s: SenseShare) -> dict:
        return {
            "key": s.key,
            "display": s.display,
            "count": s.count,
            "share": s.share,
            "share_text": s.share_text,
        }

    def entry_dict(e: ShiftEntry) -> dict:
        return {
            "key": e.key,
            "display": e.display,
            "share1": e.share1,
            "share2": e.share2,
            "delta": e.delta,
        }

    record: dict = {
        "word": report.word,
        "k": report.k,
        "partial": report.partial,
        "total1": report.total1,
        "total2": report.total2,
        "scores": dict(report.scores),
        "period1": [share_dict(s) for s in report.period1],
        "period2": [share_dict(s) for s in report.period2],
    }
    if summary is not None:
        record["min_share"] = summary.min_share
        record["appeared"] = [entry_dict(e) for e in summary.appeared]
        record["disappeared"] = [entry_dict(e) for e in summary.disappeared]
        record["shifted"] = [entry_dict(e) for e in summary.shifted]
    json.dumps(record)  # fail fast if anything is not serializable
    return record
