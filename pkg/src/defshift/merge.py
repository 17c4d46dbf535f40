"""Reduce sense granularity by merging near-duplicate definitions.

Generated definitions that belong to one sense are often near-identical
strings. Merging replaces each such variant with a frequent "hub" definition
whose edit distance to the variant is below a threshold:

* ``minimalist`` - only the first (most frequent) eligible definition acts as
  a hub; one absorption pass over the remaining definitions.
* ``full_fledged`` - after the first pass, every later definition that was not
  itself absorbed also gets a turn as hub, further reducing the sense count.

Hubs must have at least ``min_hub_words`` words, which stops very short
definitions from soaking up unrelated ones at low edit distances. Distances
are computed on normalized keys (punctuation-stripped, lower-cased); the word
count is taken on the cleaned display form. Each period is merged on its own;
:func:`merge_joint` (experimental, off by default) merges both periods over a
shared hub set, which in practice tends to flatten real differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import FormatError
from .sensebank import SenseDistribution

__all__ = [
    "MergeConfig",
    "MergeResult",
    "levenshtein",
    "merge_distribution",
    "merge_joint",
    "write_merge_report",
    "load_merge_report",
]

MERGE_STRATEGIES = ("none", "minimalist", "full_fledged")


def levenshtein(a: str, b: str, upper_bound: int | None = None) -> int:
    """Unit-cost edit distance (insert/delete/substitute) over code points.

    With ``upper_bound`` set, returns the exact distance when it is strictly
    below the bound and ``upper_bound`` otherwise, allowing early exit; the
    merge loop only needs the ``distance < threshold`` predicate.
    """
    if a == b:
        return 0
    if len(a) > len(b):
        a, b = b, a
    if upper_bound is not None and len(b) - len(a) >= upper_bound:
        return upper_bound

    # Common affixes never change the distance.
    pre = 0
    while pre < len(a) and a[pre] == b[pre]:
        pre += 1
    suf = 0
    while suf < len(a) - pre and a[len(a) - 1 - suf] == b[len(b) - 1 - suf]:
        suf += 1
    a2 = a[pre:len(a) - suf]
    b2 = b[pre:len(b) - suf]
    if not a2:
        d = len(b2)
        return d if upper_bound is None else min(d, upper_bound)

    prev = list(range(len(b2) + 1))
    for i, ca in enumerate(a2, start=1):
        curr = [i] + [0] * len(b2)
        row_min = i
        for j, cb in enumerate(b2, start=1):
            val = min(
                prev[j] + 1,
                curr[j - 1] + 1,
                prev[j - 1] + (ca != cb),
            )
            curr[j] = val
            if val < row_min:
                row_min = val
        # Every path to the final cell passes through this row, and DP cell
        # values only grow along a path, so the row minimum is a lower bound.
        if upper_bound is not None and row_min >= upper_bound:
            return upper_bound
        prev = curr
    d = prev[-1]
    return d if upper_bound is None else min(d, upper_bound)


@dataclass(frozen=True)
class MergeConfig:
    strategy: str = "minimalist"
    threshold: int = 10
    min_hub_words: int = 4

    def __post_init__(self):
        if self.strategy not in MERGE_STRATEGIES:
            raise ValueError(f"strategy must be one of {MERGE_STRATEGIES}, got {self.strategy!r}")
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")
        if self.min_hub_words < 1:
            raise ValueError("min_hub_words must be >= 1")


@dataclass(frozen=True)
class MergeResult:
    """Merged distribution plus the key -> hub mapping that produced it."""

    merged: SenseDistribution
    mapping: dict[str, str]
    distances: dict[str, int]  # edit distance to the hub, 0 for surviving keys

    def __post_init__(self):
        if set(self.mapping) != set(self.distances):
            raise ValueError("mapping and distances must cover the same keys")


def _frequency_order(dist: SenseDistribution) -> list[str]:
    # Descending count; lexicographic ascending breaks ties deterministically.
    return sorted(dist.counts, key=lambda k: (-dist.counts[k], k))


def _hub_assignment(
    order: list[str],
    display: Mapping[str, str],
    config: MergeConfig,
) -> tuple[dict[str, str], dict[str, int]]:
    """Run the hub loop over keys in frequency order; returns mapping and distances."""
    mapping = {k: k for k in order}
    distances = {k: 0 for k in order}
    if config.strategy == "none":
        return mapping, distances
    absorbed: set[str] = set()
    for i, hub in enumerate(order):
        if hub in absorbed:
            continue  # an absorbed definition never becomes a hub
        if len(display[hub].split()) < config.min_hub_words:
            continue  # too short to serve as a hub
        for cand in order[i + 1:]:
            if cand in absorbed:
                continue
            d = levenshtein(cand, hub, upper_bound=config.threshold)
            if d < config.threshold:
                absorbed.add(cand)
                mapping[cand] = hub
                distances[cand] = d
        if config.strategy == "minimalist":
            break
    return mapping, distances


def _apply_mapping(
    dist: SenseDistribution,
    mapping: Mapping[str, str],
    display: Mapping[str, str],
) -> SenseDistribution:
    counts: dict[str, int] = {}
    for key, count in dist.counts.items():
        hub = mapping.get(key, key)
        counts[hub] = counts.get(hub, 0) + count
    ordered = sorted(counts)
    return SenseDistribution(
        word=dist.word,
        period=dist.period,
        counts={k: counts[k] for k in ordered},
        display={k: display[k] for k in ordered},
        total=dist.total,
    )


def merge_distribution(dist: SenseDistribution, config: MergeConfig) -> MergeResult:
    """Merge one period's senses onto hub definitions.

    Keys are visited in descending count order (lexicographic tie-break); a
    key qualifies as hub only when its display form has at least
    ``min_hub_words`` words. The current hub absorbs every later key that has
    not been absorbed yet and lies strictly within the edit-distance
    threshold. Usage counts are conserved exactly.
    """
    order = _frequency_order(dist)
    mapping, distances = _hub_assignment(order, dist.display, config)
    merged = _apply_mapping(dist, mapping, dist.display)
    return MergeResult(merged=merged, mapping=mapping, distances=distances)


def merge_joint(
    dist1: SenseDistribution,
    dist2: SenseDistribution,
    config: MergeConfig,
) -> tuple[MergeResult, MergeResult]:
    """Merge both periods over one hub set ranked by combined frequency.

    Experimental: joint processing makes the two distributions artificially
    similar and is biased when the corpora differ in size, so per-period
    :func:`merge_distribution` is the default everywhere.
    """
    if dist1.word != dist2.word:
        raise ValueError(f"cannot jointly merge {dist1.word!r} and {dist2.word!r}")
    combined: dict[str, int] = dict(dist1.counts)
    for k, c in dist2.counts.items():
        combined[k] = combined.get(k, 0) + c
    display = dict(dist2.display)
    display.update(dist1.display)  # period-1 display wins for shared keys
    order = sorted(combined, key=lambda k: (-combined[k], k))
    mapping, distances = _hub_assignment(order, display, config)

    results = []
    for dist in (dist1, dist2):
        merged = _apply_mapping(dist, mapping, display)
        keys = set(dist.counts)
        results.append(
            MergeResult(
                merged=merged,
                mapping={k: mapping[k] for k in keys},
                distances={k: distances[k] for k in keys},
            )
        )
    return results[0], results[1]


def write_merge_report(
    results: Mapping[tuple[str, int], MergeResult],
    path: str | Path,
) -> None:
    """Dump the full key -> hub mapping as JSON-lines, one record per key."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for (word, period) in sorted(results):
            res = results[(word, period)]
            for original in sorted(res.mapping):
                record = {
                    "word": word,
                    "period": period,
                    "original": original,
                    "hub": res.mapping[original],
                    "distance": res.distances[original],
                }
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_merge_report(path: str | Path) -> list[dict]:
    records: list[dict] = []
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                records.append(
                    {
                        "word": rec["word"],
                        "period": int(rec["period"]),
                        "original": rec["original"],
                        "hub": rec["hub"],
                        "distance": int(rec["distance"]),
                    }
                )
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise FormatError(f"bad merge record: {exc}", path=str(path), line=lineno) from exc
    return records
