"""Dictionary-sense baseline: assign usages to inventory senses by gloss overlap.

Each usage gets the single sense whose gloss shares the most tokens with the
usage sentence (lower-cased whitespace tokens, target form removed). Ties go
to the lowest sense index, so assignment is deterministic. The resulting
per-period sense distributions plug into the same distribution metrics as the
generated-definition route, giving a like-for-like baseline with a fixed
sense inventory.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import UsageExample, normalize_pos
from .errors import FormatError
from .sensebank import SenseDistribution

__all__ = [
    "Sense",
    "SenseInventory",
    "load_inventory",
    "lesk_disambiguate",
    "lesk_pipeline",
    "LeskResult",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Sense:
    gloss: str
    pos: str | None = None


@dataclass(frozen=True)
class SenseInventory:
    """Ordered sense list per lemma; the order defines the sense indices."""

    entries: Mapping[str, tuple[Sense, ...]]

    def senses(self, lemma: str) -> tuple[Sense, ...]:
        try:
            return self.entries[lemma]
        except KeyError:
            raise KeyError(f"lemma {lemma!r} not in sense inventory") from None

    def __contains__(self, lemma: str) -> bool:
        return lemma in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def load_inventory(path: str | Path) -> SenseInventory:
    """Read a TSV inventory: lemma, part of speech (may be blank), gloss.

    Senses keep file order per lemma; that order is the index space used by
    the disambiguator. Lines starting with '#' are skipped.
    """
    path = Path(path)
    entries: dict[str, list[Sense]] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        for lineno, row in enumerate(reader, start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 3:
                raise FormatError(f"expected 3 columns, got {len(row)}", path=str(path), line=lineno)
            lemma, pos_text, gloss = (cell.strip() for cell in row)
            if not lemma or not gloss:
                raise FormatError("lemma and gloss must be non-empty", path=str(path), line=lineno)
            pos = normalize_pos(pos_text) if pos_text else None
            entries.setdefault(lemma, []).append(Sense(gloss=gloss, pos=pos))
    if not entries:
        raise FormatError("inventory is empty", path=str(path))
    return SenseInventory(entries={k: tuple(v) for k, v in entries.items()})


def _context_tokens(usage: UsageExample) -> set[str]:
    tokens = set(usage.sentence.lower().split())
    tokens.discard(usage.matched_form.lower())
    return tokens


def _candidate_indices(senses: Sequence[Sense], use_pos: bool, pos: str | None) -> list[int]:
    if use_pos and pos is not None:
        filtered = [i for i, s in enumerate(senses) if s.pos == pos]
        if filtered:
            return filtered
    return list(range(len(senses)))


def lesk_disambiguate(
    usage: UsageExample,
    inventory: SenseInventory,
    use_pos: bool = False,
    pos: str | None = None,
) -> int:
    """Pick the sense index with maximal gloss/context token overlap.

    With ``use_pos``, candidates are restricted to senses tagged with the
    usage's part of speech; when no sense matches, all senses become
    candidates again. Ties resolve to the lowest index. Raises ``KeyError``
    when the lemma is missing from the inventory.
    """
    senses = inventory.senses(usage.word)
    context = _context_tokens(usage)
    best_index = -1
    best_score = -1
    for i in _candidate_indices(senses, use_pos, pos):
        score = len(context & set(senses[i].gloss.lower().split()))
        if score > best_score:
            best_score = score
            best_index = i
    return best_index


@dataclass
class LeskResult:
    distributions: list[SenseDistribution]
    unassigned: dict[tuple[str, int], int] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)


def lesk_pipeline(
    usages: Iterable[UsageExample],
    inventory: SenseInventory,
    use_pos: bool = False,
    pos_by_word: Mapping[str, str] | None = None,
) -> LeskResult:
    """Disambiguate every usage and build per-(word, period) sense distributions.

    Distributions are keyed by sense index (as a string) with the gloss as
    display text. Usages of lemmas absent from the inventory are counted as
    unassigned, so assigned counts plus unassigned always equals the input
    size. Words whose part-of-speech filter matches no sense fall back to the
    full sense list, with one diagnostic per word.
    """
    pos_by_word = dict(pos_by_word or {})
    grouped: dict[tuple[str, int], list[UsageExample]] = {}
    for usage in usages:
        grouped.setdefault((usage.word, usage.period), []).append(usage)

    distributions: list[SenseDistribution] = []
    unassigned: dict[tuple[str, int], int] = {}
    diagnostics: list[str] = []
    fallback_flagged: set[str] = set()
    for (word, period) in sorted(grouped):
        group = grouped[(word, period)]
        if word not in inventory:
            unassigned[(word, period)] = len(group)
            diagnostics.append(f"{word}: lemma not in inventory, {len(group)} usages unassigned")
            continue
        senses = inventory.senses(word)
        pos = pos_by_word.get(word)
        if (
            use_pos
            and pos is not None
            and word not in fallback_flagged
            and not any(s.pos == pos for s in senses)
        ):
            diagnostics.append(f"{word}: no sense tagged {pos}, falling back to all senses")
            fallback_flagged.add(word)
        counts: dict[str, int] = {}
        display: dict[str, str] = {}
        for usage in group:
            index = lesk_disambiguate(usage, inventory, use_pos=use_pos, pos=pos)
            key = str(index)
            counts[key] = counts.get(key, 0) + 1
            display.setdefault(key, senses[index].gloss)
        distributions.append(
            SenseDistribution(
                word=word,
                period=period,
                counts=counts,
                display=display,
                total=len(group),
            )
        )
        unassigned[(word, period)] = 0
    if diagnostics:
        log.info("lesk diagnostics: %s", "; ".join(diagnostics))
    return LeskResult(distributions=distributions, unassigned=unassigned, diagnostics=diagnostics)
