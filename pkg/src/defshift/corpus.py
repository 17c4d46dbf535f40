"""Diachronic corpus loading, target-word lookup and capped usage sampling.

A corpus is a UTF-8 plain-text file with one sentence per line, or a
two-column TSV (sentence TAB metadata) when the path ends in ``.tsv``.
Matching is whole-token and case-insensitive over the caller-supplied
surface forms; no lemmatization is performed here.

Sampling uses the Mersenne Twister PRNG (``random.Random``), seeded with the
string ``"{seed}:{word}:{period}"`` per (word, period) group, so runs are
bit-reproducible and independent of how groups are scheduled.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError

__all__ = [
    "TargetWord",
    "UsageExample",
    "SamplingConfig",
    "VALID_POS",
    "load_targets",
    "find_usages",
    "sample_usages",
    "coverage_report",
    "write_usages",
    "load_usages",
]

# Closed part-of-speech tag set (universal POS subset); loaders normalize
# common aliases onto it.
VALID_POS = frozenset({"NOUN", "VERB", "ADJ", "ADV"})

_POS_ALIASES = {
    "n": "NOUN", "nn": "NOUN", "noun": "NOUN",
    "v": "VERB", "vb": "VERB", "verb": "VERB",
    "a": "ADJ", "adj": "ADJ", "j": "ADJ",
    "r": "ADV", "adv": "ADV",
}


def normalize_pos(tag: str) -> str:
    """Map a raw PoS tag onto the closed tag set; raises on unknown tags."""
    norm = _POS_ALIASES.get(tag.strip().lower(), tag.strip().upper())
    if norm not in VALID_POS:
        raise ValueError(f"unknown part-of-speech tag {tag!r} (expected one of {sorted(VALID_POS)})")
    return norm


@dataclass(frozen=True)
class TargetWord:
    """A word whose change is being measured, with its accepted surface forms."""

    lemma: str
    forms: tuple[str, ...] = ()
    pos: str | None = None
    language: str = "en"

    def __post_init__(self):
        if not self.lemma:
            raise ValueError("lemma must be non-empty")
        if self.lemma not in self.forms:
            object.__setattr__(self, "forms", (self.lemma,) + tuple(self.forms))
        if self.pos is not None:
            object.__setattr__(self, "pos", normalize_pos(self.pos))


@dataclass(frozen=True)
class UsageExample:
    """One occurrence of a target word in a period-tagged sentence."""

    usage_id: str
    word: str
    period: int
    sentence: str
    match_span: tuple[int, int] | None = None

    def __post_init__(self):
        if self.period not in (1, 2):
            raise ValueError(f"period must be 1 or 2, got {self.period}")
        if not self.sentence:
            raise ValueError("sentence must be non-empty")
        if self.match_span is not None:
            lo, hi = self.match_span
            if not (0 <= lo < hi <= len(self.sentence)):
                raise ValueError(f"match_span {self.match_span} outside sentence bounds")

    @property
    def matched_form(self) -> str:
        """The surface form that matched, or the lemma when the span is unknown."""
        if self.match_span is None:
            return self.word
        lo, hi = self.match_span
        return self.sentence[lo:hi]


@dataclass(frozen=True)
class SamplingConfig:
    max_per_word_per_period: int = 1000
    max_tokens: int = 350
    seed: int = 0

    def __post_init__(self):
        if self.max_per_word_per_period < 1:
            raise ValueError("max_per_word_per_period must be >= 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


def load_targets(path: str | Path, language: str = "en") -> list[TargetWord]:
    """Read a targets file: TSV with columns lemma, comma-separated forms, optional PoS.

    Lines starting with ``#`` and blank lines are ignored. The forms column may
    be empty, in which case the lemma itself is the only accepted form.
    """
    targets: list[TargetWord] = []
    seen: set[str] = set()
    path = Path(path)
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cols = line.split("\t")
        lemma = cols[0].strip()
        if not lemma:
            raise FormatError("empty lemma", path=str(path), line=lineno)
        if lemma in seen:
            raise FormatError(f"duplicate lemma {lemma!r}", path=str(path), line=lineno)
        seen.add(lemma)
        forms = tuple(f.strip() for f in cols[1].split(",") if f.strip()) if len(cols) > 1 else ()
        pos = cols[2].strip() if len(cols) > 2 and cols[2].strip() else None
        try:
            targets.append(TargetWord(lemma=lemma, forms=forms, pos=pos, language=language))
        except ValueError as exc:
            raise FormatError(str(exc), path=str(path), line=lineno) from exc
    return targets


def _form_pattern(target: TargetWord) -> re.Pattern[str]:
    # Longest-first alternation; the word-boundary lookarounds make sure a
    # form only matches as a whole token ("ball" must not hit "ballroom").
    alts = sorted(set(target.forms), key=len, reverse=True)
    body = "|".join(re.escape(f) for f in alts)
    return re.compile(rf"(?<!\w)(?:{body})(?!\w)", re.IGNORECASE)


def _iter_sentences(corpus_path: Path, corpus_format: str | None):
    fmt = corpus_format or ("tsv" if corpus_path.suffix.lower() == ".tsv" else "txt")
    if fmt not in ("txt", "tsv"):
        raise ValueError(f"unknown corpus format {fmt!r}")
    with corpus_path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if fmt == "tsv":
                line = line.split("\t", 1)[0]
            if line.strip():
                yield lineno, line


def find_usages(
    corpus_path: str | Path,
    targets: list[TargetWord],
    period: int,
    corpus_format: str | None = None,
) -> list[UsageExample]:
    """Scan a corpus for whole-token occurrences of the targets' forms.

    Returns one usage per (sentence, target) pair that matched, in corpus
    order, with the span of the first match recorded. The scan is pure: two
    runs over identical bytes yield identical results.
    """
    corpus_path = Path(corpus_path)
    if not targets:
        return []
    patterns = [(t, _form_pattern(t)) for t in targets]
    usages: list[UsageExample] = []
    for lineno, sentence in _iter_sentences(corpus_path, corpus_format):
        for target, pattern in patterns:
            m = pattern.search(sentence)
            if m is None:
                continue
            usages.append(
                UsageExample(
                    usage_id=f"{target.lemma}:{period}:{lineno:08d}",
                    word=target.lemma,
                    period=period,
                    sentence=sentence,
                    match_span=(m.start(), m.end()),
                )
            )
    return usages


def sample_usages(usages: list[UsageExample], config: SamplingConfig) -> list[UsageExample]:
    """Filter over-long usages, then cap the remainder by uniform sampling.

    Usages whose whitespace token count exceeds ``config.max_tokens`` are
    removed first. If at most ``max_per_word_per_period`` remain they are
    returned unchanged (input order); otherwise a uniform random subset of
    exactly the cap is drawn without replacement, keeping input order.
    Deterministic for a fixed seed.
    """
    if not usages:
        return []
    keys = {(u.word, u.period) for u in usages}
    if len(keys) > 1:
        raise ValueError(f"usages span multiple (word, period) groups: {sorted(keys)}")
    short = [u for u in usages if len(u.sentence.split()) <= config.max_tokens]
    cap = config.max_per_word_per_period
    if len(short) <= cap:
        return short
    (word, period), = keys
    rng = random.Random(f"{config.seed}:{word}:{period}")
    picked = sorted(rng.sample(range(len(short)), cap))
    return [short[i] for i in picked]


def coverage_report(targets: list[TargetWord], usages: list[UsageExample]) -> dict[str, dict[str, int]]:
    """Per-lemma usage counts per period, including zero-usage targets."""
    report = {t.lemma: {"period1": 0, "period2": 0} for t in targets}
    for u in usages:
        if u.word in report:
            report[u.word][f"period{u.period}"] += 1
    return report


def write_usages(usages: list[UsageExample], path: str | Path) -> None:
    """Dump usages as JSON-lines (usage_id, word, period, sentence, match_span)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for u in usages:
            record = {
                "usage_id": u.usage_id,
                "word": u.word,
                "period": u.period,
                "sentence": u.sentence,
                "match_span": list(u.match_span) if u.match_span else None,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_usages(path: str | Path) -> list[UsageExample]:
    """Read a usages JSON-lines file produced by :func:`write_usages`."""
    usages: list[UsageExample] = []
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                span = rec.get("match_span")
                usages.append(
                    UsageExample(
                        usage_id=rec["usage_id"],
                        word=rec["word"],
                        period=int(rec["period"]),
                        sentence=rec["sentence"],
                        match_span=tuple(span) if span else None,
                    )
                )
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise FormatError(f"bad usage record: {exc}", path=str(path), line=lineno) from exc
    return usages
