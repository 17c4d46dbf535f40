"""Tests for edit distance and hub-based sense merging."""

from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from defshift.errors import FormatError
from defshift.merge import (
    MergeConfig,
    levenshtein,
    load_merge_report,
    merge_distribution,
    merge_joint,
    write_merge_report,
)
from defshift.sensebank import SenseDistribution


def _dist(counts: dict[str, int], word="w", period=1) -> SenseDistribution:
    return SenseDistribution(
        word=word,
        period=period,
        counts=dict(counts),
        display={k: k for k in counts},
        total=sum(counts.values()),
    )


class TestLevenshtein:
    @pytest.mark.parametrize(
        "a,b,d",
        [
            ("kitten", "sitting", 3),
            ("", "abc", 3),
            ("abc", "", 3),
            ("", "", 0),
            ("same", "same", 0),
            ("flaw", "lawn", 2),
            ("ёжик", "ежик", 1),
            ("definition", "definitions", 1),
        ],
    )
    def test_examples(self, a, b, d):
        assert levenshtein(a, b) == d
        assert levenshtein(b, a) == d

    def test_counts_code_points_not_bytes(self):
        # multibyte characters are single edits
        assert levenshtein("é", "e") == 1
        assert levenshtein("日本", "本日") == 2

    def test_upper_bound_exact_below(self):
        assert levenshtein("kitten", "sitting", upper_bound=10) == 3

    def test_upper_bound_clamps_at_or_above(self):
        assert levenshtein("kitten", "sitting", upper_bound=3) == 3
        assert levenshtein("kitten", "sitting", upper_bound=2) == 2
        assert levenshtein("aaaa", "bbbb", upper_bound=1) == 1

    def test_upper_bound_zero(self):
        assert levenshtein("x", "y", upper_bound=0) == 0
        assert levenshtein("x", "x", upper_bound=0) == 0

    @settings(max_examples=100, deadline=None)
    @given(st.text(max_size=20), st.text(max_size=20))
    def test_metric_properties(self, a, b):
        d = levenshtein(a, b)
        assert d == levenshtein(b, a)
        assert (d == 0) == (a == b)
        assert d <= max(len(a), len(b))
        assert d >= abs(len(a) - len(b))


AIRCRAFT = {
    "an aircraft designed for military use": 5,
    "an aircraft designed for military usage": 2,
    "a flat surface": 2,
}


@pytest.mark.parametrize("strategy", ["minimalist", "full_fledged"])
def test_merge_aircraft_example(strategy):
    res = merge_distribution(_dist(AIRCRAFT), MergeConfig(strategy=strategy, threshold=10))
    assert res.merged.counts == {
        "an aircraft designed for military use": 7,
        "a flat surface": 2,
    }
    assert res.merged.total == 9
    assert res.mapping["an aircraft designed for military usage"] == "an aircraft designed for military use"
    assert res.distances["an aircraft designed for military usage"] == 2


def test_merge_none_is_identity():
    res = merge_distribution(_dist(AIRCRAFT), MergeConfig(strategy="none", threshold=10))
    assert res.merged.counts == AIRCRAFT
    assert all(res.mapping[k] == k for k in AIRCRAFT)


def test_merge_threshold_zero_is_identity():
    res = merge_distribution(_dist(AIRCRAFT), MergeConfig(strategy="minimalist", threshold=0))
    assert res.merged.counts == AIRCRAFT


def test_merge_strict_threshold():
    # distance is exactly 2; threshold 2 must NOT merge, threshold 3 must
    counts = {"an aircraft designed for military use": 5,
              "an aircraft designed for military usage": 2}
    res2 = merge_distribution(_dist(counts), MergeConfig(strategy="minimalist", threshold=2))
    assert res2.merged.sense_count() == 2
    res3 = merge_distribution(_dist(counts), MergeConfig(strategy="minimalist", threshold=3))
    assert res3.merged.sense_count() == 1


def test_short_hubs_are_skipped():
    # top key has three words, so it cannot absorb anything; the four-word
    # runner-up becomes the single minimalist hub instead
    counts = {
        "a flat surface": 10,
        "a very flat surface": 1,
        "one two three four": 4,
        "one two three fours": 2,
    }
    res = merge_distribution(_dist(counts), MergeConfig(strategy="minimalist", threshold=5))
    assert res.mapping["one two three fours"] == "one two three four"
    assert res.mapping["a very flat surface"] == "a very flat surface"
    assert res.merged.counts["a flat surface"] == 10


def test_minimalist_stops_after_first_hub():
    counts = {
        "cluster one base definition": 5,
        "cluster one base definitions": 2,
        "cluster two other meaning": 4,
        "cluster two other meanings": 2,
    }
    config = MergeConfig(strategy="minimalist", threshold=3)
    res = merge_distribution(_dist(counts), config)
    assert res.merged.sense_count() == 3
    full = merge_distribution(_dist(counts), MergeConfig(strategy="full_fledged", threshold=3))
    assert full.merged.sense_count() == 2


def test_absorbed_keys_never_become_hubs():
    # b is absorbed by a; c is within threshold of b but not of a, so with b
    # retired c must survive as its own sense
    a = "aaaa bbbb cccc dddd"
    b = "aaaa bbbb cccc ddxx"   # distance 2 from a
    c = "aaaa bbbb ccxx ddxx"   # distance 2 from b, 4 from a
    counts = {a: 5, b: 3, c: 2}
    res = merge_distribution(_dist(counts), MergeConfig(strategy="full_fledged", threshold=3))
    assert res.mapping[b] == a
    assert res.mapping[c] == c
    assert res.merged.counts == {a: 8, c: 2}


def test_merge_tie_break_is_lexicographic():
    counts = {"zzz zzz zzz zzz": 2, "aaa aaa aaa aaa": 2}
    res = merge_distribution(_dist(counts), MergeConfig(strategy="minimalist", threshold=100))
    assert res.mapping["zzz zzz zzz zzz"] == "aaa aaa aaa aaa"


def test_merged_distribution_uses_hub_display():
    dist = SenseDistribution(
        word="w", period=1,
        counts={"a big flying machine": 3, "a big flying machines": 1},
        display={"a big flying machine": "A big flying machine",
                 "a big flying machines": "a big Flying machines"},
        total=4,
    )
    res = merge_distribution(dist, MergeConfig(strategy="minimalist", threshold=5))
    assert res.merged.display == {"a big flying machine": "A big flying machine"}


_WORDS = ["alpha", "beta", "gamma", "delta", "omega"]


def _random_dist(rng: random.Random) -> SenseDistribution:
    n = rng.randint(1, 12)
    counts: dict[str, int] = {}
    for _ in range(n):
        words = [rng.choice(_WORDS) for _ in range(rng.randint(1, 6))]
        key = " ".join(words)
        counts[key] = counts.get(key, 0) + rng.randint(1, 9)
    return _dist(counts)


@pytest.mark.parametrize("seed", range(8))
def test_merge_invariants_on_random_inputs(seed):
    rng = random.Random(seed)
    dist = _random_dist(rng)
    for threshold in (0, 3, 8, 40):
        sizes = {}
        for strategy in ("none", "minimalist", "full_fledged"):
            res = merge_distribution(dist, MergeConfig(strategy=strategy, threshold=threshold))
            assert res.merged.total == dist.total
            assert sum(res.merged.counts.values()) == dist.total
            assert set(res.mapping) == set(dist.counts)
            for key, hub in res.mapping.items():
                assert hub in res.merged.counts
                if key != hub:
                    assert levenshtein(key, hub) < threshold
                    assert res.distances[key] == levenshtein(key, hub)
            sizes[strategy] = res.merged.sense_count()
        assert sizes["full_fledged"] <= sizes["minimalist"] <= sizes["none"]


def test_minimalist_threshold_monotonicity():
    rng = random.Random(42)
    for _ in range(20):
        dist = _random_dist(rng)
        prev = None
        for threshold in (0, 2, 4, 8, 16, 32):
            res = merge_distribution(dist, MergeConfig(strategy="minimalist", threshold=threshold))
            size = res.merged.sense_count()
            if prev is not None:
                assert size <= prev
            prev = size


def test_merge_joint_shares_hubs():
    d1 = _dist({"a common long definition here": 5}, period=1)
    d2 = _dist({"a common long definition heer": 4, "something else entirely new": 1}, period=2)
    r1, r2 = merge_joint(d1, d2, MergeConfig(strategy="minimalist", threshold=4))
    assert r1.merged.counts == {"a common long definition here": 5}
    assert r2.merged.counts == {"a common long definition here": 4,
                                "something else entirely new": 1}
    assert r2.mapping["a common long definition heer"] == "a common long definition here"


def test_merge_joint_rejects_different_words():
    with pytest.raises(ValueError):
        merge_joint(_dist({"a": 1}, word="x"), _dist({"a": 1}, word="y"), MergeConfig())


def test_merge_report_round_trip(tmp_path):
    res = merge_distribution(_dist(AIRCRAFT), MergeConfig(strategy="minimalist", threshold=10))
    path = tmp_path / "report.jsonl"
    write_merge_report({("w", 1): res}, path)
    records = load_merge_report(path)
    assert len(records) == len(AIRCRAFT)
    by_original = {r["original"]: r for r in records}
    moved = by_original["an aircraft designed for military usage"]
    assert moved["hub"] == "an aircraft designed for military use"
    assert moved["distance"] == 2
    assert by_original["a flat surface"]["distance"] == 0


def test_merge_report_bad_record(tmp_path):
    path = tmp_path / "report.jsonl"
    path.write_text(json.dumps({"word": "w"}) + "\n", encoding="utf-8")
    with pytest.raises(FormatError):
        load_merge_report(path)


def test_merge_rerun_is_byte_identical(tmp_path):
    dist = _random_dist(random.Random(9))
    config = MergeConfig(strategy="full_fledged", threshold=6)
    blobs = []
    for run in range(2):
        res = merge_distribution(dist, config)
        path = tmp_path / f"run{run}.jsonl"
        write_merge_report({("w", 1): res}, path)
        blobs.append(path.read_bytes())
    assert blobs[0] == blobs[1]
