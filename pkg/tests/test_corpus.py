"""Tests for target loading, usage extraction, and sampling."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from defshift.corpus import (
    SamplingConfig,
    TargetWord,
    UsageExample,
    coverage_report,
    find_usages,
    load_targets,
    load_usages,
    normalize_pos,
    sample_usages,
    write_usages,
)
from defshift.errors import FormatError


def test_normalize_pos_aliases():
    assert normalize_pos("nn") == "NOUN"
    assert normalize_pos("Verb") == "VERB"
    assert normalize_pos("ADJ") == "ADJ"
    assert normalize_pos("adv") == "ADV"
    with pytest.raises(ValueError):
        normalize_pos("xx")


def test_target_word_includes_lemma_as_form():
    t = TargetWord(lemma="run", forms=("ran", "running"))
    assert "run" in t.forms


def test_usage_example_validation():
    with pytest.raises(ValueError):
        UsageExample(usage_id="a:3:1", word="a", period=3, sentence="a b", match_span=(0, 1))
    with pytest.raises(ValueError):
        UsageExample(usage_id="a:1:1", word="a", period=1, sentence="", match_span=None)
    with pytest.raises(ValueError):
        UsageExample(usage_id="a:1:1", word="a", period=1, sentence="ab", match_span=(1, 9))


def test_load_targets(tmp_path):
    path = tmp_path / "targets.tsv"
    path.write_text(
        "# comment line\n"
        "plane\tplanes,plane\tnn\n"
        "ball\n"
        "graft\tgrafts\n",
        encoding="utf-8",
    )
    targets = load_targets(path)
    assert [t.lemma for t in targets] == ["plane", "ball", "graft"]
    assert targets[0].pos == "NOUN"
    assert set(targets[0].forms) == {"plane", "planes"}
    assert targets[1].forms == ("ball",)


def test_load_targets_duplicate_lemma(tmp_path):
    path = tmp_path / "targets.tsv"
    path.write_text("ball\nball\n", encoding="utf-8")
    with pytest.raises(FormatError) as err:
        load_targets(path)
    assert "2" in str(err.value)


def test_find_usages_whole_tokens_only(tmp_path):
    corpus = tmp_path / "c.txt"
    corpus.write_text(
        "The ball rolled away.\n"
        "They danced in the ballroom all night.\n"
        "Smallball is not a word but footballs are.\n"
        "A Ball, capitalized and with punctuation!\n",
        encoding="utf-8",
    )
    targets = [TargetWord(lemma="ball")]
    usages = find_usages(corpus, targets, period=1)
    assert [u.usage_id for u in usages] == ["ball:1:00000001", "ball:1:00000004"]
    first = usages[0]
    assert first.sentence[first.match_span[0]:first.match_span[1]] == "ball"
    assert usages[1].matched_form == "Ball"


def test_find_usages_multiple_forms_and_tsv(tmp_path):
    corpus = tmp_path / "c.tsv"
    corpus.write_text(
        "He was running fast.\textra column ignored\n"
        "\n"
        "I run daily.\tmeta\n",
        encoding="utf-8",
    )
    targets = [TargetWord(lemma="run", forms=("running",))]
    usages = find_usages(corpus, targets, period=2)
    assert len(usages) == 2
    assert all(u.period == 2 for u in usages)
    assert usages[0].matched_form == "running"


def test_find_usages_one_match_per_sentence(tmp_path):
    corpus = tmp_path / "c.txt"
    corpus.write_text("ball after ball after ball\n", encoding="utf-8")
    usages = find_usages(corpus, [TargetWord(lemma="ball")], period=1)
    assert len(usages) == 1
    assert usages[0].match_span == (0, 4)


def _mk_usages(word: str, period: int, n: int, words_per_sentence: int = 5):
    sentence = " ".join([word] + ["filler"] * (words_per_sentence - 1))
    return [
        UsageExample(
            usage_id=f"{word}:{period}:{i:08d}",
            word=word,
            period=period,
            sentence=sentence,
            match_span=(0, len(word)),
        )
        for i in range(n)
    ]


def test_sample_passthrough_below_cap():
    usages = _mk_usages("ball", 1, 10)
    out = sample_usages(usages, SamplingConfig(max_per_word_per_period=10, seed=1))
    assert out == usages


def test_sample_caps_and_preserves_order():
    usages = _mk_usages("ball", 1, 50)
    out = sample_usages(usages, SamplingConfig(max_per_word_per_period=20, seed=3))
    assert len(out) == 20
    ids = [u.usage_id for u in out]
    assert ids == sorted(ids)
    assert set(out) <= set(usages)


def test_sample_deterministic():
    usages = _mk_usages("ball", 1, 100)
    config = SamplingConfig(max_per_word_per_period=30, seed=7)
    assert sample_usages(usages, config) == sample_usages(usages, config)


def test_sample_filters_long_sentences():
    short = _mk_usages("ball", 1, 3, words_per_sentence=4)
    long = _mk_usages("ball", 1, 2, words_per_sentence=40)
    out = sample_usages(short + long, SamplingConfig(max_tokens=10))
    assert out == short


def test_sample_rejects_mixed_groups():
    mixed = _mk_usages("ball", 1, 2) + _mk_usages("ball", 2, 2)
    with pytest.raises(ValueError):
        sample_usages(mixed, SamplingConfig())


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 200), cap=st.integers(1, 100), seed=st.integers(0, 2**31))
def test_sample_properties(n, cap, seed):
    usages = _mk_usages("w", 1, n)
    out = sample_usages(usages, SamplingConfig(max_per_word_per_period=cap, seed=seed))
    assert len(out) == min(n, cap)
    positions = [int(u.usage_id.split(":")[-1]) for u in out]
    assert positions == sorted(positions)
    assert len(set(positions)) == len(positions)


def test_coverage_report_includes_zeros():
    targets = [TargetWord(lemma="ball"), TargetWord(lemma="ghost")]
    usages = _mk_usages("ball", 1, 2) + _mk_usages("ball", 2, 1)
    report = coverage_report(targets, usages)
    assert report["ball"] == {"period1": 2, "period2": 1}
    assert report["ghost"] == {"period1": 0, "period2": 0}


def test_usages_round_trip(tmp_path):
    usages = _mk_usages("ball", 1, 3) + [
        UsageExample(usage_id="x:2:00000001", word="x", period=2, sentence="an x here", match_span=None)
    ]
    path = tmp_path / "usages.jsonl"
    write_usages(usages, path)
    assert load_usages(path) == usages


def test_load_usages_reports_bad_line(tmp_path):
    path = tmp_path / "usages.jsonl"
    path.write_text('{"usage_id": "a:1:1"}\n', encoding="utf-8")
    with pytest.raises(FormatError) as err:
        load_usages(path)
    assert str(path) in str(err.value)
    assert ":1:" in str(err.value)
