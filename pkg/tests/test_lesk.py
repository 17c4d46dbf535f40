"""Tests for the gloss-overlap disambiguation baseline."""

from __future__ import annotations

import pytest

from defshift.corpus import UsageExample
from defshift.errors import FormatError
from defshift.lesk import (
    Sense,
    SenseInventory,
    lesk_disambiguate,
    lesk_pipeline,
    load_inventory,
)

BANK_SENSES = (
    Sense(gloss="a financial institution that accepts deposits", pos="noun"),
    Sense(gloss="sloping land beside a river", pos="noun"),
    Sense(gloss="to tilt an aircraft in a turn", pos="verb"),
)
INVENTORY = SenseInventory(entries={"bank": BANK_SENSES})


def _usage(sentence, usage_id="u1", word="bank", period=1, span=None):
    return UsageExample(usage_id=usage_id, word=word, period=period,
                        sentence=sentence, match_span=span)


def test_overlap_picks_best_sense():
    usage = _usage("the river bank was covered in sloping mud")
    assert lesk_disambiguate(usage, INVENTORY) == 1
    usage = _usage("she walked to the bank to open a deposits account at the institution")
    assert lesk_disambiguate(usage, INVENTORY) == 0


def test_tie_goes_to_lowest_index():
    # no context token appears in any gloss: all overlaps are zero
    usage = _usage("xyzzy plugh quux")
    assert lesk_disambiguate(usage, INVENTORY) == 0


def test_target_form_excluded_from_context():
    # "bank" itself must not count as overlap even if a gloss mentioned it
    inv = SenseInventory(entries={"bank": (
        Sense(gloss="bank bank bank"),
        Sense(gloss="river land"),
    )})
    usage = _usage("the bank by the river")
    assert lesk_disambiguate(usage, inv) == 1


def test_matched_form_from_span_is_excluded():
    # span covers "Banks"; the lowercased surface form is what gets removed
    sentence = "Banks line the river and the sloping land"
    span = (0, 5)
    usage = _usage(sentence, span=span)
    assert usage.matched_form == "Banks"
    assert lesk_disambiguate(usage, INVENTORY) == 1


def test_pos_filter_restricts_candidates():
    usage = _usage("they tilt the plane and turn above the river")
    # verb filter leaves only index 2 even though gloss 1 also overlaps
    assert lesk_disambiguate(usage, INVENTORY, use_pos=True, pos="verb") == 2


def test_pos_filter_falls_back_when_nothing_matches():
    usage = _usage("sloping land beside a river")
    assert lesk_disambiguate(usage, INVENTORY, use_pos=True, pos="adjective") == 1


def test_missing_lemma_raises():
    usage = _usage("some sentence", word="missing")
    with pytest.raises(KeyError):
        lesk_disambiguate(usage, INVENTORY)


def test_pipeline_builds_distributions():
    usages = [
        _usage("the river bank was sloping", usage_id="u1", period=1),
        _usage("deposits went to the financial institution bank", usage_id="u2", period=1),
        _usage("sloping land beside a river", usage_id="u3", period=2),
    ]
    result = lesk_pipeline(usages, INVENTORY)
    assert len(result.distributions) == 2
    p1 = next(d for d in result.distributions if d.period == 1)
    p2 = next(d for d in result.distributions if d.period == 2)
    assert p1.counts == {"0": 1, "1": 1}
    assert p2.counts == {"1": 1}
    assert p1.display["1"] == "sloping land beside a river"
    assert result.unassigned == {("bank", 1): 0, ("bank", 2): 0}
    assert result.diagnostics == []


def test_pipeline_counts_unassigned_for_missing_lemma():
    usages = [
        _usage("anything at all", usage_id="u1", word="ghost", period=1),
        _usage("anything else", usage_id="u2", word="ghost", period=1),
    ]
    result = lesk_pipeline(usages, INVENTORY)
    assert result.distributions == []
    assert result.unassigned == {("ghost", 1): 2}
    assert any("not in inventory" in d for d in result.diagnostics)


def test_pipeline_conservation():
    usages = [
        _usage("river sloping", usage_id=f"u{i}", period=1 + i % 2) for i in range(10)
    ] + [
        _usage("x", usage_id=f"g{i}", word="ghost", period=1) for i in range(3)
    ]
    result = lesk_pipeline(usages, INVENTORY)
    assigned = sum(d.total for d in result.distributions)
    dropped = sum(result.unassigned.values())
    assert assigned + dropped == len(usages)


def test_pipeline_pos_fallback_diagnostic_once():
    usages = [
        _usage("river sloping", usage_id="u1", period=1),
        _usage("river sloping", usage_id="u2", period=2),
    ]
    result = lesk_pipeline(usages, INVENTORY, use_pos=True, pos_by_word={"bank": "adverb"})
    flagged = [d for d in result.diagnostics if "falling back" in d]
    assert len(flagged) == 1


def test_load_inventory_round_trip(tmp_path):
    path = tmp_path / "inventory.tsv"
    path.write_text(
        "# lemma\tpos\tgloss\n"
        "bank\tnoun\ta financial institution\n"
        "bank\t\tsloping land beside a river\n"
        "plane\tNOUN\ta flat surface\n",
        encoding="utf-8",
    )
    inv = load_inventory(path)
    assert len(inv) == 2
    senses = inv.senses("bank")
    assert senses[0].pos == "NOUN"
    assert senses[1].pos is None
    assert inv.senses("plane")[0].pos == "NOUN"


def test_load_inventory_errors(tmp_path):
    path = tmp_path / "inventory.tsv"
    path.write_text("bank\tnoun\n", encoding="utf-8")
    with pytest.raises(FormatError) as err:
        load_inventory(path)
    assert ":1:" in str(err.value)

    path.write_text("# only a comment\n", encoding="utf-8")
    with pytest.raises(FormatError):
        load_inventory(path)

    path.write_text("\tnoun\tgloss\n", encoding="utf-8")
    with pytest.raises(FormatError):
        load_inventory(path)
