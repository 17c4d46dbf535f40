"""Tests for the definition-generation client against the stub service."""

from __future__ import annotations

import json

import pytest

from defshift.corpus import UsageExample
from defshift.defgen import (
    DecodingParams,
    TOKEN_ENV_VAR,
    build_prompt,
    generate,
    load_definitions,
    make_definition,
    register_prompt_template,
    write_definitions,
)
from defshift.errors import ConfigError, FormatError, ServiceError


def _usage(word="plane", period=1, i=1, sentence=None):
    sentence = sentence or f"The {word} flew over the field."
    lo = sentence.index(word)
    return UsageExample(
        usage_id=f"{word}:{period}:{i:08d}",
        word=word,
        period=period,
        sentence=sentence,
        match_span=(lo, lo + len(word)),
    )


def test_build_prompt_appends_question():
    u = _usage()
    assert build_prompt(u, "en") == "The plane flew over the field. What is the definition of plane?"


def test_build_prompt_uses_matched_form():
    sentence = "Planes were landing."
    u = UsageExample(usage_id="plane:1:00000001", word="plane", period=1,
                     sentence=sentence, match_span=(0, 6))
    assert build_prompt(u, "en").endswith("What is the definition of Planes?")


def test_build_prompt_unknown_language():
    with pytest.raises(ConfigError):
        build_prompt(_usage(), "xx")


def test_register_prompt_template():
    register_prompt_template("de", "Was bedeutet {target}?")
    assert build_prompt(_usage(), "de").endswith("Was bedeutet plane?")
    with pytest.raises(ConfigError):
        register_prompt_template("fr", "no placeholder")


class TestDecodingParams:
    def test_defaults(self):
        params = DecodingParams()
        assert params.strategy == "greedy"

    def test_payload_shape(self):
        payload = DecodingParams(strategy="diverse_beam", num_beams=5,
                                 diversity_penalty=0.5, repetition_penalty=1.2).to_payload()
        assert payload == {
            "strategy": "diverse_beam",
            "num_beams": 5,
            "diversity_penalty": 0.5,
            "repetition_penalty": 1.2,
        }

    def test_unknown_strategy(self):
        with pytest.raises(ValueError):
            DecodingParams(strategy="magic")

    def test_diversity_requires_diverse_beam(self):
        with pytest.raises(ValueError):
            DecodingParams(strategy="beam", diversity_penalty=0.5)
        DecodingParams(strategy="beam", diversity_penalty=0.0)

    def test_repetition_penalty_bound(self):
        with pytest.raises(ValueError):
            DecodingParams(repetition_penalty=0.5, diversity_penalty=0.0)

    def test_cache_key_is_canonical(self):
        a = DecodingParams(strategy="greedy", diversity_penalty=0.0)
        b = DecodingParams(strategy="greedy", diversity_penalty=0.0)
        assert a.cache_key() == b.cache_key()
        assert a.cache_key() != DecodingParams(strategy="beam", diversity_penalty=0.0).cache_key()


def test_make_definition_normalizes():
    d = make_definition("w:1:00000001", "w", 1, "  A  flying, machine!  ")
    assert d.key == "a flying machine"
    assert d.display_text == "A flying machine"
    assert d.text == "  A  flying, machine!  "


def test_make_definition_drops_empty():
    assert make_definition("w:1:00000001", "w", 1, " ... !!! ") is None
    assert make_definition("w:1:00000001", "w", 1, "") is None


def test_generate_deterministic_and_sorted(stub_service):
    usages = [_usage(i=i) for i in (3, 1, 2)]
    params = DecodingParams()
    batch = generate(usages, stub_service.define_url, params)
    assert len(batch.definitions) == 3
    ids = [d.usage_id for d in batch.definitions]
    assert ids == sorted(ids)
    again = generate(usages, stub_service.define_url, params)
    assert [d.text for d in again.definitions] == [d.text for d in batch.definitions]


def test_generate_sends_decoding_payload(stub_service):
    params = DecodingParams(strategy="diverse_beam", num_beams=5,
                            diversity_penalty=0.5, repetition_penalty=1.2)
    generate([_usage()], stub_service.define_url, params)
    seen = stub_service.state.seen("/define")
    assert seen[0]["decoding"]["strategy"] == "diverse_beam"
    assert seen[0]["target"] == "plane"
    assert seen[0]["language"] == "en"


def test_generate_uses_cache(stub_service, tmp_path):
    cache = tmp_path / "cache.jsonl"
    usages = [_usage(i=i) for i in range(4)]
    params = DecodingParams()
    first = generate(usages, stub_service.define_url, params, cache_path=cache)
    assert first.from_cache == 0
    count_after_first = len(stub_service.state.seen("/define"))
    second = generate(usages, stub_service.define_url, params, cache_path=cache)
    assert second.from_cache == 4
    assert len(stub_service.state.seen("/define")) == count_after_first
    assert [d.text for d in second.definitions] == [d.text for d in first.definitions]


def test_generate_cache_distinguishes_params(stub_service, tmp_path):
    cache = tmp_path / "cache.jsonl"
    usages = [_usage()]
    generate(usages, stub_service.define_url, DecodingParams(), cache_path=cache)
    batch = generate(usages, stub_service.define_url,
                     DecodingParams(strategy="beam", diversity_penalty=0.0), cache_path=cache)
    assert batch.from_cache == 0


def test_generate_retries_transient_failure(stub_service):
    stub_service.state.fail_next = 1
    batch = generate([_usage()], stub_service.define_url, DecodingParams(), backoff=0.01)
    assert len(batch.definitions) == 1
    assert not batch.failed


def test_generate_aborts_over_failure_rate(stub_service):
    stub_service.state.fail_targets = {"plane"}
    usages = [_usage(i=i) for i in range(3)]
    with pytest.raises(ServiceError):
        generate(usages, stub_service.define_url, DecodingParams(), retries=1, backoff=0.0)


def test_generate_tolerates_minority_failures(stub_service):
    stub_service.state.fail_targets = {"crash"}
    sentence = "The crash happened."
    bad = UsageExample(usage_id="crash:1:00000001", word="crash", period=1,
                       sentence=sentence, match_span=(4, 9))
    good = [_usage(i=i) for i in range(4)]
    batch = generate(good + [bad], stub_service.define_url, DecodingParams(),
                     retries=1, backoff=0.0)
    assert len(batch.definitions) == 4
    assert [uid for uid, _ in batch.failed] == ["crash:1:00000001"]


def test_generate_sends_bearer_token(stub_service, monkeypatch):
    monkeypatch.setenv(TOKEN_ENV_VAR, "sekrit")
    stub_service.state.required_token = "sekrit"
    batch = generate([_usage()], stub_service.define_url, DecodingParams())
    assert len(batch.definitions) == 1


def test_generate_fails_without_required_token(stub_service, monkeypatch):
    monkeypatch.delenv(TOKEN_ENV_VAR, raising=False)
    stub_service.state.required_token = "sekrit"
    with pytest.raises(ServiceError):
        generate([_usage()], stub_service.define_url, DecodingParams(), retries=1, backoff=0.0)


def test_definitions_round_trip(tmp_path):
    defs = [
        make_definition("b:2:00000002", "b", 2, "a round object used in games"),
        make_definition("a:1:00000001", "a", 1, "Ein Ding, mit Umlauten: äöü!"),
    ]
    path = tmp_path / "defs.jsonl"
    write_definitions(defs, path)
    batch = load_definitions(path)
    assert [d.usage_id for d in batch.definitions] == ["a:1:00000001", "b:2:00000002"]
    assert batch.definitions[0].display_text == "Ein Ding mit Umlauten äöü"


def test_load_definitions_counts_empty(tmp_path):
    path = tmp_path / "defs.jsonl"
    records = [
        {"usage_id": "a:1:00000001", "word": "a", "period": 1, "text": "something real"},
        {"usage_id": "a:1:00000002", "word": "a", "period": 1, "text": "!!!"},
    ]
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    batch = load_definitions(path)
    assert len(batch.definitions) == 1
    assert batch.dropped_empty == 1


def test_load_definitions_bad_record(tmp_path):
    path = tmp_path / "defs.jsonl"
    path.write_text('{"usage_id": "a:1:00000001", "word": "a", "period": 9, "text": "x"}\n',
                    encoding="utf-8")
    with pytest.raises(FormatError) as err:
        load_definitions(path)
    assert ":1:" in str(err.value)
