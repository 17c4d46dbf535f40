"""Client for obtaining contextual definitions of target-word usages.

Definitions come either from an external inference service over HTTP or from
a pre-generated JSON-lines file. For each usage the prompt is the sentence
followed by a language-appropriate question naming the matched target form.

Wire contract (service mode): one POST per usage with body
``{"prompt": ..., "target": ..., "language": ..., "decoding": {...}}``;
the service answers ``{"definition": "..."}``. A bearer token is sent when
the DEFSHIFT_TOKEN environment variable is set.

Responses are cached in an append-only JSON-lines file keyed by
(usage_id, decoding parameters), so interrupted runs resume without
re-requesting anything.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import requests

from .corpus import UsageExample
from .errors import ConfigError, FormatError, ServiceError
from .sensebank import normalize_definition

__all__ = [
    "DecodingParams",
    "Definition",
    "DefinitionBatch",
    "PROMPT_TEMPLATES",
    "register_prompt_template",
    "build_prompt",
    "make_definition",
    "generate",
    "load_definitions",
    "write_definitions",
]

log = logging.getLogger(__name__)

TOKEN_ENV_VAR = "DEFSHIFT_TOKEN"

DECODING_STRATEGIES = ("greedy", "beam", "diverse_beam", "sampling")


def _auth_headers() -> dict[str, str]:
    """Bearer-token headers when DEFSHIFT_TOKEN is set, empty otherwise."""
    token = os.environ.get(TOKEN_ENV_VAR)
    return {"Authorization": f"Bearer {token}"} if token else {}

# The question appended after the usage sentence, per language. Additional
# languages can be added at runtime with register_prompt_template().
PROMPT_TEMPLATES: dict[str, str] = {
    "en": "What is the definition of {target}?",
    "no": "Hva er definisjonen av {target}?",
    "ru": "Каково определение слова {target}?",
}


def register_prompt_template(language: str, template: str) -> None:
    """Register the definition question for a language; must contain {target}."""
    if "{target}" not in template:
        raise ConfigError("prompt template must contain a {target} placeholder")
    PROMPT_TEMPLATES[language] = template


@dataclass(frozen=True)
class DecodingParams:
    """Decoding options forwarded verbatim to the generation service."""

    strategy: str = "greedy"
    num_beams: int = 5
    diversity_penalty: float = 0.0
    repetition_penalty: float = 1.0

    def __post_init__(self):
        if self.strategy not in DECODING_STRATEGIES:
            raise ValueError(f"strategy must be one of {DECODING_STRATEGIES}, got {self.strategy!r}")
        if self.num_beams < 1:
            raise ValueError("num_beams must be >= 1")
        if self.diversity_penalty < 0:
            raise ValueError("diversity_penalty must be >= 0")
        if self.diversity_penalty and self.strategy != "diverse_beam":
            raise ValueError("diversity_penalty is only meaningful for diverse_beam")
        if self.repetition_penalty < 1:
            raise ValueError("repetition_penalty must be >= 1")

    def to_payload(self) -> dict:
        return {
            "strategy": self.strategy,
            "num_beams": self.num_beams,
            "diversity_penalty": self.diversity_penalty,
            "repetition_penalty": self.repetition_penalty,
        }

    def cache_key(self) -> str:
        """Canonical form used to key the response cache."""
        return json.dumps(self.to_payload(), sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class Definition:
    """A generated definition attached to one usage."""

    usage_id: str
    word: str
    period: int
    text: str
    display_text: str
    key: str


@dataclass
class DefinitionBatch:
    """Definitions plus bookkeeping about what was dropped or failed."""

    definitions: list[Definition]
    dropped_empty: int = 0
    failed: list[tuple[str, str]] = field(default_factory=list)  # (usage_id, reason)
    from_cache: int = 0
    requested: int = 0


def build_prompt(usage: UsageExample, language: str) -> str:
    """Sentence followed by the language's definition question for the matched form."""
    template = PROMPT_TEMPLATES.get(language)
    if template is None:
        raise ConfigError(
            f"no prompt template registered for language {language!r}; "
            f"known: {sorted(PROMPT_TEMPLATES)}"
        )
    if not usage.sentence.strip():
        raise ValueError(f"usage {usage.usage_id} has an empty sentence")
    return f"{usage.sentence} {template.format(target=usage.matched_form)}"


def make_definition(usage_id: str, word: str, period: int, text: str) -> Definition | None:
    """Build a Definition, or None when the text normalizes to nothing."""
    if not text or not text.strip():
        return None
    normalized = normalize_definition(text)
    if normalized is None:
        return None
    key, display = normalized
    return Definition(
        usage_id=usage_id, word=word, period=period, text=text,
        display_text=display, key=key,
    )


class _Cache:
    """Append-only JSON-lines cache of raw service responses."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()
        self._entries: dict[tuple[str, str], str] = {}
        if self.path is not None and self.path.exists():
            with self.path.open("r", encoding="utf-8") as fh:
                for lineno, raw in enumerate(fh, start=1):
                    if not raw.strip():
                        continue
                    try:
                        rec = json.loads(raw)
                        self._entries[(rec["usage_id"], rec["params"])] = rec["text"]
                    except (KeyError, json.JSONDecodeError) as exc:
                        raise FormatError(f"bad cache record: {exc}", path=str(self.path), line=lineno) from exc

    def get(self, usage_id: str, params_key: str) -> str | None:
        return self._entries.get((usage_id, params_key))

    def put(self, usage_id: str, params_key: str, text: str) -> None:
        with self._lock:
            self._entries[(usage_id, params_key)] = text
            if self.path is not None:
                record = {"usage_id": usage_id, "params": params_key, "text": text}
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def _request_definition(
    session: requests.Session,
    endpoint: str,
    payload: dict,
    headers: dict[str, str],
    retries: int,
    backoff: float,
    timeout: float,
) -> str:
    last_exc: Exception | None = None
    for attempt in range(retries):
        try:
            resp = session.post(endpoint, json=payload, headers=headers, timeout=timeout)
            resp.raise_for_status()
            body = resp.json()
            return str(body["definition"])
        except (requests.RequestException, KeyError, ValueError) as exc:
            last_exc = exc
            if attempt + 1 < retries:
                time.sleep(backoff * (2 ** attempt))
    raise ServiceError(f"request failed after {retries} attempts: {last_exc}")


def generate(
    usages: list[UsageExample],
    endpoint: str,
    params: DecodingParams,
    concurrency_limit: int = 4,
    language: str = "en",
    cache_path: str | Path | None = None,
    retries: int = 3,
    backoff: float = 0.5,
    timeout: float = 60.0,
    max_failure_rate: float = 0.5,
) -> DefinitionBatch:
    """Fetch one definition per usage from the generation service.

    Requests run concurrently up to ``concurrency_limit``; results are sorted
    by usage_id, so output does not depend on scheduling. Cached
    (usage_id, params) pairs are never re-requested. Per-usage transport
    failures are recorded and the run continues, unless more than
    ``max_failure_rate`` of the uncached requests fail, which aborts the run.
    Empty or punctuation-only generations are dropped and counted.
    """
    if concurrency_limit < 1:
        raise ValueError("concurrency_limit must be >= 1")
    cache = _Cache(cache_path)
    params_key = params.cache_key()
    headers = _auth_headers()

    texts: dict[str, str] = {}
    from_cache = 0
    pending: list[UsageExample] = []
    for u in usages:
        cached = cache.get(u.usage_id, params_key)
        if cached is not None:
            texts[u.usage_id] = cached
            from_cache += 1
        else:
            pending.append(u)

    failed: list[tuple[str, str]] = []
    if pending:
        session = requests.Session()

        def fetch(usage: UsageExample) -> tuple[str, str]:
            payload = {
                "prompt": build_prompt(usage, language),
                "target": usage.matched_form,
                "language": language,
                "decoding": params.to_payload(),
            }
            text = _request_definition(session, endpoint, payload, headers, retries, backoff, timeout)
            cache.put(usage.usage_id, params_key, text)
            return usage.usage_id, text

        with ThreadPoolExecutor(max_workers=concurrency_limit) as pool:
            futures = {pool.submit(fetch, u): u for u in pending}
            for future, usage in futures.items():
                try:
                    usage_id, text = future.result()
                    texts[usage_id] = text
                except ServiceError as exc:
                    failed.append((usage.usage_id, str(exc)))

        if len(failed) > max_failure_rate * len(pending):
            raise ServiceError(
                f"{len(failed)}/{len(pending)} requests failed "
                f"(limit {max_failure_rate:.0%}); first error: {failed[0][1]}"
            )

    definitions: list[Definition] = []
    dropped = 0
    by_id = {u.usage_id: u for u in usages}
    for usage_id in sorted(texts):
        u = by_id[usage_id]
        d = make_definition(usage_id, u.word, u.period, texts[usage_id])
        if d is None:
            dropped += 1
        else:
            definitions.append(d)

    if failed:
        log.warning("%d definition requests failed", len(failed))
    if dropped:
        log.info("dropped %d empty generations", dropped)
    return DefinitionBatch(
        definitions=definitions,
        dropped_empty=dropped,
        failed=sorted(failed),
        from_cache=from_cache,
        requested=len(pending),
    )


def load_definitions(path: str | Path) -> DefinitionBatch:
    """Read pre-generated definitions from a JSON-lines file.

    Expected fields per line: usage_id, word, period, text. Empty-text records
    are dropped with a count; a malformed line raises with its line number.
    """
    definitions: list[Definition] = []
    dropped = 0
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                usage_id = rec["usage_id"]
                word = rec["word"]
                period = int(rec["period"])
                text = rec["text"]
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise FormatError(f"bad definition record: {exc}", path=str(path), line=lineno) from exc
            if period not in (1, 2):
                raise FormatError(f"period must be 1 or 2, got {period}", path=str(path), line=lineno)
            d = make_definition(usage_id, word, period, text)
            if d is None:
                dropped += 1
            else:
                definitions.append(d)
    return DefinitionBatch(definitions=definitions, dropped_empty=dropped)


def write_definitions(defs: Iterable[Definition], path: str | Path) -> None:
    """Dump definitions as JSON-lines; the format load_definitions reads back."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in sorted(defs, key=lambda d: d.usage_id):
            record = {"usage_id": d.usage_id, "word": d.word, "period": d.period, "text": d.text}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
