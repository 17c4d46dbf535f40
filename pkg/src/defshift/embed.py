"""Embedding-based change scores over generated definitions.

Instead of comparing sense distributions, each definition is embedded and the
two periods are compared in vector space:

* ``apd`` - average pairwise cosine distance across the full period-1 x
  period-2 cross product;
* ``prt`` - cosine distance between the two mean vectors (prototypes);
* ``am`` - arithmetic mean of the two.

Cosine distance ranges over [0, 2]. Vectors are kept in usage-id order so a
rerun produces identical results; the cross product can be capped with
uniform pair subsampling under an explicit seed.
"""

from __future__ import annotations

import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import requests

from .defgen import Definition, TOKEN_ENV_VAR, _auth_headers
from .distrib import ChangeScoreRecord, Provenance
from .errors import FormatError, ServiceError, UndefinedScoreError

__all__ = [
    "EmbeddingSet",
    "EmbedResult",
    "embed_definitions",
    "vectors_from_file",
    "apd",
    "prt",
    "am",
    "score_embedding_pairs",
    "write_embeddings",
    "load_embeddings",
]


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """All definition vectors for one (word, period), one row per definition."""

    word: str
    period: int
    vectors: np.ndarray
    dim: int

    def __post_init__(self):
        arr = np.asarray(self.vectors, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"vectors must be a 2-d array, got shape {arr.shape}")
        if arr.shape[1] != self.dim:
            raise ValueError(f"declared dim {self.dim} != vector dim {arr.shape[1]}")
        object.__setattr__(self, "vectors", arr)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def zero_vector_count(self) -> int:
        if len(self) == 0:
            return 0
        return int(np.count_nonzero(np.linalg.norm(self.vectors, axis=1) == 0.0))


@dataclass
class EmbedResult:
    embeddings: EmbeddingSet
    usage_ids: list[str]
    failed: list[tuple[str, str]] = field(default_factory=list)


def _embed_one(
    session: requests.Session,
    endpoint: str,
    text: str,
    timeout: float,
    retries: int,
    backoff: float,
) -> list[float]:
    last: Exception | None = None
    import time

    for attempt in range(retries):
        try:
            resp = session.post(
                endpoint,
                json={"text": text},
                headers=_auth_headers(),
                timeout=timeout,
            )
            resp.raise_for_status()
            vector = resp.json()["vector"]
            if not isinstance(vector, list) or not vector:
                raise ServiceError(f"embedding service returned bad vector: {vector!r}")
            return [float(x) for x in vector]
        except (requests.RequestException, KeyError, TypeError, ValueError) as exc:
            last = exc
            if attempt + 1 < retries:
                time.sleep(backoff * (2 ** attempt))
    raise ServiceError(f"embedding request failed after {retries} attempts: {last}")


def embed_definitions(
    definitions: Sequence[Definition],
    endpoint: str,
    *,
    timeout: float = 60.0,
    retries: int = 3,
    backoff: float = 0.5,
    concurrency_limit: int = 4,
) -> EmbedResult:
    """Embed one (word, period) group of definitions via the HTTP service.

    Definitions are processed in sorted usage-id order. A definition whose
    request ultimately fails is dropped and recorded in ``failed``; a
    dimension mismatch between returned vectors is a hard error.
    """
    if not definitions:
        raise ValueError("no definitions to embed")
    words = {d.word for d in definitions}
    periods = {d.period for d in definitions}
    if len(words) > 1 or len(periods) > 1:
        raise ValueError(f"definitions span multiple groups: words={sorted(words)} periods={sorted(periods)}")
    ordered = sorted(definitions, key=lambda d: d.usage_id)

    results: dict[str, list[float]] = {}
    failed: list[tuple[str, str]] = []
    with requests.Session() as session:
        with ThreadPoolExecutor(max_workers=max(1, concurrency_limit)) as pool:
            futures = {
                pool.submit(_embed_one, session, endpoint, d.text, timeout, retries, backoff): d
                for d in ordered
            }
            for future, d in futures.items():
                try:
                    results[d.usage_id] = future.result()
                except ServiceError as exc:
                    failed.append((d.usage_id, str(exc)))

    kept_ids = [d.usage_id for d in ordered if d.usage_id in results]
    if not kept_ids:
        raise ServiceError(f"all {len(ordered)} embedding requests failed for {ordered[0].word!r}")
    dim = len(results[kept_ids[0]])
    for usage_id in kept_ids:
        if len(results[usage_id]) != dim:
            raise ServiceError(
                f"dimension mismatch: {usage_id} returned {len(results[usage_id])}-dim, expected {dim}"
            )
    matrix = np.array([results[u] for u in kept_ids], dtype=np.float64)
    word = ordered[0].word
    period = ordered[0].period
    return EmbedResult(
        embeddings=EmbeddingSet(word=word, period=period, vectors=matrix, dim=dim),
        usage_ids=kept_ids,
        failed=failed,
    )


def vectors_from_file(
    definitions: Sequence[Definition],
    vectors: Mapping[str, Sequence[float]],
) -> EmbedResult:
    """Build an EmbeddingSet for one group from pre-computed vectors.

    Definitions without a vector are dropped and recorded in ``failed``.
    """
    if not definitions:
        raise ValueError("no definitions to embed")
    ordered = sorted(definitions, key=lambda d: d.usage_id)
    kept: list[tuple[str, Sequence[float]]] = []
    failed: list[tuple[str, str]] = []
    for d in ordered:
        vec = vectors.get(d.usage_id)
        if vec is None:
            failed.append((d.usage_id, "no vector in embeddings file"))
        else:
            kept.append((d.usage_id, vec))
    if not kept:
        raise UndefinedScoreError(f"no vectors available for {ordered[0].word!r} period {ordered[0].period}")
    dim = len(kept[0][1])
    for usage_id, vec in kept:
        if len(vec) != dim:
            raise FormatError(f"dimension mismatch for {usage_id}: {len(vec)} != {dim}")
    matrix = np.array([vec for _, vec in kept], dtype=np.float64)
    return EmbedResult(
        embeddings=EmbeddingSet(ordered[0].word, ordered[0].period, matrix, dim),
        usage_ids=[u for u, _ in kept],
        failed=failed,
    )


def _unit_rows(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalized copy plus a boolean mask of zero rows."""
    norms = np.linalg.norm(matrix, axis=1)
    zero = norms == 0.0
    safe = np.where(zero, 1.0, norms)
    return matrix / safe[:, None], zero


def apd(
    x: EmbeddingSet,
    y: EmbeddingSet,
    *,
    max_pairs: int | None = None,
    seed: int = 0,
) -> float:
    """Average pairwise cosine distance over the cross product of x and y.

    A pair involving a zero vector contributes distance 1 (undefined angle,
    neutral midpoint of the range). With ``max_pairs`` below the full count,
    pairs are subsampled uniformly under ``seed``.
    """
    if len(x) == 0 or len(y) == 0:
        raise UndefinedScoreError(f"{x.word}: no vectors for apd")
    if x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} != {y.dim}")
    ux, zx = _unit_rows(x.vectors)
    uy, zy = _unit_rows(y.vectors)
    dist = 1.0 - np.clip(ux @ uy.T, -1.0, 1.0)
    dist[zx, :] = 1.0
    dist[:, zy] = 1.0
    flat = dist.ravel()
    if max_pairs is not None and max_pairs < flat.size:
        if max_pairs < 1:
            raise ValueError("max_pairs must be >= 1")
        idx = random.Random(seed).sample(range(flat.size), max_pairs)
        flat = flat[np.array(sorted(idx))]
    return float(min(max(flat.mean(), 0.0), 2.0))


def prt(x: EmbeddingSet, y: EmbeddingSet) -> float:
    """Cosine distance between the unnormalized mean vectors of each period."""
    if len(x) == 0 or len(y) == 0:
        raise UndefinedScoreError(f"{x.word}: no vectors for prt")
    if x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} != {y.dim}")
    mx = x.vectors.mean(axis=0)
    my = y.vectors.mean(axis=0)
    nx = np.linalg.norm(mx)
    ny = np.linalg.norm(my)
    if nx == 0.0 or ny == 0.0:
        raise UndefinedScoreError(f"{x.word}: zero-norm prototype")
    cos = float(np.clip(mx @ my / (nx * ny), -1.0, 1.0))
    return min(max(1.0 - cos, 0.0), 2.0)


def am(x: EmbeddingSet, y: EmbeddingSet, *, max_pairs: int | None = None, seed: int = 0) -> float:
    """Arithmetic mean of apd and prt."""
    return 0.5 * (apd(x, y, max_pairs=max_pairs, seed=seed) + prt(x, y))


def score_embedding_pairs(
    sets: Iterable[EmbeddingSet],
    metrics: Sequence[str],
    provenance: Provenance,
    *,
    max_pairs: int | None = None,
    seed: int = 0,
) -> tuple[list[ChangeScoreRecord], list[str]]:
    """Score every word with embeddings for both periods; skip and report the rest."""
    for metric in metrics:
        if metric not in ("apd", "prt", "am"):
            raise ValueError(f"not an embedding metric: {metric!r}")
    by_word: dict[str, dict[int, EmbeddingSet]] = {}
    for es in sets:
        periods = by_word.setdefault(es.word, {})
        if es.period in periods:
            raise ValueError(f"duplicate embeddings for {es.word!r} period {es.period}")
        periods[es.period] = es

    records: list[ChangeScoreRecord] = []
    skipped: list[str] = []
    for word in sorted(by_word):
        periods = by_word[word]
        if 1 not in periods or 2 not in periods:
            missing = 1 if 1 not in periods else 2
            skipped.append(f"{word}: no embeddings for period {missing}")
            continue
        x, y = periods[1], periods[2]
        try:
            for metric in metrics:
                if metric == "apd":
                    score = apd(x, y, max_pairs=max_pairs, seed=seed)
                elif metric == "prt":
                    score = prt(x, y)
                else:
                    score = am(x, y, max_pairs=max_pairs, seed=seed)
                records.append(ChangeScoreRecord(word, metric, score, provenance))
        except UndefinedScoreError as exc:
            records = [r for r in records if r.word != word]
            skipped.append(str(exc))
    return records, skipped


def write_embeddings(vectors: Mapping[str, Sequence[float]], path: str | Path) -> None:
    """Write usage-id/vector pairs as JSON-lines, sorted by usage id."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for usage_id in sorted(vectors):
            record = {"usage_id": usage_id, "vector": [float(x) for x in vectors[usage_id]]}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_embeddings(path: str | Path) -> dict[str, list[float]]:
    """Load an embeddings file; all vectors must share one dimensionality."""
    path = Path(path)
    vectors: dict[str, list[float]] = {}
    dim: int | None = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                usage_id = rec["usage_id"]
                vector = [float(x) for x in rec["vector"]]
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise FormatError(f"bad embedding record: {exc}", path=str(path), line=lineno) from exc
            if not isinstance(usage_id, str) or not usage_id:
                raise FormatError("usage_id must be a non-empty string", path=str(path), line=lineno)
            if not vector:
                raise FormatError("vector must be non-empty", path=str(path), line=lineno)
            if usage_id in vectors:
                raise FormatError(f"duplicate usage_id {usage_id!r}", path=str(path), line=lineno)
            if dim is None:
                dim = len(vector)
            elif len(vector) != dim:
                raise FormatError(
                    f"dimension mismatch: {len(vector)} != {dim}", path=str(path), line=lineno
                )
            vectors[usage_id] = vector
    return vectors
