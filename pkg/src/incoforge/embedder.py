"""Fixed sentence embeddings for the sentence-level detector.

Three provider kinds, all emitting unit-norm vectors of a declared dim:
  - "hash": seeded Gaussian from a hash of the sentence text;
  - "mean": mean of token vectors, renormalized;
  - "table": exact-text lookup of precomputed vectors, hash fallback on
    misses (misses are counted).
Providers are frozen: nothing in training mutates them, which a state
checksum lets callers assert.
"""

from __future__ import annotations

import base64
import hashlib

import numpy as np

from .corpus import Sentence
from .similarity import HashTokenVectors, TokenVectors, _seed_from

__all__ = [
    "EmbeddingProvider",
    "HashSentenceEmbeddings",
    "MeanTokenSentenceEmbeddings",
    "TableSentenceEmbeddings",
    "embed",
    "make_provider",
    "import_table",
    "export_table",
]


class EmbeddingProvider:
    kind: str
    dim: int

    def embed(self, sentence: Sentence) -> np.ndarray:
        raise NotImplementedError

    def checksum(self) -> str:
        """Digest of the provider's defining state (caches excluded)."""
        raise NotImplementedError


class HashSentenceEmbeddings(EmbeddingProvider):
    kind = "hash"

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, sentence: Sentence) -> np.ndarray:
        v = self._cache.get(sentence.text)
        if v is None:
            rng = np.random.Generator(
                np.random.PCG64(_seed_from("sentence", str(self.seed), sentence.text))
            )
            raw = rng.standard_normal(self.dim)
            v = raw / np.linalg.norm(raw)
            self._cache[sentence.text] = v
        return v

    def checksum(self) -> str:
        return hashlib.blake2b(
            f"hash:{self.dim}:{self.seed}".encode(), digest_size=16
        ).hexdigest()


class MeanTokenSentenceEmbeddings(EmbeddingProvider):
    """Mean of token vectors, renormalized to unit length.

    Sentences with equal token lists embed identically; a (vanishingly rare)
    zero mean falls back to the hash embedding of the text.
    """

    kind = "mean"

    def __init__(self, token_vectors: TokenVectors, seed: int = 0):
        self.dim = token_vectors.dim
        self.token_vectors = token_vectors
        self._fallback = HashSentenceEmbeddings(self.dim, seed)
        self.zero_fallbacks = 0

    def embed(self, sentence: Sentence) -> np.ndarray:
        if not sentence.tokens:
            raise ValueError("cannot embed a sentence with no tokens")
        mean = self.token_vectors.matrix(sentence.tokens).mean(axis=0)
        norm = np.linalg.norm(mean)
        if norm < 1e-12:
            self.zero_fallbacks += 1
            return self._fallback.embed(sentence)
        return mean / norm

    def checksum(self) -> str:
        seed = getattr(self.token_vectors, "seed", None)
        return hashlib.blake2b(
            f"mean:{self.dim}:{seed}".encode(), digest_size=16
        ).hexdigest()


class TableSentenceEmbeddings(EmbeddingProvider):
    kind = "table"

    def __init__(self, table: dict[str, np.ndarray], dim: int, fallback_seed: int = 0):
        self.dim = dim
        self.table = table
        self._fallback = HashSentenceEmbeddings(dim, fallback_seed)
        self.misses = 0

    def embed(self, sentence: Sentence) -> np.ndarray:
        v = self.table.get(sentence.text)
        if v is None:
            self.misses += 1
            return self._fallback.embed(sentence)
        return v

    def checksum(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        h.update(f"table:{self.dim}:{len(self.table)}".encode())
        for text in sorted(self.table):
            h.update(text.encode("utf-8"))
            h.update(self.table[text].tobytes())
        return h.hexdigest()


def embed(sentence: Sentence, provider: EmbeddingProvider) -> np.ndarray:
    return provider.embed(sentence)


def make_provider(
    kind: str, dim: int, seed: int = 0, table_path=None
) -> EmbeddingProvider:
    """Build a provider from CLI-style settings."""
    if kind == "hash":
        return HashSentenceEmbeddings(dim, seed)
    if kind == "mean":
        return MeanTokenSentenceEmbeddings(HashTokenVectors(dim, seed), seed)
    if kind == "table":
        if table_path is None:
            raise ValueError("table provider needs a table path")
        provider = import_table(table_path, fallback_seed=seed)
        if provider.dim != dim:
            raise ValueError(f"table dim {provider.dim} != requested dim {dim}")
        return provider
    raise ValueError(f"unknown embedding kind {kind!r}")


def import_table(path, fallback_seed: int = 0) -> TableSentenceEmbeddings:
    """Load a sentence-embedding table.

    Format: "<count> <dim>" header, then lines
    "<base64-of-sentence-text>\\t<f1> ... <fdim>". Vectors renormalized.
    """
    with open(path, encoding="utf-8") as f:
        head = f.readline().split()
        if len(head) != 2:
            raise ValueError("embedding table header must be '<count> <dim>'")
        n, dim = int(head[0]), int(head[1])
        table: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            try:
                b64, vals = line.rstrip("\n").split("\t")
            except ValueError as e:
                raise ValueError(f"line {lineno}: expected '<base64>\\t<floats>'") from e
            text = base64.b64decode(b64).decode("utf-8")
            vec = np.array([float(p) for p in vals.split(" ")], dtype=np.float64)
            if vec.shape[0] != dim:
                raise ValueError(f"line {lineno}: expected {dim} floats, got {vec.shape[0]}")
            norm = np.linalg.norm(vec)
            if norm == 0.0:
                raise ValueError(f"line {lineno}: zero vector")
            table[text] = vec / norm
    if len(table) != n:
        raise ValueError(f"header declared {n} entries, found {len(table)}")
    return TableSentenceEmbeddings(table, dim, fallback_seed)


def export_table(table: dict[str, np.ndarray], dim: int, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{len(table)} {dim}\n")
        for text in sorted(table):
            b64 = base64.b64encode(text.encode("utf-8")).decode("ascii")
            vals = " ".join(repr(float(v)) for v in table[text])
            f.write(f"{b64}\t{vals}\n")
