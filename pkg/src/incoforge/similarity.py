"""Greedy token-matching similarity used to filter confounder candidates.

Token vectors come from a loaded table or from a deterministic seeded
hash-projection fallback; both emit unit-norm vectors, so dot products are
cosines. The score is the F variant of greedy matching: precision is the
mean over one side's tokens of the best cosine against the other side,
recall is symmetric, F is their harmonic mean.
"""

from __future__ import annotations

import hashlib
from typing import Sequence

import numpy as np

__all__ = [
    "TokenVectors",
    "HashTokenVectors",
    "TableTokenVectors",
    "cosine",
    "bertscore_f",
    "load_token_vectors",
    "save_token_vectors",
]


def _seed_from(*parts: str) -> int:
    h = hashlib.blake2b("\x1f".join(parts).encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "little")


class TokenVectors:
    """Base provider: deterministic unit-norm vector per token."""

    dim: int

    def vector(self, token: str) -> np.ndarray:
        raise NotImplementedError

    def matrix(self, tokens: Sequence[str]) -> np.ndarray:
        return np.stack([self.vector(t) for t in tokens])


class HashTokenVectors(TokenVectors):
    """Seeded Gaussian vector per token, derived from a hash of the token.

    The same (token, dim, seed) always yields the same vector; distinct
    tokens are near-orthogonal in high dimensions.
    """

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def vector(self, token: str) -> np.ndarray:
        v = self._cache.get(token)
        if v is None:
            rng = np.random.Generator(
                np.random.PCG64(_seed_from("token", str(self.seed), token))
            )
            raw = rng.standard_normal(self.dim)
            v = raw / np.linalg.norm(raw)
            self._cache[token] = v
        return v


class TableTokenVectors(TokenVectors):
    """Vectors from a loaded table, with a hash-projection fallback for
    out-of-vocabulary tokens (misses are counted)."""

    def __init__(self, table: dict[str, np.ndarray], dim: int, fallback_seed: int = 0):
        self.dim = dim
        self._table = table
        self._fallback = HashTokenVectors(dim, fallback_seed)
        self.misses = 0

    def vector(self, token: str) -> np.ndarray:
        v = self._table.get(token)
        if v is None:
            self.misses += 1
            return self._fallback.vector(token)
        return v


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]. Rejects dimension mismatch and zero vectors."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine undefined for zero vectors")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def bertscore_f(
    x_tokens: Sequence[str], y_tokens: Sequence[str], provider: TokenVectors
) -> float:
    """Greedy-matching F score between two token lists under a provider."""
    if not x_tokens or not y_tokens:
        raise ValueError("bertscore_f requires non-empty token lists")
    x = provider.matrix(x_tokens)
    y = provider.matrix(y_tokens)
    sim = x @ y.T  # unit vectors: entries are cosines
    p = float(sim.max(axis=1).mean())
    r = float(sim.max(axis=0).mean())
    if abs(p + r) < 1e-12:
        return 0.0
    return 2.0 * p * r / (p + r)


def load_token_vectors(path, fallback_seed: int = 0) -> TableTokenVectors:
    """Read a vector table: first line "<vocab_size> <dim>", then one
    "<token> <f1> ... <fdim>" per line. Vectors are renormalized on load."""
    with open(path, encoding="utf-8") as f:
        head = f.readline().split()
        if len(head) != 2:
            raise ValueError("vector table header must be '<vocab_size> <dim>'")
        n, dim = int(head[0]), int(head[1])
        table: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise ValueError(f"line {lineno}: expected {dim} floats")
            vec = np.array([float(p) for p in parts[1:]], dtype=np.float64)
            norm = np.linalg.norm(vec)
            if norm == 0.0:
                raise ValueError(f"line {lineno}: zero vector")
            table[parts[0]] = vec / norm
    if len(table) != n:
        raise ValueError(f"header declared {n} entries, found {len(table)}")
    return TableTokenVectors(table, dim, fallback_seed)


def save_token_vectors(table: dict[str, np.ndarray], dim: int, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{len(table)} {dim}\n")
        for token in sorted(table):
            vals = " ".join(repr(float(v)) for v in table[token])
            f.write(f"{token} {vals}\n")
