"""Retrieval decoding: turn a predicted embedding into a sentence by
nearest-cosine search over a candidate pool."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..corpus import Sentence

__all__ = ["retrieve_sentence"]


def retrieve_sentence(
    h_hat: np.ndarray, pool: Sequence[tuple[Sentence, np.ndarray]]
) -> tuple[Sentence, float]:
    """Best (sentence, cosine) in the pool for the predicted embedding.

    Ties resolve to the earliest pool entry. Raises on an empty pool or a
    zero-norm prediction.
    """
    if not pool:
        raise ValueError("candidate pool is empty")
    h = np.asarray(h_hat, dtype=np.float64)
    hn = np.linalg.norm(h)
    if hn == 0.0:
        raise ValueError("cannot retrieve for a zero-norm prediction")
    mat = np.stack([np.asarray(e, dtype=np.float64) for _, e in pool])
    norms = np.linalg.norm(mat, axis=1)
    cos = (mat @ h) / (norms * hn)
    best = int(np.argmax(cos))  # argmax takes the first maximum: earliest id wins ties
    return pool[best][0], float(cos[best])
