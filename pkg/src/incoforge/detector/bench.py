"""Forward-cost comparison of the two modes.

Attention-cell counts are exact closed forms per layer: token mode runs
over NL + N + 1 positions, so (NL + N + 1)^2 cells; sentence mode runs over
the N precomputed sentence embeddings, so N^2 cells. Wall times measure
the encoder forward only (embeddings precomputed), warmup plus median of
five repeats.
"""

from __future__ import annotations

import time
from typing import Sequence

import numpy as np

from .model import DetectorModel, TransformerConfig

__all__ = ["attention_cells", "bench_forward"]


def attention_cells(mode: str, n_sentences: int, tokens_per_sentence: int) -> int:
    """Attention matrix cells per layer for one paragraph."""
    if mode == "token":
        t = n_sentences * tokens_per_sentence + n_sentences + 1
        return t * t
    if mode == "sentence":
        return n_sentences * n_sentences
    raise ValueError(f"unknown mode {mode!r}")


def _time_forward(model: DetectorModel, x, mask, repeats: int) -> float:
    model.forward(x, mask)  # warmup
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        model.forward(x, mask)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def bench_forward(
    n_grid: Sequence[int],
    l_grid: Sequence[int],
    d_model: int = 64,
    n_layers: int = 2,
    n_heads: int = 4,
    d_ff: int = 256,
    batch: int = 8,
    repeats: int = 5,
    vocab_size: int = 1000,
    seed: int = 0,
) -> list[dict]:
    """Rows of (mode, N, L, cells per layer, seconds/paragraph, paragraphs/s)
    over the grid, same d_model in both modes."""
    rng = np.random.Generator(np.random.PCG64(seed))
    max_token_t = max(n * l + n + 1 for n in n_grid for l in l_grid)
    token_model = DetectorModel(
        TransformerConfig(
            n_layers=n_layers, n_heads=n_heads, d_model=d_model, d_ff=d_ff,
            max_positions=max_token_t, mode="token", vocab_size=vocab_size,
            d_embed=d_model,
        ),
        seed=seed,
    )
    sent_model = DetectorModel(
        TransformerConfig(
            n_layers=n_layers, n_heads=n_heads, d_model=d_model, d_ff=d_ff,
            max_positions=max(n_grid), mode="sentence", d_embed=d_model,
        ),
        seed=seed,
    )
    rows = []
    for n in n_grid:
        for l in l_grid:
            t_tok = n * l + n + 1
            ids = rng.integers(5, vocab_size, size=(batch, t_tok))
            mask_tok = np.ones((batch, t_tok))
            sec_tok = _time_forward(token_model, ids, mask_tok, repeats) / batch
            emb = rng.standard_normal((batch, n, d_model)).astype(np.float32)
            mask_sent = np.ones((batch, n))
            sec_sent = _time_forward(sent_model, emb, mask_sent, repeats) / batch
            for mode, sec in (("token", sec_tok), ("sentence", sec_sent)):
                rows.append(
                    {
                        "mode": mode,
                        "N": n,
                        "L": l,
                        "cells_per_layer": attention_cells(mode, n, l),
                        "seconds_per_paragraph": sec,
                        "paragraphs_per_second": 1.0 / sec if sec > 0 else float("inf"),
                    }
                )
    return rows
