"""Transformer detectors for missing/discordant sentence detection.

Two operating modes share one encoder implementation: token mode runs over
a flat [CLS] tok.. [SEP] layout and reads slot/sentence representations off
the [SEP] positions; sentence mode runs over precomputed sentence
embeddings. Both feed a per-position detection head (sigmoid) and a
semantic-matching head that predicts the hidden sentence's embedding.
"""

from .model import (
    DetectorModel,
    SequenceTooLongError,
    TransformerConfig,
    detect_probs,
    forward_sentence_mode,
    sm_predict,
)
from .data import Batch, Vocab, build_token_input, build_vocab, collate, iter_batches
from .train import (
    DivergenceError,
    TrainConfig,
    load_checkpoint,
    compute_loss,
    predict,
    predict_scores,
    save_checkpoint,
    train,
)
from .gradcheck import grad_check
from .decode import retrieve_sentence
from .bench import attention_cells, bench_forward

__all__ = [
    "TransformerConfig",
    "DetectorModel",
    "SequenceTooLongError",
    "forward_sentence_mode",
    "detect_probs",
    "sm_predict",
    "Vocab",
    "build_vocab",
    "build_token_input",
    "Batch",
    "collate",
    "iter_batches",
    "TrainConfig",
    "DivergenceError",
    "compute_loss",
    "train",
    "predict",
    "predict_scores",
    "save_checkpoint",
    "load_checkpoint",
    "grad_check",
    "retrieve_sentence",
    "attention_cells",
    "bench_forward",
]
