"""Featurization: vocabulary, token-mode input layout, and batch collation.

Token mode lays an instance out as [CLS] x1 [SEP] x2 [SEP] ... xN [SEP].
The k-th [SEP] represents the slot between sentences k and k+1 (missing-
sentence task) and also sentence k (discordant task, where the final [SEP]
is sentence N's representative). Sentence mode feeds one frozen embedding
per sentence; position k predicts slot k / sentence k directly.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..corpus import Sentence
from ..embedder import EmbeddingProvider
from ..forge import DsdInstance, MsdInstance

__all__ = ["Vocab", "build_vocab", "build_token_input", "Batch", "collate", "iter_batches"]

Instance = MsdInstance | DsdInstance


@dataclass(frozen=True)
class Vocab:
    token_to_id: dict[str, int]

    PAD = 0
    CLS = 1
    SEP = 2
    MASK = 3
    UNK = 4
    SPECIALS = ("[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]")

    def __len__(self) -> int:
        return len(self.token_to_id) + len(self.SPECIALS)

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, self.UNK)

    def to_list(self) -> list[str]:
        ordered = sorted(self.token_to_id, key=self.token_to_id.get)
        return ordered

    @staticmethod
    def from_list(tokens: Sequence[str]) -> "Vocab":
        return Vocab({t: i + len(Vocab.SPECIALS) for i, t in enumerate(tokens)})


def build_vocab(instances: Sequence[Instance], min_count: int = 1) -> Vocab:
    """Frequency-sorted vocabulary over instance sentences (ties alphabetical)."""
    counts: Counter = Counter()
    for inst in instances:
        for sentence in _instance_sentences(inst):
            counts.update(sentence.tokens)
    kept = sorted(
        (t for t, c in counts.items() if c >= min_count),
        key=lambda t: (-counts[t], t),
    )
    return Vocab.from_list(kept)


def _instance_sentences(inst: Instance) -> tuple[Sentence, ...]:
    return inst.observed if isinstance(inst, MsdInstance) else inst.sentences


def build_token_input(inst: Instance, vocab: Vocab) -> tuple[np.ndarray, list[int]]:
    """Token ids in the [CLS] .. [SEP] layout plus the [SEP] positions.

    For N sentences of lengths L_k the sequence length is sum(L_k) + N + 1.
    sep_positions[k] is the representative of slot k (between sentences k
    and k+1) and of sentence k.
    """
    ids = [Vocab.CLS]
    sep_positions = []
    for sentence in _instance_sentences(inst):
        ids.extend(vocab.id_of(t) for t in sentence.tokens)
        sep_positions.append(len(ids))
        ids.append(Vocab.SEP)
    return np.asarray(ids, dtype=np.int64), sep_positions


def _labeled_positions(inst: Instance, rep_positions: list[int]):
    """(sequence position, task position, gold) triples plus SM targets.

    Task positions are slot indices for the missing-sentence task (first
    N-1 representatives) and sentence indices for the discordant task (all
    N representatives).
    """
    if isinstance(inst, MsdInstance):
        labeled = [
            (rep_positions[k], k, inst.slot_labels[k])
            for k in range(len(inst.slot_labels))
        ]
        targets = {k: v[0] for k, v in inst.gap_targets.items()}
    else:
        labeled = [(rep_positions[k], k, inst.labels[k]) for k in range(len(inst.labels))]
        targets = dict(inst.originals)
    return labeled, targets


@dataclass
class Batch:
    x: np.ndarray  # (B,T,d_embed) floats or (B,T) int ids
    mask: np.ndarray  # (B,T) 1.0 at real positions
    labels: np.ndarray  # (B,T) float gold labels
    label_mask: np.ndarray  # (B,T) 1.0 where a label exists
    sm_targets: np.ndarray  # (B,T,d_embed) unit rows where sm_mask is 1
    sm_mask: np.ndarray  # (B,T) 1.0 at corrupted positions
    meta: list  # per instance: (instance id, [(seq pos, task pos, gold), ...])

    @property
    def size(self) -> int:
        return self.x.shape[0]


def collate(
    instances: Sequence[Instance],
    provider: EmbeddingProvider,
    mode: str,
    vocab: Vocab | None = None,
    dtype=np.float32,
) -> Batch:
    """Pad a list of instances into one batch for the given model mode."""
    if mode == "token" and vocab is None:
        raise ValueError("token mode collation needs a vocab")
    rows = []
    for inst in instances:
        sentences = _instance_sentences(inst)
        if mode == "sentence":
            seq_len = len(sentences)
            rep_positions = list(range(seq_len))
            x_row = np.stack([provider.embed(s) for s in sentences])
        else:
            ids, rep_positions = build_token_input(inst, vocab)
            seq_len = len(ids)
            x_row = ids
        labeled, targets = _labeled_positions(inst, rep_positions)
        rows.append((inst, x_row, seq_len, rep_positions, labeled, targets))

    b = len(rows)
    t_max = max(r[2] for r in rows)
    d_embed = provider.dim
    if mode == "sentence":
        x = np.zeros((b, t_max, d_embed), dtype=dtype)
    else:
        x = np.zeros((b, t_max), dtype=np.int64)
    mask = np.zeros((b, t_max), dtype=dtype)
    labels = np.zeros((b, t_max), dtype=dtype)
    label_mask = np.zeros((b, t_max), dtype=dtype)
    sm_targets = np.zeros((b, t_max, d_embed), dtype=dtype)
    sm_mask = np.zeros((b, t_max), dtype=dtype)
    meta = []
    for bi, (inst, x_row, seq_len, rep_positions, labeled, targets) in enumerate(rows):
        if mode == "sentence":
            x[bi, :seq_len] = x_row
        else:
            x[bi, :seq_len] = x_row
        mask[bi, :seq_len] = 1.0
        positions_meta = []
        for seq_pos, task_pos, gold in labeled:
            labels[bi, seq_pos] = gold
            label_mask[bi, seq_pos] = 1.0
            positions_meta.append((seq_pos, task_pos, int(gold)))
            if gold and task_pos in targets:
                sm_targets[bi, seq_pos] = provider.embed(targets[task_pos])
                sm_mask[bi, seq_pos] = 1.0
        meta.append((inst.id, positions_meta))
    return Batch(x, mask, labels, label_mask, sm_targets, sm_mask, meta)


def iter_batches(
    instances: Sequence[Instance],
    batch_size: int,
    provider: EmbeddingProvider,
    mode: str,
    vocab: Vocab | None = None,
    dtype=np.float32,
    order: Sequence[int] | None = None,
):
    idx = list(range(len(instances))) if order is None else list(order)
    for start in range(0, len(idx), batch_size):
        chunk = [instances[i] for i in idx[start : start + batch_size]]
        yield collate(chunk, provider, mode, vocab, dtype)
