"""Seeded synthetic narrative corpora for experiments and tests.

Each narrative carries a unique marker token repeated in every sentence
and draws its content words from a narrative-specific subset of one
topic's vocabulary, so sentences within a narrative cohere lexically.
Confounders mined from other narratives carry a foreign marker: a lexical
signal a detector can learn, without any pre-trained resources.
"""

from __future__ import annotations

import numpy as np

from .corpus import Narrative, Sentence

__all__ = ["make_synthetic_corpus", "make_synthetic_documents"]


def _topic_vocab(n_topics: int, words_per_topic: int) -> list[list[str]]:
    return [
        [f"t{t:02d}w{w:02d}" for w in range(words_per_topic)] for t in range(n_topics)
    ]


def make_synthetic_corpus(
    n_narratives: int,
    seed: int = 0,
    sentences_range: tuple[int, int] = (8, 12),
    n_topics: int = 20,
    words_per_topic: int = 12,
    narrative_vocab: int = 6,
    words_range: tuple[int, int] = (3, 4),
    marker_repeat: int = 2,
    prefix: str = "story",
) -> list[Narrative]:
    rng = np.random.Generator(np.random.PCG64(seed))
    topics = _topic_vocab(n_topics, words_per_topic)
    narratives = []
    for i in range(n_narratives):
        marker = f"mk{i:05d}"
        topic = topics[int(rng.integers(0, n_topics))]
        sub_n = min(narrative_vocab, len(topic))
        vocab = [topic[int(j)] for j in rng.choice(len(topic), sub_n, replace=False)]
        n_sent = int(rng.integers(sentences_range[0], sentences_range[1] + 1))
        sentences = []
        for _ in range(n_sent):
            n_words = int(rng.integers(words_range[0], words_range[1] + 1))
            picks = rng.choice(len(vocab), size=min(n_words, len(vocab)), replace=False)
            tokens = [marker] * marker_repeat + [vocab[int(p)] for p in picks]
            sentences.append(Sentence(text=" ".join(tokens), tokens=tuple(tokens)))
        narratives.append(Narrative(id=f"{prefix}{i:05d}", sentences=tuple(sentences)))
    return narratives


def make_synthetic_documents(
    n_docs: int,
    sentences_per_doc: int,
    seed: int = 0,
    prefix: str = "doc",
    **kwargs,
) -> list[Narrative]:
    """Long documents for pre-training-style window extraction."""
    return make_synthetic_corpus(
        n_docs,
        seed=seed,
        sentences_range=(sentences_per_doc, sentences_per_doc),
        prefix=prefix,
        **kwargs,
    )
