import numpy as np
import pytest

from incoforge.corpus import Narrative, Sentence


def sent(*tokens: str) -> Sentence:
    return Sentence(text=" ".join(tokens), tokens=tuple(tokens))


def narrative(nid: str, *sentences: Sentence) -> Narrative:
    return Narrative(id=nid, sentences=tuple(sentences))


@pytest.fixture
def toy_corpus():
    """Three tiny narratives with overlapping vocabulary."""
    return [
        narrative(
            "n0",
            sent("the", "cat", "sat"),
            sent("the", "cat", "slept"),
            sent("a", "dog", "barked"),
        ),
        narrative(
            "n1",
            sent("the", "dog", "sat"),
            sent("rain", "fell", "hard"),
        ),
        narrative(
            "n2",
            sent("the", "cat", "ran"),
            sent("birds", "sang", "songs"),
            sent("the", "sun", "rose"),
        ),
    ]


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))
