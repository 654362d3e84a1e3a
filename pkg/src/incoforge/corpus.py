"""Narrative corpus handling: sentence segmentation, tokenization, JSONL I/O.

A corpus is a JSONL file with one narrative per line:
    {"id": "...", "sentences": ["...", ...]}
UTF-8, LF line endings. Sentence order is significant everywhere.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator

__all__ = [
    "Sentence",
    "Narrative",
    "CorpusError",
    "segment_text",
    "tokenize",
    "load_corpus",
    "save_corpus",
]


class CorpusError(ValueError):
    """Malformed corpus input. Carries the offending 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


# Words (letter/digit runs), dotted acronyms ("u.s.", "e.g."), or single
# punctuation marks. Acronyms must come first so "U.S." stays one token.
_TOKEN_RE = re.compile(r"(?:[^\W_]\.){2,}|[^\W_]+|[^\w\s]|_", re.UNICODE)

# Abbreviations that suppress a sentence split after their trailing period.
# Stored lowercased without the final period ("u.s." -> "u.s").
_ABBREVIATIONS = frozenset(
    {
        "mr", "mrs", "ms", "dr", "prof", "rev", "hon", "st", "mt",
        "sr", "jr", "gen", "col", "lt", "capt", "sgt",
        "etc", "vs", "e.g", "i.e", "cf", "al", "fig", "vol", "p", "pp",
        "inc", "ltd", "co", "corp",
        "u.s", "u.k", "u.n", "a.m", "p.m",
    }
)

# A split candidate: sentence-final punctuation (plus optional closing
# quotes/brackets), whitespace, then an uppercase letter or digit.
_BOUNDARY_RE = re.compile(r"[.!?][\"'”’)\]]*\s+(?=[\"'“‘(\[]*[A-Z0-9])")


def tokenize(text: str) -> list[str]:
    """Split a sentence into lowercased tokens.

    Letter/digit runs form words, dotted acronyms stay whole, every other
    punctuation mark is its own token. Deterministic; empty input gives [].
    """
    return [m.group(0).lower() for m in _TOKEN_RE.finditer(text)]


def _is_abbreviation(prefix: str) -> bool:
    # prefix is everything up to and including the period that may end a
    # sentence; look at the final word before that period.
    m = re.search(r"(\S+)\.$", prefix)
    if m is None:
        return False
    word = m.group(1).lower().lstrip("\"'“‘([")
    return word.rstrip(".") in _ABBREVIATIONS


def segment_text(raw: str) -> list[str]:
    """Split running prose into sentence strings.

    Splits after . ! ? followed by whitespace and an uppercase letter or
    digit; a fixed abbreviation list ("Dr.", "U.S.", ...) suppresses splits.
    Joining the output with single spaces reproduces the input modulo
    whitespace.
    """
    if not raw.strip():
        return []
    cuts = []
    for m in _BOUNDARY_RE.finditer(raw):
        punct = raw[m.start()]
        if punct == "." and _is_abbreviation(raw[: m.start() + 1]):
            continue
        cuts.append(m.end())
    pieces = []
    start = 0
    for cut in cuts:
        piece = raw[start:cut].strip()
        if piece:
            pieces.append(piece)
        start = cut
    tail = raw[start:].strip()
    if tail:
        pieces.append(tail)
    return pieces


@dataclass(frozen=True)
class Sentence:
    """One sentence: original text plus its deterministic token list."""

    text: str
    tokens: tuple[str, ...] = field(default=())

    @staticmethod
    def from_text(text: str) -> "Sentence":
        return Sentence(text=text, tokens=tuple(tokenize(text)))

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Narrative:
    """An ordered multi-sentence text with a corpus-unique id."""

    id: str
    sentences: tuple[Sentence, ...]

    def __len__(self) -> int:
        return len(self.sentences)

    def texts(self) -> list[str]:
        return [s.text for s in self.sentences]


def _narrative_from_record(rec: dict, line: int) -> Narrative:
    if not isinstance(rec, dict):
        raise CorpusError("record is not a JSON object", line)
    nid = rec.get("id")
    sent_texts = rec.get("sentences")
    if not isinstance(nid, str) or not nid:
        raise CorpusError("missing or invalid 'id'", line)
    if not isinstance(sent_texts, list) or not sent_texts:
        raise CorpusError("missing or empty 'sentences'", line)
    sentences = []
    for i, text in enumerate(sent_texts):
        if not isinstance(text, str):
            raise CorpusError(f"sentence {i} is not a string", line)
        sent = Sentence.from_text(text)
        if not sent.tokens:
            raise CorpusError(f"sentence {i} has no tokens", line)
        sentences.append(sent)
    return Narrative(id=nid, sentences=tuple(sentences))


def load_corpus(path) -> Iterator[Narrative]:
    """Stream narratives from a JSONL corpus file in file order.

    Raises CorpusError (with the 1-based line number) on malformed lines and
    on duplicate narrative ids.
    """
    seen: set[str] = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"invalid JSON ({e.msg})", lineno) from e
            narrative = _narrative_from_record(rec, lineno)
            if narrative.id in seen:
                raise CorpusError(f"duplicate narrative id {narrative.id!r}", lineno)
            seen.add(narrative.id)
            yield narrative


def save_corpus(narratives: Iterable[Narrative], path) -> int:
    """Write narratives as canonical JSONL; returns the number written."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for narrative in narratives:
            rec = {"id": narrative.id, "sentences": narrative.texts()}
            f.write(json.dumps(rec, ensure_ascii=False))
            f.write("\n")
            n += 1
    return n
