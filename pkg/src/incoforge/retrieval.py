"""BM25 inverted index over all corpus sentences.

Every sentence of every narrative is one document with a deterministic
integer id (corpus order). Scores use the non-negative idf variant
    idf(t) = ln(1 + (n_docs - df + 0.5) / (df + 0.5))
and the usual tf saturation with parameters k1, b.
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from bisect import bisect_left
from dataclasses import dataclass, field
from math import log
from typing import Collection, Iterable, Sequence

from .corpus import Narrative, Sentence

__all__ = [
    "Bm25Params",
    "Bm25Index",
    "EmptyCorpusError",
    "UnknownDocumentError",
    "build_index",
    "score",
    "top_k",
    "save_index",
    "load_index",
    "file_sha256",
]


class EmptyCorpusError(ValueError):
    pass


class UnknownDocumentError(KeyError):
    pass


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")


@dataclass
class Bm25Index:
    """Immutable after build; safe for concurrent readers."""

    postings: dict[str, list[tuple[int, int]]]  # term -> [(sentence id, tf)]
    doc_len: list[int]
    avgdl: float
    n_docs: int
    provenance: list[tuple[str, int]]  # sid -> (narrative id, position)
    sentences: list[Sentence]  # sid -> sentence content
    stopwords: frozenset[str] = field(default_factory=frozenset)

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def idf(self, term: str) -> float:
        d = self.df(term)
        return log(1.0 + (self.n_docs - d + 0.5) / (d + 0.5))

    def ids_for_narrative(self, narrative_id: str) -> list[int]:
        return [
            sid for sid, (nid, _pos) in enumerate(self.provenance) if nid == narrative_id
        ]


def _index_tokens(sentence: Sentence, stopwords: frozenset[str]) -> list[str]:
    if not stopwords:
        return list(sentence.tokens)
    return [t for t in sentence.tokens if t not in stopwords]


def build_index(
    narratives: Iterable[Narrative], stopwords: Collection[str] = ()
) -> Bm25Index:
    """Index every sentence of every narrative. Raises on an empty corpus."""
    stop = frozenset(stopwords)
    postings: dict[str, list[tuple[int, int]]] = {}
    doc_len: list[int] = []
    provenance: list[tuple[str, int]] = []
    sentences: list[Sentence] = []
    sid = 0
    for narrative in narratives:
        for pos, sentence in enumerate(narrative.sentences):
            toks = _index_tokens(sentence, stop)
            tf: dict[str, int] = {}
            for t in toks:
                tf[t] = tf.get(t, 0) + 1
            for t, c in tf.items():
                postings.setdefault(t, []).append((sid, c))
            doc_len.append(len(toks))
            provenance.append((narrative.id, pos))
            sentences.append(sentence)
            sid += 1
    if sid == 0:
        raise EmptyCorpusError("cannot index an empty corpus")
    avgdl = sum(doc_len) / sid
    return Bm25Index(
        postings=postings,
        doc_len=doc_len,
        avgdl=avgdl,
        n_docs=sid,
        provenance=provenance,
        sentences=sentences,
        stopwords=stop,
    )


def _query_terms(query_tokens: Sequence[str], index: Bm25Index) -> list[str]:
    # Distinct terms in first-occurrence order; duplicates fold into one
    # contribution per term type.
    seen: set[str] = set()
    terms = []
    for t in query_tokens:
        if t in seen or t in index.stopwords:
            continue
        seen.add(t)
        terms.append(t)
    return terms


def _term_weight(index: Bm25Index, params: Bm25Params, term: str, tf: int, dl: int) -> float:
    denom = tf + params.k1 * (1.0 - params.b + params.b * dl / index.avgdl)
    return index.idf(term) * tf * (params.k1 + 1.0) / denom


def score(
    query_tokens: Sequence[str],
    doc_id: int,
    index: Bm25Index,
    params: Bm25Params = Bm25Params(),
) -> float:
    """BM25 score of one document against a token query; 0 with no overlap."""
    if not 0 <= doc_id < index.n_docs:
        raise UnknownDocumentError(doc_id)
    total = 0.0
    dl = index.doc_len[doc_id]
    for t in _query_terms(query_tokens, index):
        plist = index.postings.get(t, ())
        # postings are sorted by sentence id (built in id order)
        i = bisect_left(plist, doc_id, key=lambda e: e[0])
        if i == len(plist) or plist[i][0] != doc_id:
            continue
        total += _term_weight(index, params, t, plist[i][1], dl)
    return total


def top_k(
    query_tokens: Sequence[str],
    k: int,
    index: Bm25Index,
    params: Bm25Params = Bm25Params(),
    exclude: Collection[int] = (),
) -> list[tuple[int, float]]:
    """Rank documents sharing at least one query term, best first.

    Ties break by ascending sentence id. Documents whose token sequence
    equals the query (the query sentence itself, wherever it appears) and
    ids in `exclude` are never returned. May return fewer than k.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    excluded = set(exclude)
    query = tuple(query_tokens)
    acc: dict[int, float] = {}
    for t in _query_terms(query_tokens, index):
        for sid, tf in index.postings.get(t, ()):
            acc[sid] = acc.get(sid, 0.0) + _term_weight(
                index, params, t, tf, index.doc_len[sid]
            )
    ranked = [
        (sid, s)
        for sid, s in acc.items()
        if sid not in excluded and index.sentences[sid].tokens != query
    ]
    ranked.sort(key=lambda item: (-item[1], item[0]))
    return ranked[:k]


_MAGIC = b"INCOBM25"
_VERSION = 1


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_index(index: Bm25Index, path, corpus_hash: str = "") -> None:
    """Binary cache: magic, version, JSON header, zlib-compressed body."""
    header = {
        "n_docs": index.n_docs,
        "avgdl": index.avgdl,
        "corpus_hash": corpus_hash,
    }
    body = {
        "postings": {t: pl for t, pl in index.postings.items()},
        "doc_len": index.doc_len,
        "provenance": index.provenance,
        "sentences": [[s.text, list(s.tokens)] for s in index.sentences],
        "stopwords": sorted(index.stopwords),
    }
    header_bytes = json.dumps(header).encode("utf-8")
    body_bytes = zlib.compress(json.dumps(body).encode("utf-8"), level=6)
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", _VERSION, len(header_bytes)))
        f.write(header_bytes)
        f.write(body_bytes)


def load_index(path, corpus_hash: str | None = None) -> Bm25Index:
    """Load a cache written by save_index.

    When corpus_hash is given and differs from the stored one, raises
    ValueError so callers regenerate the index.
    """
    with open(path, "rb") as f:
        magic = f.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError("not a BM25 index cache")
        version, header_len = struct.unpack("<II", f.read(8))
        if version != _VERSION:
            raise ValueError(f"unsupported index cache version {version}")
        header = json.loads(f.read(header_len).decode("utf-8"))
        if corpus_hash is not None and header["corpus_hash"] != corpus_hash:
            raise ValueError("index cache was built from a different corpus")
        body = json.loads(zlib.decompress(f.read()).decode("utf-8"))
    return Bm25Index(
        postings={t: [tuple(p) for p in pl] for t, pl in body["postings"].items()},
        doc_len=list(body["doc_len"]),
        avgdl=header["avgdl"],
        n_docs=header["n_docs"],
        provenance=[tuple(p) for p in body["provenance"]],
        sentences=[Sentence(text, tuple(toks)) for text, toks in body["sentences"]],
        stopwords=frozenset(body["stopwords"]),
    )
