import math

import numpy as np
import pytest

from incoforge.corpus import Narrative, Sentence
from incoforge.retrieval import (
    Bm25Params,
    EmptyCorpusError,
    UnknownDocumentError,
    build_index,
    load_index,
    save_index,
    score,
    top_k,
)
from incoforge.synth import make_synthetic_corpus

from conftest import narrative, sent


def brute_force_top_k(query_tokens, k, index, params=Bm25Params(), exclude=()):
    """Independent oracle: score every document, apply the same exclusion
    and tie rules, sort, truncate."""
    query = tuple(query_tokens)
    ranked = []
    for sid in range(index.n_docs):
        if sid in exclude or index.sentences[sid].tokens == query:
            continue
        s = score(query_tokens, sid, index, params)
        if s > 0.0:
            ranked.append((sid, s))
    ranked.sort(key=lambda item: (-item[1], item[0]))
    return ranked[:k]


class TestBuildIndex:
    def test_counts_every_sentence(self, toy_corpus):
        index = build_index(toy_corpus[:1])
        assert index.n_docs == 3

    def test_absent_term_empty_postings(self, toy_corpus):
        index = build_index(toy_corpus)
        assert index.postings.get("zebra") is None
        assert index.df("zebra") == 0

    def test_df_tf_match_hand_count(self, toy_corpus):
        # manual count over the three-narrative fixture
        index = build_index(toy_corpus)
        assert index.n_docs == 8
        assert index.df("the") == 5
        assert index.df("cat") == 3
        assert index.df("dog") == 2
        assert dict(index.postings["cat"]) == {0: 1, 1: 1, 5: 1}

    def test_avgdl_invariant(self, toy_corpus):
        index = build_index(toy_corpus)
        assert sum(index.doc_len) / index.n_docs == pytest.approx(index.avgdl, abs=1e-9)

    def test_df_equals_postings_width(self, toy_corpus):
        index = build_index(toy_corpus)
        for term, plist in index.postings.items():
            assert index.df(term) == len({sid for sid, _ in plist})

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpusError):
            build_index([])

    def test_provenance(self, toy_corpus):
        index = build_index(toy_corpus)
        assert index.provenance[0] == ("n0", 0)
        assert index.provenance[3] == ("n1", 0)
        assert index.ids_for_narrative("n1") == [3, 4]


class TestScore:
    def test_disjoint_is_zero(self, toy_corpus):
        index = build_index(toy_corpus)
        assert score(["zebra", "xylophone"], 0, index) == 0.0

    def test_single_doc_identity_matches_hand_arithmetic(self):
        # one document "the cat sat": every term has df=1, tf=1, dl=avgdl=3,
        # so each term contributes idf = ln(1 + 1.5/1.5) exactly; frozen from
        # hand evaluation of the formula
        index = build_index([narrative("n", sent("the", "cat", "sat"))])
        got = score(["the", "cat", "sat"], 0, index)
        assert got == pytest.approx(3 * math.log(4.0 / 3.0), rel=1e-12)
        assert got == pytest.approx(0.8630462173553426, rel=1e-12)

    def test_duplicate_query_terms_fold(self, toy_corpus):
        index = build_index(toy_corpus)
        assert score(["cat", "cat", "the"], 0, index) == score(["cat", "the"], 0, index)

    def test_unknown_doc(self, toy_corpus):
        index = build_index(toy_corpus)
        with pytest.raises(UnknownDocumentError):
            score(["cat"], 99, index)

    def test_nonnegative(self, toy_corpus):
        index = build_index(toy_corpus)
        for sid in range(index.n_docs):
            assert score(["the", "cat", "dog"], sid, index) >= 0.0

    def test_monotone_in_tf(self):
        # same stats except tf of the matching term
        low = build_index([narrative("n", sent("cat", "dog", "bird", "fish"))])
        high = build_index([narrative("n", sent("cat", "cat", "bird", "fish"))])
        assert score(["cat"], 0, high) > score(["cat"], 0, low)


class TestTopK:
    def test_k_larger_than_corpus(self, toy_corpus):
        index = build_index(toy_corpus)
        got = top_k(["the", "cat"], 100, index)
        oracle = brute_force_top_k(["the", "cat"], 100, index)
        assert got == oracle

    def test_query_sentence_excluded(self, toy_corpus):
        index = build_index(toy_corpus)
        # doc 0 is "the cat sat": querying exactly it must not return it
        got = top_k(["the", "cat", "sat"], 10, index)
        assert all(sid != 0 for sid, _ in got)

    def test_explicit_exclusions(self, toy_corpus):
        index = build_index(toy_corpus)
        got = top_k(["the", "cat"], 10, index, exclude={0, 1})
        assert {sid for sid, _ in got}.isdisjoint({0, 1})

    def test_five_doc_ranking_matches_oracle(self, toy_corpus):
        index = build_index(toy_corpus)
        for q in (["the", "cat"], ["dog", "sat"], ["rain"], ["the"]):
            assert top_k(q, 5, index) == brute_force_top_k(q, 5, index)

    def test_prefix_property(self, toy_corpus):
        index = build_index(toy_corpus)
        full = top_k(["the", "cat", "dog"], 8, index)
        for k in range(1, len(full) + 1):
            assert top_k(["the", "cat", "dog"], k, index) == full[:k]

    def test_tie_break_ascending_id(self):
        # two identical docs in different narratives tie exactly
        corpus = [
            narrative("a", sent("cat", "dog")),
            narrative("b", sent("cat", "dog")),
            narrative("c", sent("cat", "bird")),
        ]
        index = build_index(corpus)
        got = top_k(["cat", "fish", "dog"], 3, index)
        assert [sid for sid, _ in got] == [0, 1, 2]

    def test_matches_brute_force_on_1000_sentences(self):
        corpus = make_synthetic_corpus(115, seed=5)
        index = build_index(corpus)
        assert index.n_docs >= 1000
        rng = np.random.Generator(np.random.PCG64(17))
        picks = rng.choice(index.n_docs, size=50, replace=False)
        for sid in picks:
            q = list(index.sentences[int(sid)].tokens)
            assert top_k(q, 100, index) == brute_force_top_k(q, 100, index)


class TestCache:
    def test_round_trip(self, toy_corpus, tmp_path):
        index = build_index(toy_corpus)
        path = tmp_path / "idx.bin"
        save_index(index, path, corpus_hash="abc123")
        loaded = load_index(path, corpus_hash="abc123")
        assert loaded.n_docs == index.n_docs
        assert loaded.avgdl == index.avgdl
        assert loaded.postings == index.postings
        assert loaded.provenance == index.provenance
        assert [s.tokens for s in loaded.sentences] == [s.tokens for s in index.sentences]
        q = ["the", "cat"]
        assert top_k(q, 5, loaded) == top_k(q, 5, index)

    def test_hash_mismatch_rejected(self, toy_corpus, tmp_path):
        index = build_index(toy_corpus)
        path = tmp_path / "idx.bin"
        save_index(index, path, corpus_hash="abc123")
        with pytest.raises(ValueError, match="different corpus"):
            load_index(path, corpus_hash="other")

    def test_garbage_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not an index at all")
        with pytest.raises(ValueError, match="not a BM25"):
            load_index(path)


class TestStopwords:
    def test_stopwords_removed_from_postings(self, toy_corpus):
        index = build_index(toy_corpus, stopwords={"the", "a"})
        assert "the" not in index.postings
        assert index.doc_len[0] == 2  # "the cat sat" minus "the"

    def test_stopword_query_terms_ignored(self, toy_corpus):
        index = build_index(toy_corpus, stopwords={"the"})
        assert score(["the"], 0, index) == 0.0
