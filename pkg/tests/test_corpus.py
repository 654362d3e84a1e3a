import json
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from incoforge.corpus import (
    CorpusError,
    Narrative,
    Sentence,
    load_corpus,
    save_corpus,
    segment_text,
    tokenize,
)


def collapse(s: str) -> str:
    return re.sub(r"\s+", " ", s).strip()


class TestSegmentText:
    def test_two_terminal_periods(self):
        assert segment_text("It rained. We left.") == ["It rained.", "We left."]

    def test_single_sentence(self):
        assert segment_text("Hello!") == ["Hello!"]

    def test_abbreviation_suppresses_split(self):
        # hand application of the rule: "Dr." is on the abbreviation list,
        # "arrived." is not
        assert segment_text("Dr. Lee arrived. He sat.") == ["Dr. Lee arrived.", "He sat."]

    def test_us_abbreviation(self):
        assert segment_text("He lives in the U.S. Taxes are high there.") == [
            "He lives in the U.S. Taxes are high there."
        ]

    def test_question_and_exclamation(self):
        assert segment_text("Why? Because! So there.") == ["Why?", "Because!", "So there."]

    def test_lowercase_continuation_not_split(self):
        assert segment_text("See p. 4 for details. done.") == ["See p. 4 for details. done."]

    def test_empty_input(self):
        assert segment_text("") == []
        assert segment_text("   \n  ") == []

    def test_digit_starts_sentence(self):
        assert segment_text("It cost five dollars. 3 people paid.") == [
            "It cost five dollars.",
            "3 people paid.",
        ]

    @given(st.text(max_size=200))
    @settings(max_examples=200)
    def test_totality_join_reproduces_input(self, raw):
        joined = " ".join(segment_text(raw))
        assert collapse(joined) == collapse(raw)


class TestTokenize:
    def test_simple(self):
        assert tokenize("We left.") == ["we", "left", "."]

    def test_acronym_with_hyphen(self):
        # hand application: dotted acronym stays whole, hyphen is its own token
        assert tokenize("U.S.-based") == ["u.s.", "-", "based"]

    def test_empty(self):
        assert tokenize("") == []

    def test_punctuation_split(self):
        assert tokenize("wait, what?!") == ["wait", ",", "what", "?", "!"]

    def test_lowercasing(self):
        assert tokenize("The CAT") == ["the", "cat"]

    def test_unicode_words(self):
        assert tokenize("naïve café") == ["naïve", "café"]

    @given(st.text(max_size=80))
    @settings(max_examples=200)
    def test_idempotent_on_joined_tokens(self, text):
        tokens = tokenize(text)
        assert tokenize(" ".join(tokens)) == tokens


class TestCorpusIO:
    def _write(self, path, lines):
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    def test_load_order_and_content(self, tmp_path):
        f = tmp_path / "c.jsonl"
        self._write(
            f,
            [
                json.dumps({"id": "a", "sentences": ["One two.", "Three four."]}),
                json.dumps({"id": "b", "sentences": ["Five six."]}),
            ],
        )
        loaded = list(load_corpus(f))
        assert [n.id for n in loaded] == ["a", "b"]
        assert loaded[0].sentences[0].tokens == ("one", "two", ".")

    def test_malformed_line_reports_number(self, tmp_path):
        f = tmp_path / "c.jsonl"
        self._write(
            f,
            [
                json.dumps({"id": "a", "sentences": ["Okay."]}),
                "{not json",
            ],
        )
        with pytest.raises(CorpusError, match="line 2"):
            list(load_corpus(f))

    def test_duplicate_id(self, tmp_path):
        f = tmp_path / "c.jsonl"
        rec = json.dumps({"id": "a", "sentences": ["Okay."]})
        self._write(f, [rec, rec])
        with pytest.raises(CorpusError, match="duplicate"):
            list(load_corpus(f))

    def test_empty_sentence_rejected(self, tmp_path):
        f = tmp_path / "c.jsonl"
        self._write(f, [json.dumps({"id": "a", "sentences": ["..."]})])
        # "..." tokenizes to three tokens; truly empty strings do not
        assert len(list(load_corpus(f))) == 1
        self._write(f, [json.dumps({"id": "a", "sentences": [" "]})])
        with pytest.raises(CorpusError, match="no tokens"):
            list(load_corpus(f))

    def test_round_trip_byte_identical(self, tmp_path):
        f1 = tmp_path / "c1.jsonl"
        f2 = tmp_path / "c2.jsonl"
        narratives = [
            Narrative("a", (Sentence.from_text("Hello there."),)),
            Narrative("b", (Sentence.from_text("Général café."), Sentence.from_text("Done!"))),
        ]
        save_corpus(narratives, f1)
        save_corpus(list(load_corpus(f1)), f2)
        assert f1.read_bytes() == f2.read_bytes()

    def test_tokens_are_pure_function_of_text(self, tmp_path):
        f = tmp_path / "c.jsonl"
        self._write(f, [json.dumps({"id": "a", "sentences": ["The CAT sat."]})])
        (n,) = list(load_corpus(f))
        s = n.sentences[0]
        assert list(s.tokens) == tokenize(s.text)
