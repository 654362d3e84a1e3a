from math import exp, log, log2

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from incoforge.evalkit import (
    DegenerateClassError,
    auc,
    bleu,
    classification_report,
    dist_n,
    entropy_n,
    format_report,
    generation_report,
    mean_length,
    meteor_lite,
    nist,
    roc_points,
    trapezoid_auc,
)
from incoforge.porter import stem


def brute_force_auc(preds):
    """O(n^2) oracle: fraction of (pos, neg) pairs ranked correctly,
    ties counting one half."""
    pos = [s for s, g in preds if g == 1]
    neg = [s for s, g in preds if g == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def random_preds(rng, n=60, tie_prone=False):
    scores = rng.integers(0, 7, size=n) / 6.0 if tie_prone else rng.random(n)
    golds = (rng.random(n) < 0.4).astype(int)
    if golds.sum() == 0:
        golds[0] = 1
    if golds.sum() == n:
        golds[0] = 0
    return list(zip(scores.tolist(), golds.tolist()))


class TestClassificationReport:
    def test_all_correct(self):
        preds = [(0.9, 1), (0.8, 1), (0.1, 0), (0.2, 0)]
        rep = classification_report(preds)
        assert rep["accuracy"] == rep["precision"] == rep["recall"] == rep["f1"] == 1.0

    def test_all_negative_predictions(self):
        rep = classification_report([(0.1, 1), (0.2, 0), (0.3, 0)])
        assert rep["recall"] == 0.0 and rep["f1"] == 0.0
        assert "precision" in rep["degenerate"]

    def test_hand_counts(self):
        # TP=3 FP=1 FN=2 TN=4 -> P=0.75 R=0.6 F1=2/3 Acc=0.7
        preds = (
            [(0.9, 1)] * 3 + [(0.9, 0)] * 1 + [(0.1, 1)] * 2 + [(0.1, 0)] * 4
        )
        rep = classification_report(preds, threshold=0.5)
        assert rep["tp"], rep["fp"] == (3, 1)
        assert rep["precision"] == pytest.approx(0.75)
        assert rep["recall"] == pytest.approx(0.6)
        assert rep["f1"] == pytest.approx(2 / 3)
        assert rep["accuracy"] == pytest.approx(0.7)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            classification_report([])

    def test_raising_threshold_never_increases_recall(self):
        rng = np.random.Generator(np.random.PCG64(3))
        preds = random_preds(rng, 200)
        last = 1.0
        for t in np.linspace(0, 1, 21):
            r = classification_report(preds, threshold=t)["recall"]
            assert r <= last + 1e-12
            last = r


class TestAuc:
    def test_perfectly_separated(self):
        value, _ = auc([(0.9, 1), (0.8, 1), (0.3, 0), (0.1, 0)])
        assert value == 1.0

    def test_all_ties(self):
        value, points = auc([(0.5, 1), (0.5, 0), (0.5, 1), (0.5, 0)])
        assert value == 0.5
        assert points == [(0.0, 0.0), (1.0, 1.0)]

    def test_degenerate_rejected(self):
        with pytest.raises(DegenerateClassError):
            auc([(0.5, 1), (0.6, 1)])

    def test_rank_statistic_matches_pair_count_oracle(self):
        rng = np.random.Generator(np.random.PCG64(7))
        for tie_prone in (False, True):
            preds = random_preds(rng, 200, tie_prone)
            value, _ = auc(preds)
            assert value == pytest.approx(brute_force_auc(preds), abs=1e-12)

    def test_trapezoid_equals_rank_statistic(self):
        rng = np.random.Generator(np.random.PCG64(8))
        for _ in range(100):
            preds = random_preds(rng, int(rng.integers(5, 120)), bool(rng.integers(2)))
            value, points = auc(preds)
            assert trapezoid_auc(points) == pytest.approx(value, abs=1e-9)

    def test_roc_endpoints(self):
        rng = np.random.Generator(np.random.PCG64(9))
        points = roc_points(random_preds(rng, 50))
        assert points[0] == (0.0, 0.0)
        assert points[-1] == (1.0, 1.0)


class TestBleu:
    def test_identity_is_100(self):
        hyps = [["the", "cat"], ["a", "dog", "ran"]]
        assert bleu(hyps, hyps, max_n=2) == pytest.approx(100.0)

    def test_no_overlap_is_0(self):
        assert bleu([["aa", "bb"]], [["cc", "dd"]], max_n=2) == 0.0

    def test_hand_computed_brevity_case(self):
        # hyp "the cat sat" vs ref "the cat sat down", max_n=2:
        # p1=1, p2=1, BP=e^(1-4/3); frozen from hand arithmetic
        got = bleu([["the", "cat", "sat"]], [["the", "cat", "sat", "down"]], max_n=2)
        assert got == pytest.approx(100.0 * exp(1.0 - 4.0 / 3.0), rel=1e-12)
        assert got == pytest.approx(71.65313105737893, rel=1e-9)

    def test_clipping(self):
        # "the the the" vs "the cat": unigram matches clip at ref count 1
        got = bleu([["the", "the", "the"]], [["the", "cat"]], max_n=1)
        # p1 = 1/3, BP = 1 (c=3 > r=2)
        assert got == pytest.approx(100.0 / 3.0, rel=1e-12)

    def test_zero_higher_order_kills_score_without_smoothing(self):
        assert bleu([["a", "c"]], [["a", "b"]], max_n=2) == 0.0

    def test_smoothing_keeps_nonzero(self):
        assert bleu([["a", "c"]], [["a", "b"]], max_n=2, smooth=True) > 0.0

    def test_corpus_pair_order_invariance(self):
        h = [["a", "b"], ["c", "d", "e"], ["f"]]
        r = [["a", "x"], ["c", "d"], ["f", "g"]]
        assert bleu(h, r, 2) == pytest.approx(bleu(h[::-1], r[::-1], 2), abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            bleu([["a"]], [])


class TestNist:
    def test_identity_distinct_tokens(self):
        # frozen from hand arithmetic: order-1 info = log2(3) per token,
        # order-2 infos are 0 (unique bigrams over unigram counts of 1)
        got = nist([["a", "b", "c"]], [["a", "b", "c"]], max_n=2)
        assert got == pytest.approx(log2(3.0), rel=1e-12)
        assert got == pytest.approx(1.584962500721156, rel=1e-9)

    def test_no_overlap_is_0(self):
        assert nist([["x", "y"]], [["a", "b"]], max_n=2) == 0.0

    def test_appended_irrelevant_token_lowers_score(self):
        base = nist([["a", "b", "c"]], [["a", "b", "c"]], max_n=2)
        padded = nist([["a", "b", "c", "z"]], [["a", "b", "c"]], max_n=2)
        # frozen recomputed oracle: (3*log2(3))/4 + 0, brevity 1 since c > r
        assert padded == pytest.approx(3 * log2(3.0) / 4, rel=1e-12)
        assert padded == pytest.approx(1.188721875540867, rel=1e-9)
        assert padded < base

    def test_brevity_factor_half_at_two_thirds(self):
        # c/r = 2/3 must scale by exactly 0.5; build it with zero info so the
        # ratio is isolated: use repeated-token ref so info = log2(2/2) = ...
        # simpler: verify via the closed form on a real pair
        hyps = [["a", "b"]]
        refs = [["a", "b", "c"]]
        got = nist(hyps, refs, max_n=1)
        # matched info: Info(a) + Info(b) = 2 * log2(3); denominator 2
        assert got == pytest.approx(log2(3.0) * 0.5, rel=1e-12)

    def test_pair_order_invariance(self):
        h = [["a", "b"], ["c", "d", "e"]]
        r = [["a", "x"], ["c", "d"]]
        assert nist(h, r, 2) == pytest.approx(nist(h[::-1], r[::-1], 2), abs=1e-12)


class TestMeteorLite:
    def test_identity_closed_form(self):
        # m tokens, one chunk: 1 - 0.5 * (1/m)^3; m=4 -> 0.9921875
        got = meteor_lite(["w1", "w2", "w3", "w4"], ["w1", "w2", "w3", "w4"])
        assert got == pytest.approx(0.9921875, abs=1e-12)

    def test_zero_matches(self):
        assert meteor_lite(["aa"], ["bb"]) == 0.0

    def test_stem_stage_matches(self):
        # Porter oracle: stem("cats") == stem("cat")
        assert stem("cats") == stem("cat")
        # single match, P=R=1, chunks=1 -> 1 - 0.5 = 0.5
        assert meteor_lite(["cats"], ["cat"]) == pytest.approx(0.5)

    def test_chunk_penalty_hand_case(self):
        # frozen from hand arithmetic: 3 matches, 2 chunks -> 23/36
        got = meteor_lite(["the", "cat", "sat", "down"], ["the", "cat", "lay", "down"])
        assert got == pytest.approx(23.0 / 36.0, rel=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            meteor_lite([], ["a"])


class TestDiversity:
    def test_entropy_point_mass(self):
        assert entropy_n([["a", "b", "c", "d"]], 4) == 0.0

    def test_entropy_two_equiprobable(self):
        # "a b c d" and "e f g h": two distinct 4-grams, once each
        got = entropy_n([["a", "b", "c", "d"], ["e", "f", "g", "h"]], 4)
        assert got == pytest.approx(log(2.0), abs=1e-12)

    def test_entropy_mixed_matches_enumeration_oracle(self):
        hyps = [["a", "b", "c", "d", "e"], ["a", "b", "c", "d"]]
        # oracle: counts {abcd: 2, bcde: 1}, T=3
        expected = -(2 / 3 * log(2 / 3) + 1 / 3 * log(1 / 3))
        assert entropy_n(hyps, 4) == pytest.approx(expected, abs=1e-12)
        assert entropy_n(hyps, 4) == pytest.approx(0.6365141682948128, abs=1e-9)

    def test_entropy_no_ngrams_warns_zero(self):
        assert entropy_n([["a"]], 4) == 0.0

    def test_dist1_hand(self):
        assert dist_n([["a", "a", "b"]], 1) == pytest.approx(2.0 / 3.0)

    def test_dist_all_distinct(self):
        assert dist_n([["a", "b", "c"]], 1) == 1.0

    def test_dist_pooled_two_documents(self):
        # hand count: bigrams ab, bc | ab -> 2 distinct of 3 total
        assert dist_n([["a", "b", "c"], ["a", "b"]], 2) == pytest.approx(2.0 / 3.0)

    @given(st.lists(st.lists(st.sampled_from("abc"), min_size=1, max_size=6), min_size=1, max_size=5))
    @settings(max_examples=100)
    def test_bounds(self, hyps):
        d = dist_n(hyps, 2)
        e = entropy_n(hyps, 2)
        assert 0.0 <= d <= 1.0
        distinct = len({tuple(h[i : i + 2]) for h in hyps for i in range(len(h) - 1)})
        assert e <= log(distinct) + 1e-12 if distinct else e == 0.0


class TestLengthAndReport:
    def test_mean_length(self):
        assert mean_length([["a"] * 9, ["b"] * 11]) == 10.0

    def test_single(self):
        assert mean_length([["a", "b", "c"]]) == 3.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mean_length([])

    def test_generation_report_keys(self):
        hyps = [["the", "cat", "sat", "down", "now"]]
        rep = generation_report(hyps, hyps)
        assert rep["bleu_4"] == pytest.approx(100.0)
        assert rep["bleu_2"] == pytest.approx(100.0)
        assert rep["mean_length"] == 5.0
        assert set(rep) == {
            "nist_2", "nist_4", "bleu_2", "bleu_4", "meteor_lite",
            "entropy_4", "dist_1", "dist_2", "mean_length",
        }

    def test_format_report_aligned(self):
        text = format_report({"alpha": 1.0, "beta_longer": 0.5}, "t")
        lines = text.splitlines()
        assert lines[0] == "== t =="
        assert lines[1].startswith("alpha ")


class TestPerPosition:
    def test_breakdown_by_position(self):
        from incoforge.evalkit import per_position_auc

        records = []
        for i in range(30):
            # position 0 perfectly separated, position 1 always tied
            records.append({"instance": f"i{i}", "position": 0,
                            "score": 0.9 if i % 2 else 0.1, "gold": 1 if i % 2 else 0})
            records.append({"instance": f"i{i}", "position": 1,
                            "score": 0.5, "gold": 1 if i % 3 == 0 else 0})
        out = per_position_auc(records)
        assert out[0]["auc"] == 1.0
        assert out[1]["auc"] == 0.5
        assert out[0]["n"] == out[1]["n"] == 30

    def test_degenerate_position_is_nan(self):
        import math

        from incoforge.evalkit import per_position_auc

        records = [{"instance": "a", "position": 0, "score": 0.5, "gold": 1}]
        assert math.isnan(per_position_auc(records)[0]["auc"])
