import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from incoforge.similarity import (
    HashTokenVectors,
    TableTokenVectors,
    bertscore_f,
    cosine,
    load_token_vectors,
    save_token_vectors,
)


def orthonormal_table(tokens):
    dim = len(tokens)
    table = {t: np.eye(dim)[i] for i, t in enumerate(tokens)}
    return TableTokenVectors(table, dim)


def brute_force_f(x_tokens, y_tokens, provider):
    """Oracle: enumerate all pairwise cosines, apply the P/R/F formulas."""
    sims = [[cosine(provider.vector(a), provider.vector(b)) for b in y_tokens] for a in x_tokens]
    p = sum(max(row) for row in sims) / len(x_tokens)
    r = sum(max(sims[i][j] for i in range(len(x_tokens))) for j in range(len(y_tokens))) / len(
        y_tokens
    )
    if abs(p + r) < 1e-12:
        return 0.0
    return 2 * p * r / (p + r)


class TestCosine:
    def test_identity(self):
        assert cosine(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == 1.0

    def test_orthogonal(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_45_degrees(self):
        # hand arithmetic: 1/sqrt(2)
        got = cosine(np.array([1.0, 1.0]), np.array([1.0, 0.0]))
        assert got == pytest.approx(0.7071067811865475, abs=1e-4)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            cosine(np.array([1.0, 0.0]), np.array([1.0, 0.0, 0.0]))

    def test_zero_vector(self):
        with pytest.raises(ValueError, match="zero"):
            cosine(np.zeros(3), np.ones(3))

    def test_antiparallel(self):
        assert cosine(np.array([2.0, 0.0]), np.array([-1.0, 0.0])) == -1.0


class TestProviders:
    def test_hash_vectors_unit_norm_and_deterministic(self):
        p1 = HashTokenVectors(48, seed=3)
        p2 = HashTokenVectors(48, seed=3)
        for token in ("alpha", "beta", "čaj"):
            v1, v2 = p1.vector(token), p2.vector(token)
            assert np.linalg.norm(v1) == pytest.approx(1.0, abs=1e-6)
            np.testing.assert_array_equal(v1, v2)

    def test_different_seeds_differ(self):
        assert not np.allclose(
            HashTokenVectors(16, 0).vector("tok"), HashTokenVectors(16, 1).vector("tok")
        )

    def test_table_lookup_and_fallback_counting(self):
        provider = orthonormal_table(["a", "b"])
        np.testing.assert_array_equal(provider.vector("a"), np.array([1.0, 0.0]))
        assert provider.misses == 0
        v = provider.vector("unseen")
        assert provider.misses == 1
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-6)

    def test_table_file_round_trip(self, tmp_path):
        table = {"hot": np.array([3.0, 4.0]), "cold": np.array([0.0, 2.0])}
        path = tmp_path / "vec.txt"
        save_token_vectors(table, 2, path)
        loaded = load_token_vectors(path)
        assert loaded.dim == 2
        np.testing.assert_allclose(loaded.vector("hot"), [0.6, 0.8], atol=1e-12)
        np.testing.assert_allclose(loaded.vector("cold"), [0.0, 1.0], atol=1e-12)

    def test_table_file_header_mismatch(self, tmp_path):
        path = tmp_path / "vec.txt"
        path.write_text("2 3\nonly 1.0 0.0 0.0\n")
        with pytest.raises(ValueError, match="declared 2"):
            load_token_vectors(path)


class TestBertscoreF:
    def test_identity(self):
        provider = HashTokenVectors(32, 0)
        assert bertscore_f(["a", "b", "c"], ["a", "b", "c"], provider) == pytest.approx(
            1.0, abs=1e-9
        )

    def test_disjoint_orthogonal_is_zero(self):
        provider = orthonormal_table(["a", "b", "c", "d"])
        assert bertscore_f(["a", "b"], ["c", "d"], provider) == pytest.approx(0.0, abs=1e-12)

    def test_3v2_matches_brute_force(self):
        # frozen from the enumerate-all-pairs oracle: P=1/3, R=1/2, F=0.4
        provider = orthonormal_table(["a", "b", "c", "d"])
        got = bertscore_f(["a", "b", "c"], ["a", "d"], provider)
        assert got == pytest.approx(brute_force_f(["a", "b", "c"], ["a", "d"], provider))
        assert got == pytest.approx(0.4, abs=1e-12)

    def test_empty_rejected(self):
        provider = HashTokenVectors(8, 0)
        with pytest.raises(ValueError):
            bertscore_f([], ["a"], provider)

    @given(
        st.lists(st.sampled_from("abcdefg"), min_size=1, max_size=6),
        st.lists(st.sampled_from("abcdefg"), min_size=1, max_size=6),
    )
    @settings(max_examples=100)
    def test_symmetry(self, x, y):
        provider = HashTokenVectors(24, 5)
        assert bertscore_f(x, y, provider) == pytest.approx(
            bertscore_f(y, x, provider), abs=1e-9
        )

    @given(
        st.lists(st.sampled_from("abcdefg"), min_size=1, max_size=6, unique=True),
        st.randoms(use_true_random=False),
    )
    @settings(max_examples=60)
    def test_token_order_invariance(self, x, rnd):
        provider = HashTokenVectors(24, 5)
        y = ["a", "c", "f"]
        shuffled = list(x)
        rnd.shuffle(shuffled)
        assert bertscore_f(x, y, provider) == pytest.approx(
            bertscore_f(shuffled, y, provider), abs=1e-9
        )

    @given(
        st.lists(st.sampled_from("abcde"), min_size=1, max_size=5),
        st.lists(st.sampled_from("abcde"), min_size=1, max_size=5),
        st.sampled_from("fghij"),
    )
    @settings(max_examples=60)
    def test_matches_brute_force_and_shared_token_bound(self, x, y, extra):
        provider = HashTokenVectors(24, 5)
        f_before = bertscore_f(x, y, provider)
        assert f_before == pytest.approx(brute_force_f(x, y, provider), abs=1e-9)
        # appending a shared token to both sides keeps F within the brute
        # force value (recomputed oracle), which never drops below min(P, R)
        f_after = bertscore_f(x + [extra], y + [extra], provider)
        assert f_after == pytest.approx(brute_force_f(x + [extra], y + [extra], provider), abs=1e-9)
