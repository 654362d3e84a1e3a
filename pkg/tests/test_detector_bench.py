import pytest

from incoforge.detector import attention_cells, bench_forward


class TestAttentionCells:
    def test_token_mode_formula(self):
        # layout [CLS] + N sentences of L tokens + N separators
        assert attention_cells("token", 8, 30) == (8 * 30 + 9) ** 2 == 62001

    def test_sentence_mode_formula(self):
        assert attention_cells("sentence", 8, 30) == 64

    @pytest.mark.parametrize("n", [2, 4, 8, 16])
    @pytest.mark.parametrize("l", [10, 20, 40])
    def test_grid_matches_closed_forms(self, n, l):
        t = n * l + n + 1
        assert attention_cells("token", n, l) == t * t
        assert attention_cells("sentence", n, l) == n * n

    def test_doubling_l_roughly_quadruples_token_cells(self):
        for n in (2, 4, 8, 16):
            for l in (20, 40):
                ratio = attention_cells("token", n, 2 * l) / attention_cells("token", n, l)
                assert 3.5 <= ratio <= 4.5
                assert attention_cells("sentence", n, 2 * l) == attention_cells(
                    "sentence", n, l
                )

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            attention_cells("paragraph", 2, 2)


class TestBenchForward:
    def test_rows_cover_grid_and_report_cells(self):
        rows = bench_forward([2, 4], [10], d_model=32, n_layers=1, n_heads=2,
                             d_ff=64, batch=2, repeats=2)
        assert len(rows) == 4  # 2 N values x 1 L value x 2 modes
        by_key = {(r["mode"], r["N"], r["L"]): r for r in rows}
        assert by_key[("token", 4, 10)]["cells_per_layer"] == (4 * 10 + 5) ** 2
        assert by_key[("sentence", 4, 10)]["cells_per_layer"] == 16
        for r in rows:
            assert r["seconds_per_paragraph"] > 0
            assert r["paragraphs_per_second"] > 0

    def test_sentence_mode_faster_at_n8_l30(self):
        rows = bench_forward([8], [30], d_model=64, batch=8, repeats=3)
        tok = next(r for r in rows if r["mode"] == "token")
        sen = next(r for r in rows if r["mode"] == "sentence")
        assert sen["paragraphs_per_second"] >= 5 * tok["paragraphs_per_second"]
