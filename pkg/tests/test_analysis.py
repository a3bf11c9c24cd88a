from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from netsac import analysis


def test_sign_test_counts_and_p_value():
    res = analysis.sign_test([2, 3, 4, 1, 5], [1, 1, 1, 1, 6])
    assert (res.wins, res.losses, res.ties, res.n) == (3, 1, 1, 4)
    # P(Bin(4, 1/2) >= 3) = 5/16
    assert res.p_value == pytest.approx(5 / 16)


@pytest.mark.parametrize("wins,p", [(10, 1 / 1024), (9, 11 / 1024), (8, 56 / 1024)])
def test_sign_test_ten_pairs(wins, p):
    a = [1.0] * wins + [0.0] * (10 - wins)
    b = [0.5] * 10
    assert analysis.sign_test(a, b).p_value == pytest.approx(p)


def test_sign_test_all_ties():
    res = analysis.sign_test([1, 2], [1, 2])
    assert res.n == 0 and res.p_value == 1.0


def test_sign_test_rejects_unpaired():
    with pytest.raises(ValueError):
        analysis.sign_test([1, 2], [1])


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=20), st.lists(st.floats(-5, 5), min_size=1, max_size=20))
def test_sign_test_swapping_exchanges_wins(a, b):
    k = min(len(a), len(b))
    fwd = analysis.sign_test(a[:k], b[:k])
    rev = analysis.sign_test(b[:k], a[:k])
    assert (fwd.wins, fwd.losses, fwd.ties) == (rev.losses, rev.wins, rev.ties)
    assert 0.0 <= fwd.p_value <= 1.0


@given(st.floats(-2, 2), st.floats(0.1, 10))
def test_log_slope_recovers_exponential_rate(rate, scale):
    xs = np.arange(5)
    assert analysis.log_slope(xs, scale * np.exp(rate * xs)) == pytest.approx(rate, abs=1e-9)


def test_log_slope_rejects_nonpositive():
    with pytest.raises(ValueError):
        analysis.log_slope([0, 1], [1.0, 0.0])


def _sweep_rows():
    rows = []
    gaps = {0: 0.1, 1: 0.05, 2: 0.025}
    for k, g in gaps.items():
        for s in range(3):
            j = 0.5 - g + 0.001 * s
            rows.append({"run_id": f"x-k{k}-s{s}", "kappa": k, "seed": s, "m": 10, "eval_J": j, "gap": 0.5 - j})
            rows.append({"run_id": f"x-k{k}-s{s}", "kappa": k, "seed": s, "m": 5, "eval_J": 0.0, "gap": 0.5})
    return rows


def test_final_rows_keep_largest_iteration():
    final = analysis.final_rows(_sweep_rows())
    assert len(final) == 9 and all(r["m"] == 10 for r in final)


def test_summarize_sweep():
    out = analysis.summarize_sweep(_sweep_rows())
    assert out["kappas"] == [0, 1, 2]
    assert out["median_J"][1] == pytest.approx(0.451)
    assert out["median_gap"][0] == pytest.approx(0.099)
    assert out["seeds"] == {0: 3, 1: 3, 2: 3}
    assert out["slope"] < 0
    t = out["order_test"]
    assert (t.wins, t.losses) == (3, 0) and t.p_value == pytest.approx(1 / 8)


def test_summarize_wireless_uses_per_seed_best_aloha():
    rows = []
    for s in range(2):
        for p, j in [(0.1, 0.2 + s), (0.9, 0.4 + s)]:
            rows.append({"run_id": f"a{p}-{s}", "method": "aloha", "kappa": None, "seed": s, "eval_J": j})
        rows.append({"run_id": f"k0-{s}", "method": "sac", "kappa": 0, "seed": s, "eval_J": 0.3 + s})
        rows.append({"run_id": f"k1-{s}", "method": "sac", "kappa": 1, "seed": s, "eval_J": 0.5 + s})
    out = analysis.summarize_wireless(rows)
    assert out["median_aloha_best"] == pytest.approx(0.9)
    assert out["median_sac"] == {0: pytest.approx(0.8), 1: pytest.approx(1.0)}
    assert out["vs_aloha"].wins == 2 and out["vs_kappa0"].wins == 2


def test_format_summary_lines():
    text = analysis.format_summary({"a": 1.0 / 3, "b": {0: None}, "c": analysis.SignTest(9, 1, 0, 11 / 1024)})
    lines = text.splitlines()
    assert lines[0] == "a: 0.333333"
    assert lines[1] == "b: {0: None}"
    assert lines[2].startswith("c: 9/10 wins (0 ties), p=0.01074")
    assert not math.isnan(float(lines[2].split("p=")[1]))
