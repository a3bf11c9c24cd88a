"""Summaries of result CSVs: medians, paired sign tests and the gap-vs-kappa fit.

Methods are compared through per-seed pairs: a method wins a seed when its
final return is strictly larger.  Ties carry no information and are dropped,
as in the textbook sign test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class SignTest:
    wins: int
    losses: int
    ties: int
    p_value: float

    @property
    def n(self) -> int:
        return self.wins + self.losses


def sign_test(a: Sequence[float], b: Sequence[float]) -> SignTest:
    """One-sided paired sign test of ``a > b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("sign test needs paired samples of equal length")
    wins = int((a > b).sum())
    losses = int((a < b).sum())
    ties = len(a) - wins - losses
    if wins + losses == 0:
        return SignTest(0, 0, ties, 1.0)
    p = stats.binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue
    return SignTest(wins, losses, ties, float(p))


def log_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of ``log(y)`` against ``x``; requires ``y > 0``."""
    ys = np.asarray(ys, dtype=float)
    if (ys <= 0).any():
        raise ValueError("log-linear fit needs strictly positive values")
    return float(np.polyfit(np.asarray(xs, dtype=float), np.log(ys), 1)[0])


def final_rows(rows: Iterable[dict]) -> list[dict]:
    """Keep the last evaluation (largest ``m``) of every run."""
    last: dict[str, dict] = {}
    for r in rows:
        if r["run_id"] not in last or r["m"] > last[r["run_id"]]["m"]:
            last[r["run_id"]] = r
    return list(last.values())


def by_seed(rows: Iterable[dict], **match) -> dict[int, float]:
    return {r["seed"]: r["eval_J"] for r in rows if all(r.get(k) == v for k, v in match.items())}


def paired(a: dict[int, float], b: dict[int, float]) -> tuple[list[float], list[float]]:
    seeds = sorted(set(a) & set(b))
    return [a[s] for s in seeds], [b[s] for s in seeds]


def summarize_sweep(rows: Iterable[dict]) -> dict:
    """Per-kappa medians of the final return and gap, the log-gap slope and
    the kappa=1 versus kappa=0 sign test."""
    final = final_rows(rows)
    kappas = sorted({r["kappa"] for r in final})
    out = {"kappas": kappas, "median_J": {}, "median_gap": {}, "seeds": {}}
    for k in kappas:
        sel = [r for r in final if r["kappa"] == k]
        out["median_J"][k] = float(np.median([r["eval_J"] for r in sel]))
        gaps = [r["gap"] for r in sel if r["gap"] is not None]
        out["median_gap"][k] = float(np.median(gaps)) if gaps else None
        out["seeds"][k] = len(sel)
    gaps = [out["median_gap"][k] for k in kappas]
    out["slope"] = None
    if len(kappas) >= 2 and all(g is not None and g > 0 for g in gaps):
        out["slope"] = log_slope(kappas, gaps)
    out["order_test"] = None
    if 0 in kappas and 1 in kappas:
        out["order_test"] = sign_test(*paired(by_seed(final, kappa=1), by_seed(final, kappa=0)))
    return out


def summarize_wireless(rows: Iterable[dict]) -> dict:
    """Medians of SAC at each kappa and of the per-seed best ALOHA, with sign
    tests of SAC(kappa=1) against both."""
    rows = list(rows)
    aloha: dict[int, float] = {}
    for r in rows:
        if r["method"] == "aloha":
            aloha[r["seed"]] = max(aloha.get(r["seed"], -math.inf), r["eval_J"])
    sac = {k: by_seed(rows, method="sac", kappa=k) for k in sorted({r["kappa"] for r in rows if r["method"] == "sac"})}
    out = {
        "median_aloha_best": float(np.median(list(aloha.values()))) if aloha else None,
        "median_sac": {k: float(np.median(list(v.values()))) for k, v in sac.items()},
        "vs_aloha": None,
        "vs_kappa0": None,
    }
    if 1 in sac:
        out["vs_aloha"] = sign_test(*paired(sac[1], aloha))
        if 0 in sac:
            out["vs_kappa0"] = sign_test(*paired(sac[1], sac[0]))
    return out


def format_summary(summary: dict) -> str:
    lines = []
    for key, value in summary.items():
        if isinstance(value, dict):
            inner = ", ".join(f"{k}: {_short(v)}" for k, v in value.items())
            lines.append(f"{key}: {{{inner}}}")
        else:
            lines.append(f"{key}: {_short(value)}")
    return "\n".join(lines)


def _short(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, SignTest):
        return f"{v.wins}/{v.n} wins ({v.ties} ties), p={v.p_value:.4g}"
    return str(v)
