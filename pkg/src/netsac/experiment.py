"""Experiment configuration, policy evaluation and result emission.

A run is described by one JSON document (see ``configs/``).  Every
``(kappa, seed)`` cell draws its randomness from its own lineage:

* environment instance: ``(master_seed, seed)``
* training: ``(master_seed, seed, 1, kappa)``
* evaluation: ``(master_seed, seed, 2, m)``

so cells can be computed in any order, or in parallel, and still produce the
same numbers.  Result CSVs contain only deterministic columns; timing goes
to the JSON sidecar.
"""

from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import json
import math
import os
import time
from dataclasses import dataclass, field
from importlib import metadata as importlib_metadata
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np

from . import oracle
from . import rng as rngmod
from .envs.line import line_env
from .envs.sis import sis_env
from .envs.traffic import TrafficEnv
from .envs.wireless import WirelessGridEnv, aloha_policy
from .graph import Graph, read_edge_list
from .mdp import NetworkedMdp, simulate
from .policy import LocalizedPolicyTable
from .sac import ActorSchedule, CriticSchedule, train, write_metrics_csv

SCHEMA = "netsac-results/1"
SWEEP_COLUMNS = ["run_id", "env", "kappa", "seed", "m", "eval_J", "eval_se", "gap"]
WIRELESS_COLUMNS = ["run_id", "env", "method", "kappa", "send_prob", "seed", "m", "eval_J", "eval_se", "gap"]

TRAIN_TAG = 1
EVAL_TAG = 2


class ConfigError(ValueError):
    """Invalid or unparseable experiment configuration."""


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class EnvSpec:
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EvaluationSpec:
    method: str = "monte_carlo"  # or "exact"
    episodes: int = 1000
    tail_tol: float = 1e-4
    every: int = 0  # periodic evaluation interval in outer iterations; 0 = final only


@dataclass(frozen=True)
class AssumptionEstimates:
    """User-supplied guesses for quantities the algorithm cannot observe."""

    sigma: Optional[float] = None
    tau: Optional[int] = None
    L_prime: Optional[float] = None
    delta: float = 0.1


@dataclass(frozen=True)
class BaselineSpec:
    send_probs: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass(frozen=True)
class DecaySpec:
    kappa_max: int = 3
    policy: str = "uniform"  # or "random"
    logit_scale: float = 1.0


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "results"
    csv: str = "results.csv"
    sidecar: str = "results.json"
    save_policies: bool = True
    metrics: bool = False  # per-iteration metrics CSVs; they carry wall-clock times


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    environment: EnvSpec
    gamma: float
    kappas: tuple[int, ...]
    seeds: tuple[int, ...]
    critic: CriticSchedule
    actor: ActorSchedule
    evaluation: EvaluationSpec = EvaluationSpec()
    master_seed: int = 0
    assumptions: AssumptionEstimates = AssumptionEstimates()
    baseline: BaselineSpec = BaselineSpec()
    decay: DecaySpec = DecaySpec()
    output: OutputSpec = OutputSpec()

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))


_NESTED = {
    "environment": EnvSpec,
    "critic": CriticSchedule,
    "actor": ActorSchedule,
    "evaluation": EvaluationSpec,
    "assumptions": AssumptionEstimates,
    "baseline": BaselineSpec,
    "decay": DecaySpec,
    "output": OutputSpec,
}


def _build(cls, doc: Any, where: str):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}")
    kwargs = {}
    for key, value in doc.items():
        if cls is ExperimentConfig and key in _NESTED:
            value = _build(_NESTED[key], value, f"{where}.{key}")
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config(doc: dict) -> ExperimentConfig:
    doc = dict(doc)
    if isinstance(doc.get("seeds"), int):
        doc["seeds"] = list(range(doc["seeds"]))
    cfg = _build(ExperimentConfig, doc, "config")
    if not 0.0 < float(cfg.gamma) < 1.0:
        raise ConfigError(f"gamma must lie in (0, 1), got {cfg.gamma}")
    if not cfg.kappas or any(int(k) != k or k < 0 for k in cfg.kappas):
        raise ConfigError(f"kappas must be non-negative integers, got {cfg.kappas}")
    if not cfg.seeds or any(int(s) != s or s < 0 for s in cfg.seeds):
        raise ConfigError(f"seeds must be non-negative integers, got {cfg.seeds}")
    if int(cfg.master_seed) != cfg.master_seed or cfg.master_seed < 0:
        raise ConfigError("master_seed must be a non-negative integer")
    ev = cfg.evaluation
    if ev.method not in ("exact", "monte_carlo"):
        raise ConfigError(f"evaluation.method must be 'exact' or 'monte_carlo', got {ev.method!r}")
    if ev.episodes < 1 or not 0 < ev.tail_tol < 1 or ev.every < 0:
        raise ConfigError("evaluation needs episodes >= 1, tail_tol in (0, 1) and every >= 0")
    if cfg.decay.policy not in ("uniform", "random"):
        raise ConfigError(f"decay.policy must be 'uniform' or 'random', got {cfg.decay.policy!r}")
    if any(not 0 < p < 1 for p in cfg.baseline.send_probs):
        raise ConfigError("baseline send probabilities must lie in (0, 1)")
    if cfg.environment.name not in ENVIRONMENTS:
        raise ConfigError(f"unknown environment {cfg.environment.name!r}; choose from {sorted(ENVIRONMENTS)}")
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(doc)


# ---------------------------------------------------------------------------
# environments


def _graph_from(params: dict) -> Graph:
    kind = params.get("graph", "line")
    if kind == "line":
        return Graph.line(int(params["n"]))
    if kind == "ring":
        return Graph.ring(int(params["n"]))
    if kind == "edges":
        return Graph(int(params["n"]), [tuple(e) for e in params["edges"]])
    if kind == "file":
        return read_edge_list(params["path"])
    raise ConfigError(f"unknown graph kind {kind!r}")


def _check_params(name: str, params: dict, allowed: Iterable[str]) -> None:
    unknown = sorted(set(params) - set(allowed))
    if unknown:
        raise ConfigError(f"environment {name!r}: unknown parameter(s) {unknown}")


def _line(params, gamma, seed):
    _check_params("line", params, ["n"])
    return line_env(int(params.get("n", 8)), gamma)


def _wireless(params, gamma, seed):
    _check_params("wireless", params, ["rows", "cols", "deadline", "random_placement"])
    env = WirelessGridEnv.create(
        int(params.get("rows", 3)),
        int(params.get("cols", 3)),
        gamma,
        seed,
        int(params.get("deadline", 2)),
        bool(params.get("random_placement", False)),
    )
    mdp = env.build()
    mdp.metadata["env"] = env
    return mdp


def _sis(params, gamma, seed):
    _check_params("sis", params, ["graph", "n", "edges", "path", "delta", "beta", "cost", "init_infected"])
    return sis_env(
        _graph_from(params),
        gamma,
        params.get("delta", 0.3),
        params.get("beta", [0.6, 0.2]),
        params.get("cost", [0.0, 0.3]),
        params.get("init_infected", 0.5),
    )


def _traffic(params, gamma, seed):
    _check_params("traffic", params, ["n_links", "capacity", "capacity_probs"])
    env = TrafficEnv.ring(int(params.get("n_links", 3)), int(params.get("capacity", 2)), params.get("capacity_probs", [0.2, 0.5, 0.3]), gamma)
    return env.build()


ENVIRONMENTS: dict[str, Callable[[dict, float, rngmod.SeedKey], NetworkedMdp]] = {
    "line": _line,
    "wireless": _wireless,
    "sis": _sis,
    "traffic": _traffic,
}


def build_environment(cfg: ExperimentConfig, seed: int) -> NetworkedMdp:
    spec = cfg.environment
    try:
        return ENVIRONMENTS[spec.name](dict(spec.params), float(cfg.gamma), (int(cfg.master_seed), int(seed)))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"environment {spec.name!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float
    horizon: int


def evaluation_horizon(gamma: float, reward_bound: float, tail_tol: float) -> int:
    """Smallest ``T_eval`` whose discounted tail beyond it is at most ``tail_tol``."""
    if reward_bound <= 0:
        return 0
    return max(0, math.ceil(math.log(tail_tol * (1 - gamma) / reward_bound) / math.log(gamma)))


def evaluate_policy(
    mdp: NetworkedMdp, policy: LocalizedPolicyTable, episodes: int, gamma: float, tail_tol: float, seed: rngmod.SeedKey
) -> Estimate:
    """Monte-Carlo estimate of ``J`` from ``episodes`` rollouts of ``T_eval + 1`` steps."""
    if episodes < 1:
        raise ValueError("episodes must be at least 1")
    horizon = evaluation_horizon(gamma, mdp.reward_bound, tail_tol)
    _, _, R = simulate(mdp, policy, episodes, horizon + 1, seed)
    disc = gamma ** np.arange(horizon + 1)
    returns = R.mean(axis=2) @ disc
    spread = episodes > 1 and returns.max() > returns.min()
    se = float(returns.std(ddof=1) / math.sqrt(episodes)) if spread else 0.0
    return Estimate(float(returns.mean()), se, horizon)


def evaluate(cfg: ExperimentConfig, mdp: NetworkedMdp, policy: LocalizedPolicyTable, seed: rngmod.SeedKey) -> Estimate:
    ev = cfg.evaluation
    if ev.method == "exact":
        return Estimate(oracle.exact_value(mdp, policy), 0.0, -1)
    return evaluate_policy(mdp, policy, ev.episodes, mdp.gamma, ev.tail_tol, seed)


# ---------------------------------------------------------------------------
# results


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


class ResultWriter:
    """Append-only CSV sink: a schema comment, a header, then flushed rows."""

    def __init__(self, path: str | Path, columns: Sequence[str]):
        self.path = Path(path)
        self.columns = list(columns)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", newline="") as fh:
            fh.write(f"# schema: {SCHEMA}\n")
            csv.writer(fh, lineterminator="\n").writerow(self.columns)

    def write(self, rows: Iterable[dict]) -> None:
        with open(self.path, "a", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in rows:
                w.writerow([_fmt(row.get(c)) for c in self.columns])
            fh.flush()
            os.fsync(fh.fileno())


def read_results(path: str | Path) -> list[dict]:
    """Parse a results CSV written by :class:`ResultWriter`."""
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if first != f"# schema: {SCHEMA}":
            raise ValueError(f"{path}: missing or unsupported schema line {first!r}")
        rows = []
        for row in csv.DictReader(fh):
            out = {}
            for k, v in row.items():
                if k in ("kappa", "seed", "m"):
                    out[k] = int(v) if v != "" else None
                elif k in ("eval_J", "eval_se", "gap", "send_prob"):
                    out[k] = float(v) if v != "" else None
                else:
                    out[k] = v
            rows.append(out)
    return rows


def code_version() -> str:
    try:
        return importlib_metadata.version("artifact")
    except importlib_metadata.PackageNotFoundError:
        return "unknown"


def _write_sidecar(cfg: ExperimentConfig, out_dir: Path, cells: list[dict], started: float) -> Path:
    path = out_dir / cfg.output.sidecar
    doc = {
        "schema": SCHEMA,
        "config": cfg.to_dict(),
        "code_version": code_version(),
        "wall_ms_total": 1000.0 * (time.time() - started),
        "cells": cells,
    }
    path.write_text(json.dumps(doc, indent=1))
    return path


# ---------------------------------------------------------------------------
# kappa sweep


def train_seed(cfg: ExperimentConfig, kappa: int, seed: int) -> tuple[int, ...]:
    return (int(cfg.master_seed), int(seed), TRAIN_TAG, int(kappa))


def eval_seed(cfg: ExperimentConfig, seed: int, m: int) -> tuple[int, ...]:
    return (int(cfg.master_seed), int(seed), EVAL_TAG, int(m))


def run_cell(cfg: ExperimentConfig, kappa: int, seed: int, out_dir: str | None = None) -> dict:
    """Train one ``(kappa, seed)`` cell and evaluate it; returns rows and timing."""
    start = time.perf_counter()
    mdp = build_environment(cfg, seed)
    rows = []
    name = cfg.environment.name
    run_id = f"{cfg.name}-k{kappa}-s{seed}"
    opt = mdp.optimal_value

    def record(m: int, est: Estimate) -> None:
        gap = None if opt is None else opt - est.mean
        rows.append({"run_id": run_id, "env": name, "kappa": kappa, "seed": seed, "m": m, "eval_J": est.mean, "eval_se": est.se, "gap": gap})

    M = cfg.actor.M
    every = cfg.evaluation.every or max(M, 1)
    values: dict[int, float] = {}

    def checkpoint(metrics, policy: LocalizedPolicyTable) -> None:
        done = metrics.m + 1
        if done % every == 0 or done == M:
            est = evaluate(cfg, mdp, policy, eval_seed(cfg, seed, done))
            values[metrics.m] = est.mean
            record(done, est)

    result = train(mdp, kappa, cfg.critic, cfg.actor, train_seed(cfg, kappa, seed), callbacks=[checkpoint])
    if M == 0:
        record(0, evaluate(cfg, mdp, result.policy, eval_seed(cfg, seed, 0)))
    if out_dir is not None and cfg.output.save_policies:
        pdir = Path(out_dir) / "policies"
        pdir.mkdir(parents=True, exist_ok=True)
        result.policy.save(pdir / f"{run_id}.json")
    if out_dir is not None and cfg.output.metrics:
        mdir = Path(out_dir) / "metrics"
        mdir.mkdir(parents=True, exist_ok=True)
        history = [dataclasses.replace(h, eval_J=values.get(h.m, math.nan)) for h in result.history]
        write_metrics_csv(mdir / f"{run_id}.csv", history)
    return {"run_id": run_id, "kappa": kappa, "seed": seed, "rows": rows, "wall_ms": 1000.0 * (time.perf_counter() - start)}


def _cell_job(args):
    cfg_dict, kappa, seed, out_dir = args
    return run_cell(parse_config(cfg_dict), kappa, seed, out_dir)


def _ordered_run(jobs: list, fn, parallel: int, sink: Callable[[Any], None]) -> None:
    """Run ``jobs`` and feed results to ``sink`` in job order."""
    if parallel <= 1:
        for job in jobs:
            sink(fn(job))
        return
    pending: dict[int, Any] = {}
    nxt = 0
    with concurrent.futures.ProcessPoolExecutor(max_workers=parallel) as pool:
        futures = {pool.submit(fn, job): k for k, job in enumerate(jobs)}
        for fut in concurrent.futures.as_completed(futures):
            pending[futures[fut]] = fut.result()
            while nxt in pending:
                sink(pending.pop(nxt))
                nxt += 1


def run_kappa_sweep(cfg: ExperimentConfig, out_dir: str | Path | None = None, parallel: int = 1) -> list[dict]:
    """Train every ``(kappa, seed)`` cell, appending rows to the results CSV as cells finish."""
    out = Path(out_dir if out_dir is not None else cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    writer = ResultWriter(out / cfg.output.csv, SWEEP_COLUMNS)
    started = time.time()
    cells: list[dict] = []
    rows: list[dict] = []

    def sink(cell):
        writer.write(cell["rows"])
        rows.extend(cell["rows"])
        cells.append({"run_id": cell["run_id"], "kappa": cell["kappa"], "seed": cell["seed"], "wall_ms": cell["wall_ms"]})

    jobs = [(cfg.to_dict(), int(k), int(s), str(out)) for k in cfg.kappas for s in cfg.seeds]
    _ordered_run(jobs, _cell_job, parallel, sink)
    _write_sidecar(cfg, out, cells, started)
    return rows


# ---------------------------------------------------------------------------
# wireless benchmark


def _wireless_cell(args) -> dict:
    cfg_dict, seed, out_dir = args
    cfg = parse_config(cfg_dict)
    start = time.perf_counter()
    mdp = build_environment(cfg, seed)
    env = mdp.metadata["env"]
    name = cfg.environment.name
    ev_seed = eval_seed(cfg, seed, cfg.actor.M)
    rows = []
    for p in cfg.baseline.send_probs:
        est = evaluate(cfg, mdp, aloha_policy(env, p), ev_seed)
        rows.append(
            {"run_id": f"{cfg.name}-aloha{p}-s{seed}", "env": name, "method": "aloha", "kappa": None, "send_prob": float(p),
             "seed": seed, "m": 0, "eval_J": est.mean, "eval_se": est.se, "gap": None}
        )
    for kappa in cfg.kappas:
        res = train(mdp, int(kappa), cfg.critic, cfg.actor, train_seed(cfg, kappa, seed))
        est = evaluate(cfg, mdp, res.policy, ev_seed)
        run_id = f"{cfg.name}-k{kappa}-s{seed}"
        rows.append(
            {"run_id": run_id, "env": name, "method": "sac", "kappa": int(kappa), "send_prob": None,
             "seed": seed, "m": cfg.actor.M, "eval_J": est.mean, "eval_se": est.se, "gap": None}
        )
        if out_dir is not None and cfg.output.save_policies:
            pdir = Path(out_dir) / "policies"
            pdir.mkdir(parents=True, exist_ok=True)
            res.policy.save(pdir / f"{run_id}.json")
    return {"seed": seed, "rows": rows, "wall_ms": 1000.0 * (time.perf_counter() - start)}


def run_wireless_benchmark(cfg: ExperimentConfig, out_dir: str | Path | None = None, parallel: int = 1) -> list[dict]:
    """SAC at each configured kappa against the best ALOHA send probability.

    ALOHA and SAC policies of one seed are scored with the same evaluation
    stream, so comparisons within a seed use common random numbers.
    """
    if cfg.environment.name != "wireless":
        raise ConfigError("the wireless benchmark needs environment.name = 'wireless'")
    out = Path(out_dir if out_dir is not None else cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    writer = ResultWriter(out / cfg.output.csv, WIRELESS_COLUMNS)
    started = time.time()
    cells: list[dict] = []
    rows: list[dict] = []

    def sink(cell):
        writer.write(cell["rows"])
        rows.extend(cell["rows"])
        cells.append({"seed": cell["seed"], "wall_ms": cell["wall_ms"]})

    jobs = [(cfg.to_dict(), int(s), str(out)) for s in cfg.seeds]
    _ordered_run(jobs, _wireless_cell, parallel, sink)
    _write_sidecar(cfg, out, cells, started)
    return rows


# ---------------------------------------------------------------------------
# standalone evaluation


def run_evaluate(cfg: ExperimentConfig, policy_path: str | Path | None = None, out_dir: str | Path | None = None) -> list[dict]:
    """Score a saved policy (the uniform policy when none is given) on each seed's environment."""
    out = Path(out_dir if out_dir is not None else cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    writer = ResultWriter(out / cfg.output.csv, SWEEP_COLUMNS)
    label = Path(policy_path).stem if policy_path is not None else "uniform"
    rows = []
    for seed in cfg.seeds:
        mdp = build_environment(cfg, seed)
        if policy_path is not None:
            policy = LocalizedPolicyTable.load(policy_path)
            if policy.shapes != mdp.policy_shapes():
                raise ConfigError(f"policy shapes {policy.shapes} do not match the environment's {mdp.policy_shapes()}")
        else:
            policy = mdp.uniform_policy()
        est = evaluate(cfg, mdp, policy, eval_seed(cfg, seed, 0))
        opt = mdp.optimal_value
        rows.append(
            {"run_id": f"{cfg.name}-{label}-s{seed}", "env": cfg.environment.name, "kappa": None, "seed": int(seed), "m": 0,
             "eval_J": est.mean, "eval_se": est.se, "gap": None if opt is None else opt - est.mean}
        )
    writer.write(rows)
    return rows


# ---------------------------------------------------------------------------
# decay report


def decay_policy(cfg: ExperimentConfig, mdp: NetworkedMdp) -> LocalizedPolicyTable:
    if cfg.decay.policy == "uniform":
        return mdp.uniform_policy()
    gen = rngmod.stream(int(cfg.master_seed), rngmod.POLICY)
    return LocalizedPolicyTable([cfg.decay.logit_scale * gen.standard_normal(s) for s in mdp.policy_shapes()])


def run_decay_report(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> list[dict]:
    out = Path(out_dir if out_dir is not None else cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    mdp = build_environment(cfg, cfg.seeds[0])
    rows = oracle.decay_report(mdp, decay_policy(cfg, mdp), cfg.decay.kappa_max)
    oracle.write_decay_csv(out / cfg.output.csv, rows)
    return rows


# ---------------------------------------------------------------------------
# advisory checks


def _inner_loop_terms(cfg: ExperimentConfig, mdp: NetworkedMdp, kappa: int) -> tuple[float, float]:
    """Left- and right-hand sides of the inner-loop length condition."""
    a = cfg.assumptions
    gamma, rbar = float(cfg.gamma), mdp.reward_bound
    h, t0, T = cfg.critic.h, cfg.critic.t0, cfg.critic.T
    eps_bar = 4 * rbar / (1 - gamma) + 2 * rbar
    f_k = mdp.graph.max_neighborhood_size(kappa)
    sa = max(sp.state_size * sp.action_size for sp in mdp.spaces)
    delta = a.delta / (2 * mdp.n * max(cfg.actor.M, 1))
    log_term = math.log(2 * a.tau * max(T, 1) ** 2 / delta) + f_k * math.log(sa)
    c_a = 6 * eps_bar / (1 - math.sqrt(gamma)) * math.sqrt(a.tau * h / a.sigma * log_term)
    c_a2 = 2 / (1 - math.sqrt(gamma)) * max(16 * eps_bar * h * a.tau / a.sigma, 2 * rbar / (1 - gamma) * (a.tau + t0))
    lhs = c_a / math.sqrt(T + t0) + c_a2 / (T + t0)
    c = rbar / (1 - gamma)
    rhs = 2 * c * gamma ** (kappa + 1) / (1 - gamma) ** 2
    return lhs, rhs


def validate_config(cfg: ExperimentConfig, mdp: NetworkedMdp | None = None) -> list[str]:
    """Warnings where the step sizes or inner-loop length miss the convergence
    convergence conditions.  Only checked for estimates the user supplied."""
    a = cfg.assumptions
    if a.sigma is None and a.tau is None and a.L_prime is None:
        return []
    warnings = []
    gamma = float(cfg.gamma)
    h, t0 = cfg.critic.h, cfg.critic.t0
    if a.sigma is not None:
        need = max(2.0, 1.0 / (1.0 - math.sqrt(gamma))) / a.sigma
        if h < need:
            warnings.append(f"h={h} is below (1/sigma)*max(2, 1/(1-sqrt(gamma))) = {need:.4g}")
    parts = {"2h": 2 * h}
    if a.sigma is not None:
        parts["4*sigma*h"] = 4 * a.sigma * h
    if a.tau is not None:
        parts["tau"] = float(a.tau)
    need_t0 = max(parts.values())
    if t0 < need_t0:
        warnings.append(f"t0={t0} violates t_0 >= max(2h, 4*sigma*h, tau) (needs {need_t0:.4g}; terms {parts})")
    if a.L_prime is not None and cfg.actor.eta > 1.0 / (4.0 * a.L_prime):
        warnings.append(f"eta={cfg.actor.eta} exceeds 1/(4 L') = {1.0 / (4.0 * a.L_prime):.4g}")
    for kappa in cfg.kappas:
        if cfg.critic.T + 1 < kappa + 1:
            warnings.append(f"T={cfg.critic.T} is shorter than kappa={kappa} needs for the discounted tail (T + 1 >= kappa + 1)")
    if a.sigma is not None and a.tau is not None:
        mdp = build_environment(cfg, cfg.seeds[0]) if mdp is None else mdp
        for kappa in cfg.kappas:
            lhs, rhs = _inner_loop_terms(cfg, mdp, int(kappa))
            if lhs > rhs:
                warnings.append(f"kappa={kappa}: inner-loop error term {lhs:.4g} exceeds the truncation level {rhs:.4g}; increase T")
    return warnings
