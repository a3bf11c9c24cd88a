"""Localized tabular softmax policies ``zeta_i(a_i | s_i)``."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

CHECKPOINT_FORMAT = "netsac-policy/1"


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    top = logits.max(axis=-1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise ValueError("every policy row needs at least one finite logit")
    z = np.exp(logits - top)
    return z / z.sum(axis=-1, keepdims=True)


class LocalizedPolicyTable:
    """Per-agent logit matrices ``theta_i`` of shape ``(|S_i|, |A_i|)``.

    Instances are treated as immutable: updates return new tables.
    """

    def __init__(self, logits: Sequence[np.ndarray]):
        mats = []
        for i, m in enumerate(logits):
            m = np.array(m, dtype=np.float64)
            if m.ndim != 2 or min(m.shape) < 1:
                raise ValueError(f"agent {i}: logits must be a non-empty matrix, got shape {m.shape}")
            m.setflags(write=False)
            mats.append(m)
        self.logits: tuple[np.ndarray, ...] = tuple(mats)
        self._probs = tuple(_softmax_rows(m) for m in self.logits)
        for p in self._probs:
            p.setflags(write=False)

    @classmethod
    def uniform(cls, shapes: Sequence[tuple[int, int]]) -> LocalizedPolicyTable:
        """Zero logits, i.e. uniformly random actions."""
        return cls([np.zeros(shape) for shape in shapes])

    @classmethod
    def from_probs(cls, probs: Sequence[np.ndarray]) -> LocalizedPolicyTable:
        """Fixed policy from probability tables; zero entries become ``-inf``."""
        with np.errstate(divide="ignore"):
            return cls([np.log(np.asarray(p, dtype=np.float64)) for p in probs])

    @property
    def n(self) -> int:
        return len(self.logits)

    @property
    def shapes(self) -> list[tuple[int, int]]:
        return [m.shape for m in self.logits]

    def probs(self, i: int) -> np.ndarray:
        """Full ``(|S_i|, |A_i|)`` action-probability table of agent ``i``."""
        return self._probs[i]

    def action_probs(self, i: int, s_i: int) -> np.ndarray:
        return self._probs[i][s_i]

    def log_prob(self, i: int, s_i: int, a_i: int) -> float:
        row = self.logits[i][s_i]
        return float(row[a_i] - logsumexp(row))

    def log_policy_grad(self, i: int, s_i: int, a_i: int) -> np.ndarray:
        """Score function: row ``s_i`` is ``e_{a_i} - zeta_i(.|s_i)``, rest zero."""
        g = np.zeros(self.logits[i].shape)
        g[s_i] = -self._probs[i][s_i]
        g[s_i, a_i] += 1.0
        return g

    def joint_prob(self, s: Sequence[int], a: Sequence[int]) -> float:
        return math.prod(float(self._probs[i][s[i], a[i]]) for i in range(self.n))

    def cumulative_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Padded cumulative probabilities ``(n, S_max, A_max)`` and action counts."""
        s_max = max(m.shape[0] for m in self.logits)
        a_max = max(m.shape[1] for m in self.logits)
        cum = np.ones((self.n, s_max, a_max))
        sizes = np.array([m.shape[1] for m in self.logits], dtype=np.int64)
        for i, p in enumerate(self._probs):
            c = np.cumsum(p, axis=1)
            c[:, -1] = 1.0
            cum[i, : p.shape[0], : p.shape[1]] = c
        return cum, sizes

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LocalizedPolicyTable) or other.n != self.n:
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self.logits, other.logits))

    def __repr__(self) -> str:
        return f"LocalizedPolicyTable(n={self.n}, shapes={self.shapes})"

    # checkpoints ----------------------------------------------------------

    def to_json(self) -> str:
        # repr is the shortest string that round-trips a double bit-exactly (keeps -0.0)
        lines = []
        for i, m in enumerate(self.logits):
            body = ", ".join(_format_double(x) for x in m.ravel(order="C"))
            lines.append(f' "{i}": {{"shape": [{m.shape[0]}, {m.shape[1]}], "logits": [{body}]}}')
        agents = ",\n".join(lines)
        return f'{{"format": {json.dumps(CHECKPOINT_FORMAT)}, "agents": {{\n{agents}\n}}}}\n'

    @classmethod
    def from_json(cls, text: str) -> LocalizedPolicyTable:
        doc = json.loads(text)
        if doc.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported policy checkpoint format {doc.get('format')!r}")
        agents = doc["agents"]
        mats = []
        for i in range(len(agents)):
            entry = agents[str(i)]
            mats.append(np.array(entry["logits"], dtype=np.float64).reshape(entry["shape"]))
        return cls(mats)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> LocalizedPolicyTable:
        return cls.from_json(Path(path).read_text())


def _format_double(x: float) -> str:
    if np.isfinite(x):
        return repr(float(x))
    # json accepts these non-standard tokens on read
    return "NaN" if np.isnan(x) else ("Infinity" if x > 0 else "-Infinity")


def action_probs(policy: LocalizedPolicyTable, i: int, s_i: int) -> np.ndarray:
    return policy.action_probs(i, s_i)


def log_policy_grad(policy: LocalizedPolicyTable, i: int, s_i: int, a_i: int) -> np.ndarray:
    return policy.log_policy_grad(i, s_i, a_i)


def actor_step_size(eta: float, m: int) -> float:
    """``eta_m = eta / sqrt(m + 1)``."""
    return eta / math.sqrt(m + 1)


def gradient_ascent_step(
    policy: LocalizedPolicyTable, grads: Sequence[np.ndarray], step: float
) -> LocalizedPolicyTable:
    """``theta_i <- theta_i + step * grads[i]`` for every agent."""
    if len(grads) != policy.n:
        raise ValueError(f"expected {policy.n} gradients, got {len(grads)}")
    new = []
    for i, (theta, g) in enumerate(zip(policy.logits, grads)):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != theta.shape:
            raise ValueError(f"agent {i}: gradient shape {g.shape} != parameter shape {theta.shape}")
        new.append(theta + step * g)
    return LocalizedPolicyTable(new)
