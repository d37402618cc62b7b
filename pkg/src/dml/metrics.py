"""Evaluation quantities over epoch logs and value tables.

All functions are pure. Windowed series use non-overlapping windows, and
value tables are normalized globally over all state-action entries before
divergence computation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import NONE, PUNISH, REWARD

OUTCOME_CODES = {REWARD: 1, PUNISH: 0, NONE: -1}
CODE_OUTCOMES = {v: k for k, v in OUTCOME_CODES.items()}


class MetricError(ValueError):
    pass


@dataclass
class EpochLog:
    """Per-epoch interaction records in contiguous epoch order."""

    state: np.ndarray
    action: np.ndarray
    outcome: np.ndarray  # codes: 1 reward, 0 punish, -1 none
    spikes: np.ndarray  # spikes emitted during the epoch (0 for cpu runs)

    def __post_init__(self):
        n = len(self.state)
        if not (len(self.action) == len(self.outcome) == len(self.spikes) == n):
            raise MetricError("log columns must have equal length")

    def __len__(self):
        return len(self.state)

    @staticmethod
    def empty() -> "EpochLog":
        z = np.zeros(0, dtype=np.int64)
        return EpochLog(z, z.copy(), z.copy(), z.copy())


class EpochLogBuilder:
    def __init__(self):
        self.state: list[int] = []
        self.action: list[int] = []
        self.outcome: list[int] = []
        self.spikes: list[int] = []

    def add(self, state: int, action: int, outcome: str, spikes: int = 0) -> None:
        self.state.append(state)
        self.action.append(action)
        self.outcome.append(OUTCOME_CODES[outcome])
        self.spikes.append(spikes)

    def build(self) -> EpochLog:
        return EpochLog(
            np.array(self.state, dtype=np.int64),
            np.array(self.action, dtype=np.int64),
            np.array(self.outcome, dtype=np.int64),
            np.array(self.spikes, dtype=np.int64),
        )


def _windows(n: int, window: int) -> int:
    if window < 1:
        raise MetricError("window must be >= 1")
    return n // window


def moa(log: EpochLog, optimal_action: int, window: int = 100) -> np.ndarray:
    """Fraction of epochs choosing the optimal action, per window."""
    if len(log) == 0:
        raise MetricError("empty log")
    k = _windows(len(log), window)
    hits = (log.action[: k * window] == optimal_action).reshape(k, window)
    return hits.mean(axis=1)


def average_return(log: EpochLog, window: int = 100) -> np.ndarray:
    """Windowed mean of terminal outcomes mapped {reward: 1, punish: 0}.

    Draws are excluded from numerator and denominator; a window holding
    only draws (or no terminals at all) yields NaN, not zero.
    """
    if len(log) == 0:
        raise MetricError("empty log")
    k = _windows(len(log), window)
    out = log.outcome[: k * window].reshape(k, window)
    counted = out >= 0
    n = counted.sum(axis=1)
    s = np.where(counted, out, 0).sum(axis=1)
    return np.where(n > 0, s / np.maximum(n, 1), np.nan)


def _entropy_bits(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon divergence in bits between two nonnegative tables.

    Tables are normalized to probability distributions over all entries;
    the result lies in [0, 1] and is zero iff the normalized tables agree.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise MetricError(f"shape mismatch {p.shape} vs {q.shape}")
    if np.any(p < 0) or np.any(q < 0):
        raise MetricError("tables must be nonnegative")
    ps, qs = p.sum(), q.sum()
    if ps == 0 or qs == 0:
        raise MetricError("tables must have at least one positive entry")
    p = p.ravel() / ps
    q = q.ravel() / qs
    m = 0.5 * (p + q)
    return _entropy_bits(m) - 0.5 * (_entropy_bits(p) + _entropy_bits(q))


def policy_diff(a: np.ndarray, b: np.ndarray) -> tuple[set[int], float]:
    """States where two policies disagree, and the disagreeing fraction."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise MetricError(f"shape mismatch {a.shape} vs {b.shape}")
    states = set(int(s) for s in np.flatnonzero(a != b))
    return states, len(states) / len(a)


def spikes_per_epoch(log: EpochLog) -> float:
    """Mean spikes emitted per epoch (energy proxy; no joules implied)."""
    if len(log) == 0:
        return 0.0
    return float(log.spikes.mean())
