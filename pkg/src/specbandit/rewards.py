"""Reward signals for drafter selection: block efficiency (BE) and block divergence (BD)."""

from __future__ import annotations

import enum
from typing import Sequence

import numpy as np

_NORM_TOL = 1e-9


class RewardKind(str, enum.Enum):
    BE = "be"
    BD = "bd"

    @classmethod
    def parse(cls, value: "str | RewardKind") -> "RewardKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown reward kind {value!r}; expected 'be' or 'bd'") from None


def _check_distribution(name: str, v: np.ndarray) -> None:
    if v.ndim != 1:
        raise ValueError(f"{name} must be a 1-d probability vector")
    if np.any(v < 0):
        raise ValueError(f"{name} has negative entries")
    if abs(float(v.sum()) - 1.0) > _NORM_TOL:
        raise ValueError(f"{name} is not normalized (sum={float(v.sum())!r})")


def tv_distance(p: Sequence[float], q: Sequence[float]) -> float:
    """Total variation distance ``0.5 * ||p - q||_1`` between two distributions."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} vs {q.shape[0]}")
    _check_distribution("p", p)
    _check_distribution("q", q)
    return min(1.0, 0.5 * float(np.abs(p - q).sum()))


def bd_reward(tv_per_position: Sequence[float], n_max: int) -> float:
    """Mean of ``1 - d_TV`` over all ``n_max`` drafted positions.

    Positions after the first rejection are included; the verifier scores the
    whole drafted block in parallel, so every distance is available.
    """
    tv = np.asarray(tv_per_position, dtype=float)
    if tv.shape != (n_max,):
        raise ValueError(f"expected {n_max} TV values, got {tv.size}")
    if np.any((tv < 0) | (tv > 1)):
        raise ValueError("TV distances must lie in [0, 1]")
    return float(np.mean(1.0 - tv))


def be_reward(n_acc: int, n_max: int) -> float:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if not 0 <= n_acc <= n_max:
        raise ValueError(f"n_acc={n_acc} outside [0, {n_max}]")
    return n_acc / n_max
