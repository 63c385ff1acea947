"""Speculative-decoding environments.

Two levels of fidelity are provided:

* a rate-level process where every drafted position gets an acceptance
  probability ``alpha`` drawn i.i.d. from the drafter's alignment distribution;
* a distribution-level environment that runs the speculative-sampling
  accept/residual rule on explicit categorical distributions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy import special

from .rewards import be_reward, tv_distance


@dataclass(frozen=True)
class PointMass:
    """Every position has the same acceptance probability."""

    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha={self.alpha} outside [0, 1]")

    @property
    def mean(self) -> float:
        return float(self.alpha)

    @property
    def variance(self) -> float:
        return 0.0

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.full(size, float(self.alpha))

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return np.full(np.shape(u), float(self.alpha))

    def to_dict(self) -> dict:
        return {"kind": "point", "alpha": self.alpha}


@dataclass(frozen=True)
class BetaScaled:
    """``lo + (hi - lo) * Beta(a, b)``."""

    a: float
    b: float
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("Beta shape parameters must be positive")
        if not 0.0 <= self.lo <= self.hi <= 1.0:
            raise ValueError(f"need 0 <= lo <= hi <= 1, got lo={self.lo}, hi={self.hi}")

    @classmethod
    def from_mean(cls, mean: float, concentration: float) -> "BetaScaled":
        """Beta on [0, 1] with the given mean and ``a + b = concentration``."""
        if not 0.0 < mean < 1.0:
            raise ValueError("mean must lie strictly inside (0, 1)")
        return cls(a=mean * concentration, b=(1.0 - mean) * concentration)

    @property
    def mean(self) -> float:
        return self.lo + (self.hi - self.lo) * self.a / (self.a + self.b)

    @property
    def variance(self) -> float:
        s = self.a + self.b
        return (self.hi - self.lo) ** 2 * self.a * self.b / (s * s * (s + 1.0))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * rng.beta(self.a, self.b, size)

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * special.betaincinv(self.a, self.b, u)

    def to_dict(self) -> dict:
        return {"kind": "beta", "a": self.a, "b": self.b, "lo": self.lo, "hi": self.hi}


AlignmentDist = Union[PointMass, BetaScaled]


def dist_from_dict(d: dict) -> AlignmentDist:
    kind = d.get("kind")
    if kind == "point":
        return PointMass(float(d["alpha"]))
    if kind == "beta":
        if "mean" in d:
            return BetaScaled.from_mean(float(d["mean"]), float(d.get("concentration", 2.0)))
        return BetaScaled(float(d["a"]), float(d["b"]), float(d.get("lo", 0.0)), float(d.get("hi", 1.0)))
    raise ValueError(f"unknown alignment distribution kind {kind!r}")


@dataclass(frozen=True)
class DrafterProfile:
    id: int
    dist: AlignmentDist
    schedule: tuple = ()  # ((change_round, dist), ...), strictly increasing rounds

    def __post_init__(self):
        rounds = [r for r, _ in self.schedule]
        if any(r < 0 for r in rounds):
            raise ValueError("change rounds must be non-negative")
        if any(b <= a for a, b in zip(rounds, rounds[1:])):
            raise ValueError("change rounds must be strictly increasing")

    @property
    def stationary(self) -> bool:
        return not self.schedule

    def active(self, round: int) -> AlignmentDist:
        """Distribution in force at 0-based round index ``round``."""
        current = self.dist
        for change_round, dist in self.schedule:
            if round >= change_round:
                current = dist
            else:
                break
        return current


@dataclass
class RoundOutcome:
    n_acc: int
    bd_reward: float
    be_reward: float
    tokens_emitted: int
    alphas_drawn: tuple
    switched: bool = False
    emitted: tuple = ()
    degenerate: bool = False


def accepted_counts(alphas: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Leading run of accepted positions per row (token j accepted iff u_j < alpha_j)."""
    return np.cumprod(uniforms < alphas, axis=-1).sum(axis=-1)


def sample_rate_rounds(dist: AlignmentDist, n_max: int, size: int, rng: np.random.Generator):
    """Vectorised rate-level rounds: returns ``(n_acc, bd, alphas)`` arrays."""
    alphas = dist.sample(rng, (size, n_max))
    uniforms = rng.random((size, n_max))
    return accepted_counts(alphas, uniforms), alphas.mean(axis=1), alphas


def step_rate_env(profile: DrafterProfile, round: int, n_max: int, rng: np.random.Generator) -> RoundOutcome:
    n_acc, bd, alphas = sample_rate_rounds(profile.active(round), n_max, 1, rng)
    n = int(n_acc[0])
    return RoundOutcome(
        n_acc=n,
        bd_reward=float(bd[0]),
        be_reward=be_reward(n, n_max),
        tokens_emitted=n + 1,
        alphas_drawn=tuple(float(a) for a in alphas[0]),
    )


def apply_temperature(p: np.ndarray, temperature: float) -> np.ndarray:
    """Temperature-scaled distribution; ``temperature == 0`` is greedy (one-hot argmax)."""
    p = np.asarray(p, dtype=float)
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if temperature == 0:
        out = np.zeros_like(p)
        out[int(np.argmax(p))] = 1.0
        return out
    if temperature == 1:
        return p.copy()
    out = np.zeros_like(p)
    pos = p > 0
    logp = np.log(p[pos]) / temperature
    w = np.exp(logp - logp.max())
    out[pos] = w / w.sum()
    return out


@dataclass(eq=False)
class CategoricalEnv:
    vocab_size: int
    target: np.ndarray
    drafters: list
    temperature: float = 1.0
    _sampling: list = field(init=False, repr=False)
    _scoring: list = field(init=False, repr=False)

    def __post_init__(self):
        if self.vocab_size < 4:
            raise ValueError("vocab_size must be >= 4")
        self.target = np.asarray(self.target, dtype=float)
        self.drafters = [np.asarray(q, dtype=float) for q in self.drafters]
        for name, v in [("target", self.target)] + [(f"drafter {i}", q) for i, q in enumerate(self.drafters)]:
            if v.shape != (self.vocab_size,):
                raise ValueError(f"{name} has wrong length {v.shape}")
            if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-12:
                raise ValueError(f"{name} is not a probability vector")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        p = apply_temperature(self.target, self.temperature)
        qs = [apply_temperature(q, self.temperature) for q in self.drafters]
        self._sampling = [(p, np.cumsum(p), q, np.cumsum(q), np.clip(p - q, 0.0, None)) for q in qs]
        # greedy acceptance uses argmax agreement, but BD keeps the full-distribution distance
        if self.temperature == 0:
            self._scoring = [tv_distance(self.target, q) for q in self.drafters]
        else:
            self._scoring = [tv_distance(p, q) for q in qs]

    @property
    def k(self) -> int:
        return len(self.drafters)

    def alignment(self, i: int) -> float:
        """``1 - d_TV`` used for the BD reward of drafter ``i``."""
        return 1.0 - self._scoring[i]


def _draw(cdf: np.ndarray, rng: np.random.Generator) -> int:
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, cdf.size - 1)


def step_dist_env(env: CategoricalEnv, drafter_index: int, n_max: int, rng: np.random.Generator) -> RoundOutcome:
    """One round of speculative sampling with drafter ``drafter_index``."""
    if not 0 <= drafter_index < env.k:
        raise IndexError(f"drafter index {drafter_index} out of range for {env.k} drafters")
    p, p_cdf, q, q_cdf, residual = env._sampling[drafter_index]
    emitted = []
    n_acc = 0
    degenerate = False
    rejected = False
    for _ in range(n_max):
        x = _draw(q_cdf, rng)
        r = rng.random()
        if r < min(1.0, p[x] / q[x]):
            emitted.append(x)
            n_acc += 1
            continue
        mass = residual.sum()
        if mass <= 0.0:
            # p == q up to rounding: nothing to resample from
            degenerate = True
            emitted.append(x)
            n_acc += 1
            continue
        emitted.append(_draw(np.cumsum(residual), rng))
        rejected = True
        break
    if not rejected:
        emitted.append(_draw(p_cdf, rng))
    a = env.alignment(drafter_index)
    return RoundOutcome(
        n_acc=n_acc,
        bd_reward=a,
        be_reward=be_reward(n_acc, n_max),
        tokens_emitted=n_acc + 1,
        alphas_drawn=(a,) * n_max,
        emitted=tuple(emitted),
        degenerate=degenerate,
    )


def make_categorical_env(
    vocab_size: int,
    alphas: Sequence[float],
    rng: np.random.Generator,
    temperature: float = 1.0,
) -> CategoricalEnv:
    """Build drafters with ``d_TV(p, q_i) = 1 - alpha_i`` exactly.

    The target lives on the first half of the vocabulary and each drafter mixes
    it with noise supported on the second half.
    """
    if vocab_size < 4:
        raise ValueError("vocab_size must be >= 4")
    for a in alphas:
        if not 0.0 <= a <= 1.0:
            raise ValueError(f"alpha={a} outside [0, 1]")
    half = vocab_size // 2
    p = np.zeros(vocab_size)
    p[:half] = rng.dirichlet(np.ones(half))
    drafters = []
    for a in alphas:
        u = np.zeros(vocab_size)
        u[half:] = rng.dirichlet(np.ones(vocab_size - half))
        drafters.append(a * p + (1.0 - a) * u)
    return CategoricalEnv(vocab_size, p, drafters, temperature)
