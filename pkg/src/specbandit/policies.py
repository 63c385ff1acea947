"""Drafter-selection policies.

Every policy exposes ``select(t, l) -> arm`` and ``update(arm, reward, tokens)``
where ``t`` is the 0-based round index and ``l`` the number of tokens emitted so
far. Argmax ties always go to the lowest arm index.
"""

from __future__ import annotations

import math
from collections import deque
from typing import Optional, Sequence

import numpy as np

_INF = float("inf")


def _argmax(values: Sequence[float]) -> int:
    best, best_v = 0, values[0]
    for i in range(1, len(values)):
        if values[i] > best_v:
            best, best_v = i, values[i]
    return best


def _check_reward(reward: float) -> None:
    if not 0.0 <= reward <= 1.0:
        raise ValueError(f"reward {reward} outside [0, 1]")


class UCB:
    """UCB with a forced pull of each arm, then ``mean + beta * sqrt(2 ln t / n)``."""

    def __init__(self, k: int, beta: float = 0.01, means=None, counts=None, t: int = 0):
        if k < 1:
            raise ValueError("need at least one arm")
        if beta < 0:
            raise ValueError("beta must be non-negative")
        self.k = k
        self.beta = float(beta)
        self.means = [0.0] * k if means is None else [float(m) for m in means]
        self.counts = [0] * k if counts is None else [int(c) for c in counts]
        self.t = int(t)

    @property
    def initialized(self) -> bool:
        return min(self.counts) > 0

    def index(self) -> list:
        if not self.initialized:
            raise RuntimeError("UCB index requested before every arm was pulled once")
        c = 2.0 * math.log(self.t) if self.t > 1 else 0.0
        return [m + self.beta * math.sqrt(c / n) for m, n in zip(self.means, self.counts)]

    def select(self, t: Optional[int] = None, l: int = 0) -> int:
        counts = self.counts
        for i in range(self.k):
            if counts[i] == 0:
                return i
        c = 2.0 * math.log(self.t) if self.t > 1 else 0.0
        beta, means = self.beta, self.means
        best, best_v = 0, -_INF
        for i in range(self.k):
            v = means[i] + beta * math.sqrt(c / counts[i])
            if v > best_v:
                best, best_v = i, v
        return best

    def update(self, arm: int, reward: float, tokens: int = 1) -> None:
        _check_reward(reward)
        n = self.counts[arm]
        self.means[arm] = (self.means[arm] * n + reward) / (n + 1)
        self.counts[arm] = n + 1
        self.t += 1


class EXP3:
    """Exponential weights with ``gamma``-uniform mixing and importance-weighted updates."""

    RESCALE_AT = 1e100

    def __init__(self, k: int, gamma: float = 0.4, rng: Optional[np.random.Generator] = None, weights=None):
        if not 0.0 < gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        self.k = k
        self.gamma = float(gamma)
        self.weights = [1.0] * k if weights is None else [float(w) for w in weights]
        if any(not (w > 0 and math.isfinite(w)) for w in self.weights):
            raise ValueError("weights must be finite and positive")
        self.rng = rng if rng is not None else np.random.default_rng()
        self._last_prob: Optional[float] = None

    def probabilities(self) -> list:
        total = sum(self.weights)
        g = self.gamma
        return [(1.0 - g) * w / total + g / self.k for w in self.weights]

    def draw(self) -> tuple:
        """Sample an arm; returns ``(arm, probability)`` for importance weighting."""
        probs = self.probabilities()
        u = self.rng.random() * sum(probs)
        acc = 0.0
        arm = self.k - 1
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                arm = i
                break
        return arm, probs[arm]

    def select(self, t: Optional[int] = None, l: int = 0) -> int:
        arm, self._last_prob = self.draw()
        return arm

    def update(self, arm: int, reward: float, tokens: int = 1, prob: Optional[float] = None) -> None:
        _check_reward(reward)
        prob = self._last_prob if prob is None else prob
        if prob is None or prob <= 0:
            raise ValueError("update needs the positive selection probability of the arm")
        gain = self.gamma * (reward / prob) / self.k
        if gain:
            # in log space: a small prob can make exp(gain) overflow on its own
            logs = [math.log(w) for w in self.weights]
            logs[arm] += gain
            top = max(logs)
            if top > math.log(self.RESCALE_AT):
                logs = [x - top for x in logs]
            self.weights = [math.exp(max(x, -700.0)) for x in logs]
        self._last_prob = None


class SequentialHalving:
    """Fixed-budget Sequential Halving over ``budget`` pulls (rounds).

    Each stage pulls every survivor ``floor(budget / (|S| * ceil(log2 K)))`` times
    (at least once), arm by arm, then keeps the top ``ceil(|S| / 2)`` by stage
    reward sum. After the last stage the survivor is returned forever.
    """

    def __init__(self, k: int, budget: int):
        if k < 1:
            raise ValueError("need at least one arm")
        if budget < 1:
            raise ValueError("budget must be >= 1")
        self.k = k
        self.budget = int(budget)
        self.n_stages = math.ceil(math.log2(k)) if k > 1 else 0
        self.survivors = list(range(k))
        self.history = [tuple(self.survivors)]
        self.stage = 0
        self.pulls = 0
        self.stage_pulls: list = []
        self._start_stage()

    def _start_stage(self) -> None:
        if self.finished:
            self._plan = []
            return
        n_t = max(1, self.budget // (len(self.survivors) * self.n_stages))
        self.stage_pulls.append(n_t)
        self._plan = [a for a in self.survivors for _ in range(n_t)]
        self._pos = 0
        self.stage_rewards = {a: 0.0 for a in self.survivors}
        self.stage_counts = {a: 0 for a in self.survivors}

    @property
    def finished(self) -> bool:
        return self.stage >= self.n_stages

    @property
    def survivor(self) -> int:
        if not self.finished:
            raise RuntimeError("Sequential Halving has not finished")
        return self.survivors[0]

    def leader(self) -> int:
        """Best current survivor by empirical stage mean (used if stopped early)."""
        if self.finished:
            return self.survivors[0]
        means = [
            self.stage_rewards[a] / self.stage_counts[a] if self.stage_counts[a] else -_INF
            for a in self.survivors
        ]
        if max(means) == -_INF:
            return self.survivors[0]
        return self.survivors[_argmax(means)]

    def select(self, t: Optional[int] = None, l: int = 0) -> int:
        if self.finished:
            return self.survivors[0]
        return self._plan[self._pos]

    def update(self, arm: int, reward: float, tokens: int = 1) -> None:
        _check_reward(reward)
        if self.finished:
            return
        if arm != self._plan[self._pos]:
            raise ValueError(f"expected a pull of arm {self._plan[self._pos]}, got {arm}")
        self.stage_rewards[arm] += reward
        self.stage_counts[arm] += 1
        self.pulls += 1
        self._pos += 1
        if self._pos == len(self._plan):
            ranked = sorted(self.survivors, key=lambda a: (-self.stage_rewards[a], a))
            self.survivors = sorted(ranked[: math.ceil(len(self.survivors) / 2)])
            self.history.append(tuple(self.survivors))
            self.stage += 1
            self._start_stage()


def petc_explore_tokens(budget_b: float, c: float = 20.0) -> int:
    """Token budget ``B_0 = ceil(c ln B)`` of the exploration phase."""
    return max(1, math.ceil(c * math.log(budget_b)))


class PETC:
    """Pure exploration (Sequential Halving) until ``B_0`` tokens, then commit.

    SH is given ``floor((B_0 - 1) / (n_max + 1))`` rounds so that, even if every
    round emits the maximum number of tokens, all exploration switches happen
    while fewer than ``B_0`` tokens have been produced.
    """

    EXPLORE = "explore"
    COMMIT = "commit"

    def __init__(self, k: int, budget_b: float, n_max: int, c: float = 20.0):
        if c <= 0:
            raise ValueError("c must be positive")
        self.k = k
        self.b0 = petc_explore_tokens(budget_b, c)
        self.sh = SequentialHalving(k, max(1, (self.b0 - 1) // (n_max + 1)))
        self.phase = self.EXPLORE
        self.committed_arm: Optional[int] = None
        self.commit_tokens: Optional[int] = None

    def select(self, t: Optional[int] = None, l: int = 0) -> int:
        if self.phase == self.EXPLORE and (l >= self.b0 or self.k == 1):
            self.committed_arm = self.sh.survivor if self.sh.finished else self.sh.leader()
            self.commit_tokens = l
            self.phase = self.COMMIT
        if self.phase == self.COMMIT:
            return self.committed_arm
        return self.sh.select()

    def update(self, arm: int, reward: float, tokens: int = 1) -> None:
        if self.phase == self.EXPLORE:
            self.sh.update(arm, reward)
        else:
            _check_reward(reward)


class DiscountedUCB:
    """UCB on discounted sums: every round all statistics are multiplied by ``gamma``."""

    def __init__(self, k: int, gamma: float = 0.95, beta: float = 0.01):
        if not 0.0 < gamma <= 1.0:
            raise ValueError("discount gamma must lie in (0, 1]")
        self.k = k
        self.gamma = float(gamma)
        self.beta = float(beta)
        self.sums = [0.0] * k
        self.counts = [0.0] * k
        self.t = 0

    @property
    def means(self) -> list:
        return [s / n if n > 0 else 0.0 for s, n in zip(self.sums, self.counts)]

    def select(self, t: Optional[int] = None, l: int = 0) -> int:
        c = 2.0 * math.log(self.t) if self.t > 1 else 0.0
        best, best_v = 0, -_INF
        for i in range(self.k):
            n = self.counts[i]
            if n <= 0.0:
                return i
            v = self.sums[i] / n + self.beta * math.sqrt(c / n)
            if v > best_v:
                best, best_v = i, v
        return best

    def update(self, arm: int, reward: float, tokens: int = 1) -> None:
        _check_reward(reward)
        g = self.gamma
        if g != 1.0:
            self.sums = [s * g for s in self.sums]
            self.counts = [n * g for n in self.counts]
        self.sums[arm] += reward
        self.counts[arm] += 1.0
        self.t += 1


class SlidingWindowUCB:
    """UCB whose statistics only cover the last ``window`` rounds (``None`` = unbounded)."""

    def __init__(self, k: int, window: Optional[int] = 100, beta: float = 0.01):
        if window is not None and window < k:
            raise ValueError("window must be at least the number of arms")
        self.k = k
        self.window = window
        self.beta = float(beta)
        self.buffer: deque = deque()
        self.sums = [0.0] * k
        self.counts = [0] * k
        self.t = 0

    @property
    def means(self) -> list:
        return [s / n if n else 0.0 for s, n in zip(self.sums, self.counts)]

    def select(self, t: Optional[int] = None, l: int = 0) -> int:
        c = 2.0 * math.log(self.t) if self.t > 1 else 0.0
        best, best_v = 0, -_INF
        for i in range(self.k):
            n = self.counts[i]
            if n == 0:
                return i
            v = self.sums[i] / n + self.beta * math.sqrt(c / n)
            if v > best_v:
                best, best_v = i, v
        return best

    def update(self, arm: int, reward: float, tokens: int = 1) -> None:
        _check_reward(reward)
        self.buffer.append((arm, reward))
        self.sums[arm] += reward
        self.counts[arm] += 1
        if self.window is not None and len(self.buffer) > self.window:
            old_arm, old_r = self.buffer.popleft()
            self.counts[old_arm] -= 1
            # recompute rather than subtract so an emptied arm is exactly zero
            self.sums[old_arm] = sum(r for a, r in self.buffer if a == old_arm) if self.counts[old_arm] else 0.0
        self.t += 1


class OraclePolicy:
    """Always plays the arm with the highest true current mean alignment."""

    def __init__(self, profiles):
        self.profiles = list(profiles)
        self._static = all(p.stationary for p in self.profiles)
        self._best = _argmax([p.dist.mean for p in self.profiles])

    def select(self, t: int = 0, l: int = 0) -> int:
        if self._static:
            return self._best
        return _argmax([p.active(t).mean for p in self.profiles])

    def update(self, arm: int, reward: float, tokens: int = 1) -> None:
        pass


def oracle_select(profiles, t: int = 0) -> int:
    return OraclePolicy(profiles).select(t)


class RandomPolicy:
    def __init__(self, k: int, rng: Optional[np.random.Generator] = None):
        self.k = k
        self.rng = rng if rng is not None else np.random.default_rng()

    def select(self, t: Optional[int] = None, l: int = 0) -> int:
        return int(self.rng.integers(self.k))

    def update(self, arm: int, reward: float, tokens: int = 1) -> None:
        pass


def random_select(k: int, rng: np.random.Generator) -> int:
    return int(rng.integers(k))
