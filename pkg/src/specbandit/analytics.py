"""Closed-form statistics, signal comparisons and regret estimators."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .env import AlignmentDist
from .rewards import RewardKind


_NEAR_ONE = 1e-4


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha={alpha} outside [0, 1]")


def _check_n(n_max: int) -> None:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")


def nacc_pmf(alpha: float, n_max: int) -> np.ndarray:
    """P(N_acc = j) for j = 0..n_max, by direct enumeration of the stopping position."""
    _check_alpha(alpha)
    _check_n(n_max)
    pmf = np.array([alpha**j * (1.0 - alpha) for j in range(n_max)] + [alpha**n_max])
    return pmf


def expected_nacc(alpha: float, n_max: int) -> float:
    """E[N_acc] = (alpha - alpha^(n+1)) / (1 - alpha)."""
    _check_alpha(alpha)
    _check_n(n_max)
    if alpha == 1.0:
        return float(n_max)
    if alpha == 0.0:
        return 0.0
    if 1.0 - alpha < _NEAR_ONE:
        return float(sum(alpha**j for j in range(1, n_max + 1)))
    return (alpha - alpha ** (n_max + 1)) / (1.0 - alpha)


def var_nacc(alpha: float, n_max: int) -> float:
    _check_alpha(alpha)
    _check_n(n_max)
    if alpha in (0.0, 1.0):
        return 0.0
    if 1.0 - alpha < _NEAR_ONE:
        # the closed form cancels catastrophically here; sum the pmf instead
        pmf = nacc_pmf(alpha, n_max)
        j = np.arange(n_max + 1)
        mean = float(pmf @ j)
        return float(pmf @ (j - mean) ** 2)
    n = n_max
    poly = 1.0 - (2 * n + 1) * alpha**n + (2 * n + 1) * alpha ** (n + 1) - alpha ** (2 * n + 1)
    return max(0.0, alpha / (1.0 - alpha) ** 2 * poly)


def be_stats(alpha: float, n_max: int) -> tuple:
    """Mean and variance of the BE reward ``N_acc / n_max``."""
    return expected_nacc(alpha, n_max) / n_max, var_nacc(alpha, n_max) / n_max**2


def bd_stats(dist: AlignmentDist, n_max: int) -> tuple:
    """Mean of the BD reward and an upper bound on its variance.

    The bound is ``min(per-position variance, 1/4) / n_max``; the 1/4 cap is the
    variance ceiling of any [0, 1]-valued variable.
    """
    _check_n(n_max)
    return dist.mean, min(dist.variance, 0.25) / n_max


def feedback_signal(delta, var_i, var_star):
    """``delta^2 / max(var_i, var_star)``; infinite when both variances vanish."""
    denom = max(var_i, var_star)
    if denom <= 0:
        return math.inf
    return delta * delta / denom


def fgh(n: int, x: float) -> tuple:
    """The polynomials f_n, g_n = f_n' and h_n used in the BD/BE signal comparison."""
    if not 0.0 < x < 1.0:
        raise ValueError("x must lie strictly inside (0, 1)")
    f = (x - x ** (n + 1)) / (1.0 - x)
    g = sum(s * x ** (s - 1) for s in range(1, n + 1))
    h = sum(s * (x ** (s - 1) - x ** (2 * n - s)) for s in range(1, n + 1))
    return f, g, h


def theorem1_condition(alpha_star: float, n: int) -> bool:
    """Sufficient condition ``h_n(a) >= g_n(a)^2 / (4 n a)`` for BD to beat BE."""
    _, g, h = fgh(n, alpha_star)
    return h >= g * g / (4.0 * n * alpha_star)


def theorem1_interval(n: int, step: float = 0.005) -> tuple:
    """Grid scan of the condition; returns ``(grid, mask)``."""
    grid = np.round(np.arange(step, 1.0, step), 10)
    grid = grid[(grid > 0) & (grid < 1)]
    mask = np.array([theorem1_condition(float(a), n) for a in grid])
    return grid, mask


def tokens_per_round(alpha: float, n_max: int) -> float:
    """Expected tokens emitted in one round, ``(1 - a^(n+1)) / (1 - a)``."""
    return 1.0 + expected_nacc(alpha, n_max)


def single_arm_stopping_bounds(alpha: float, n_max: int, budget_b: float) -> tuple:
    """Analytic ``(lower, upper)`` bracket on E[tau] when only one drafter is used."""
    if budget_b < 1:
        raise ValueError("B must be >= 1")
    rate = 1.0 / tokens_per_round(alpha, n_max)
    return budget_b * rate - 1.0, (budget_b + 1.0) * rate


def exact_stopping_time(alpha: float, n_max: int, budget_b: int) -> float:
    """Exact E[tau] for a single drafter by the renewal recursion over remaining tokens."""
    pmf = nacc_pmf(alpha, n_max)
    e = np.zeros(budget_b + 1)
    for b in range(1, budget_b + 1):
        acc = 1.0
        for j in range(n_max + 1):
            rest = b - 1 - j
            if rest > 0:
                acc += pmf[j] * e[rest]
        e[b] = acc
    return float(e[budget_b])


@dataclass
class RegretReport:
    policy_mean_rounds: float
    oracle_mean_rounds: float
    stopping_regret: float
    std_err: float
    replications: int
    switching_term: float = 0.0
    unpaired_std_err: float = 0.0
    mean_budget: float = 0.0

    @property
    def total(self) -> float:
        return self.stopping_regret + self.switching_term

    def to_dict(self) -> dict:
        return asdict(self)


def _budgets(traces) -> np.ndarray:
    return np.array([t.budget for t in traces], dtype=float)


def stopping_regret(policy_traces: Sequence, oracle_traces: Sequence) -> RegretReport:
    """Excess mean round count of the policy over paired oracle runs."""
    if len(policy_traces) != len(oracle_traces) or not policy_traces:
        raise ValueError("need the same, non-zero number of policy and oracle traces")
    bp, bo = _budgets(policy_traces), _budgets(oracle_traces)
    if not np.array_equal(bp, bo):
        raise ValueError("policy and oracle traces were generated with different B")
    tp = np.array([t.tau for t in policy_traces], dtype=float)
    to = np.array([t.tau for t in oracle_traces], dtype=float)
    r = len(tp)
    diff = tp - to
    se = float(diff.std(ddof=1) / math.sqrt(r)) if r > 1 else 0.0
    unpaired = float(math.sqrt(tp.var(ddof=1) / r + to.var(ddof=1) / r)) if r > 1 else 0.0
    return RegretReport(
        policy_mean_rounds=float(tp.mean()),
        oracle_mean_rounds=float(to.mean()),
        stopping_regret=float(tp.mean() - to.mean()),
        std_err=se,
        replications=r,
        unpaired_std_err=unpaired,
        mean_budget=float(bp.mean()),
    )


def switching_tokens(arms: Sequence[int], l_after: Sequence[int]) -> int:
    """Sum over switches of tokens the newly selected drafter has not yet seen.

    ``l_after[t]`` is the cumulative token count after round ``t``. A drafter that
    was never used has seen only the prompt (position 0).
    """
    last_seen: dict = {}
    total = 0
    prev = None
    l_before = 0
    for t, a in enumerate(arms):
        a = int(a)
        if prev is not None and a != prev:
            total += l_before - last_seen.get(a, 0)
        l_after_t = int(l_after[t])
        last_seen[a] = l_after_t
        l_before = l_after_t
        prev = a
    return total


def switching_cost(trace, lam: float) -> float:
    if lam < 0:
        raise ValueError("switching cost lambda must be non-negative")
    return lam * trace.switch_tokens


def switching_regret(policy_traces: Sequence, oracle_traces: Sequence, lam: float) -> RegretReport:
    """Stopping regret with the mean lambda-weighted switching cost attached."""
    report = stopping_regret(policy_traces, oracle_traces)
    report.switching_term = float(np.mean([switching_cost(t, lam) for t in policy_traces]))
    return report


def regret_bound_leading_term(alphas: Sequence[float], n_max: int, budget_b: float, reward_kind) -> float:
    """Leading ``ln B`` term of the UCB regret bound for BD or BE rewards (constants dropped)."""
    kind = RewardKind.parse(reward_kind)
    alphas = [float(a) for a in alphas]
    if len(alphas) <= 1:
        return 0.0
    star = int(np.argmax(alphas))
    log_b = math.log(budget_b)
    total = 0.0
    flagged = []
    if kind is RewardKind.BD:
        for i, a in enumerate(alphas):
            if i == star:
                continue
            delta = alphas[star] - a
            if delta == 0:
                flagged.append(i)
                continue
            total += 8.0 / (n_max * delta**2) * log_b
    else:
        mu_star, var_star = be_stats(alphas[star], n_max)
        for i, a in enumerate(alphas):
            if i == star:
                continue
            delta = mu_star - be_stats(a, n_max)[0]
            if delta == 0:
                flagged.append(i)
                continue
            total += (32.0 * var_star + 16.0) / delta**2 * log_b
    if flagged:
        warnings.warn(f"arms {flagged} tie with the optimum and were excluded from the bound", RuntimeWarning)
    return total


def beta_regret_bound(alphas: Sequence[float], n_max: int, budget_b: float, beta: float) -> Optional[float]:
    """BD leading term scaled by ``beta^2``; ``None`` where the bound does not apply (beta <= 0.5)."""
    if beta <= 0.5:
        return None
    return beta**2 * regret_bound_leading_term(alphas, n_max, budget_b, RewardKind.BD)


class Lemma9Instance(NamedTuple):
    regret_bd_pi1: float
    regret_bd_pi2: float
    exp_tokens_pi1: float
    exp_tokens_pi2: float

    @property
    def inverted(self) -> bool:
        """pi2 wins on BD regret while pi1 wins on accepted tokens."""
        return self.regret_bd_pi2 < self.regret_bd_pi1 and self.exp_tokens_pi1 > self.exp_tokens_pi2


def lemma9_counterexample() -> Lemma9Instance:
    """Three drafters (0.1, 0.5, 0.8), n_max = 2, two rounds.

    pi1 plays drafter 1 then drafter 3; pi2 plays drafter 2 twice. Exact
    rational arithmetic keeps the reported numbers exact.
    """
    alphas = [Fraction(1, 10), Fraction(1, 2), Fraction(4, 5)]
    n = 2
    best = max(alphas)

    def tokens(a: Fraction) -> Fraction:
        return sum(a**j for j in range(1, n + 1))

    pi1, pi2 = [0, 2], [1, 1]
    return Lemma9Instance(
        float(sum(best - alphas[a] for a in pi1)),
        float(sum(best - alphas[a] for a in pi2)),
        float(sum(tokens(alphas[a]) for a in pi1)),
        float(sum(tokens(alphas[a]) for a in pi2)),
    )


def sample_variance_se(x: np.ndarray) -> tuple:
    """Sample variance and its standard error from the fourth central moment."""
    x = np.asarray(x, dtype=float)
    m = x.size
    c = x - x.mean()
    var = float((c * c).sum() / (m - 1))
    m4 = float((c**4).mean())
    return var, math.sqrt(max(m4 - var * var, 0.0) / m)
