"""Self-check suite: closed forms against enumeration and simulation.

Every check resolves the analytics functions through the module at call time,
so a monkeypatched (deliberately broken) formula is caught by the suite.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from . import analytics
from .env import BetaScaled, DrafterProfile, PointMass, make_categorical_env, sample_rate_rounds, step_dist_env

ALPHA_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))
N_GRID = tuple(range(1, 9))
MC_ALPHAS = (0.1, 0.3, 0.5, 0.7, 0.9)
MC_NS = (2, 5, 8)
SEED = 20240601


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _enumerate(alpha: float, n: int) -> tuple:
    """Mean and variance of N_acc by summing over the n + 1 stopping outcomes."""
    probs = [alpha**j * (1 - alpha) for j in range(n)] + [alpha**n]
    mean = sum(j * p for j, p in enumerate(probs))
    second = sum(j * j * p for j, p in enumerate(probs))
    return mean, second - mean * mean


def check_expected_nacc() -> tuple:
    worst = 0.0
    for a in ALPHA_GRID + (0.0, 1.0, 1 - 1e-9):
        for n in N_GRID:
            worst = max(worst, abs(analytics.expected_nacc(a, n) - _enumerate(a, n)[0]))
    return worst <= 1e-12, f"max |closed form - enumeration| = {worst:.2e}"


def check_var_nacc() -> tuple:
    worst = 0.0
    for a in ALPHA_GRID + (0.0, 1.0):
        for n in N_GRID:
            worst = max(worst, abs(analytics.var_nacc(a, n) - _enumerate(a, n)[1]))
    # this point goes through the near-one branch
    worst_edge = max(abs(analytics.var_nacc(1 - 1e-9, n) - _enumerate(1 - 1e-9, n)[1]) for n in N_GRID)
    ok = worst <= 1e-12 and worst_edge <= 1e-9
    return ok, f"max error {worst:.2e} on grid, {worst_edge:.2e} at alpha=1-1e-9"


def check_nacc_monte_carlo(rounds: int = 200_000) -> tuple:
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for a in MC_ALPHAS:
        for n in MC_NS:
            x, _, _ = sample_rate_rounds(PointMass(a), n, rounds, rng)
            x = x.astype(float)
            se_mean = x.std(ddof=1) / math.sqrt(rounds)
            var, se_var = analytics.sample_variance_se(x)
            z_mean = abs(x.mean() - analytics.expected_nacc(a, n)) / se_mean
            z_var = abs(var - analytics.var_nacc(a, n)) / se_var
            worst = max(worst, z_mean, z_var)
    return worst <= 4.0, f"max |z| = {worst:.2f} over {len(MC_ALPHAS) * len(MC_NS)} configs"


def check_be_bd_identity(rounds: int = 200_000) -> tuple:
    worst_exact = 0.0
    for a in ALPHA_GRID:
        for n in N_GRID:
            mean_be, _ = analytics.be_stats(a, n)
            mean_bd, _ = analytics.bd_stats(PointMass(a), n)
            worst_exact = max(worst_exact, abs(mean_be * n * (1 - a) - (1 - a**n) * mean_bd))
    rng = np.random.default_rng(SEED + 1)
    worst_z = 0.0
    for a in MC_ALPHAS:
        for n in MC_NS:
            nacc, bd, _ = sample_rate_rounds(PointMass(a), n, rounds, rng)
            lhs = nacc / n * n * (1 - a)
            se = lhs.std(ddof=1) / math.sqrt(rounds)
            worst_z = max(worst_z, abs(lhs.mean() - (1 - a**n) * bd.mean()) / se)
    ok = worst_exact <= 1e-12 and worst_z <= 4.0
    return ok, f"analytic error {worst_exact:.2e}; empirical max |z| = {worst_z:.2f}"


def bd_variance_dists() -> list:
    dists = [BetaScaled(1.0, 1.0), BetaScaled(0.5, 0.5), BetaScaled(0.2, 0.2, 0.1, 0.9)]
    for a in MC_ALPHAS:
        for conc in (0.5, 2.0, 30.0):
            dists.append(BetaScaled.from_mean(a, conc))
    return dists


def check_bd_variance_bound(rounds: int = 100_000) -> tuple:
    rng = np.random.default_rng(SEED + 2)
    worst = -math.inf
    for dist in bd_variance_dists():
        for n in MC_NS:
            _, bd, _ = sample_rate_rounds(dist, n, rounds, rng)
            var, se = analytics.sample_variance_se(bd)
            bound = 1.0 / (4 * n)
            _, stated = analytics.bd_stats(dist, n)
            if stated > bound:
                return False, f"bd_stats bound {stated} exceeds 1/(4n) for {dist}"
            worst = max(worst, (var - bound) / se)
    return worst <= 4.0, f"max (Var - 1/(4n)) / SE = {worst:.2f}"


def check_bd_condition_interval(step: float = 0.005) -> tuple:
    grid, mask = analytics.theorem1_interval(5, step)
    held = grid[mask]
    inside = (grid >= 0.07 - 1e-9) & (grid <= 0.79 + 1e-9)
    ok = bool(mask[inside].all())
    for a in (0.05, 0.85):
        ok &= not analytics.theorem1_condition(a, 5)
    return ok, f"condition holds on [{held.min():.3f}, {held.max():.3f}] at n=5"


def check_bd_signal_bound() -> tuple:
    """R(BD) >= 4 Delta^2 n using the 1/(4n) BD variance bound, in exact arithmetic."""
    failures = 0
    total = 0
    for n in N_GRID:
        var = Fraction(1, 4 * n)
        for star in ALPHA_GRID:
            for a in ALPHA_GRID:
                if a >= star:
                    continue
                delta = Fraction(star) - Fraction(a)
                total += 1
                if analytics.feedback_signal(delta, var, var) < 4 * delta * delta * n:
                    failures += 1
    return failures == 0, f"{total - failures}/{total} configs satisfy the bound"


def check_lossless(tokens: int = 100_000, tol: float = 0.02) -> tuple:
    rng = np.random.default_rng(SEED + 3)
    env = make_categorical_env(16, [0.6], rng, temperature=1.0)
    counts = np.zeros(16)
    seen = 0
    while seen < tokens:
        out = step_dist_env(env, 0, 5, rng)
        for x in out.emitted[: tokens - seen]:
            counts[x] += 1
        seen += min(len(out.emitted), tokens - seen)
    tv = 0.5 * np.abs(counts / counts.sum() - env.target).sum()
    return tv <= tol, f"TV(empirical, target) = {tv:.4f} over {tokens} tokens"


def simulate_single_arm(alpha: float, n_max: int, budget_b: int, reps: int, rng: np.random.Generator) -> tuple:
    """Stopping times and final token counts for ``reps`` single-drafter episodes."""
    rate = 1.0 / analytics.tokens_per_round(alpha, n_max)
    rounds = int(budget_b * rate * 1.2) + 50
    taus = np.empty(reps, dtype=np.int64)
    finals = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        nacc, _, _ = sample_rate_rounds(PointMass(alpha), n_max, rounds, rng)
        l = np.cumsum(nacc + 1)
        while l[-1] < budget_b:
            more, _, _ = sample_rate_rounds(PointMass(alpha), n_max, rounds, rng)
            l = np.concatenate([l, l[-1] + np.cumsum(more + 1)])
        t = int(np.searchsorted(l, budget_b))
        taus[r] = t + 1
        finals[r] = l[t]
    return taus, finals


def stopping_time_estimate(alpha: float, n_max: int, budget_b: int, reps: int, seed: int) -> dict:
    """Naive mean of tau plus the renewal estimate mean(final tokens) / E[tokens per round]."""
    taus, finals = simulate_single_arm(alpha, n_max, budget_b, reps, np.random.default_rng(seed))
    mu = analytics.tokens_per_round(alpha, n_max)
    lo, hi = analytics.single_arm_stopping_bounds(alpha, n_max, budget_b)
    return {
        "naive": float(taus.mean()),
        "naive_se": float(taus.std(ddof=1) / math.sqrt(reps)),
        "renewal": float(finals.mean() / mu),
        "renewal_se": float(finals.std(ddof=1) / mu / math.sqrt(reps)),
        "lower": lo,
        "upper": hi,
    }


def check_stopping_time_bounds(alpha: float = 0.5, n_max: int = 2, budget_b: int = 10_000, reps: int = 1000) -> tuple:
    est = stopping_time_estimate(alpha, n_max, budget_b, reps, SEED + 4)
    ok = est["lower"] < est["renewal"] < est["upper"]
    return ok, (
        f"alpha={alpha}, n={n_max}, B={budget_b}: E[tau] ~ {est['renewal']:.3f} "
        f"(naive {est['naive']:.2f}) in ({est['lower']:.3f}, {est['upper']:.3f})"
    )


def check_objective_mismatch() -> tuple:
    inst = analytics.lemma9_counterexample()
    ok = tuple(inst) == (0.7, 0.6, 1.55, 1.50) and inst.inverted
    return ok, f"{tuple(round(v, 12) for v in inst)}, inverted={inst.inverted}"


def check_token_conservation() -> tuple:
    from .config import ExperimentConfig, PolicySpec

    drafters = tuple(DrafterProfile(i, BetaScaled.from_mean(a, 5.0)) for i, a in enumerate((0.2, 0.5, 0.8)))
    bad = 0
    count = 0
    for kind in ("ucb", "exp3", "petc", "random"):
        cfg = ExperimentConfig(drafters=drafters, n_max=4, budget=997, policy=PolicySpec(kind), seed=SEED)
        from .harness import run_episode

        for rep in range(5):
            tr = run_episode(cfg, rep)
            count += 1
            consumed = tr.tau + int(tr.n_acc.sum())
            if consumed != tr.final_tokens or not 0 <= tr.final_tokens - tr.budget < cfg.n_max + 1:
                bad += 1
    return bad == 0, f"{count - bad}/{count} episodes conserve tokens"


CHECKS: dict = {
    "expected_nacc": check_expected_nacc,
    "var_nacc": check_var_nacc,
    "nacc_monte_carlo": check_nacc_monte_carlo,
    "be_bd_identity": check_be_bd_identity,
    "bd_variance_bound": check_bd_variance_bound,
    "bd_condition_interval": check_bd_condition_interval,
    "bd_signal_bound": check_bd_signal_bound,
    "lossless": check_lossless,
    "stopping_time_bounds": check_stopping_time_bounds,
    "objective_mismatch": check_objective_mismatch,
    "token_conservation": check_token_conservation,
}


def run_checks(names: Optional[Sequence[str]] = None, echo: Optional[Callable[[str], None]] = None) -> list:
    names = list(CHECKS) if not names else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown checks: {', '.join(unknown)}; available: {', '.join(CHECKS)}")
    results = []
    for name in names:
        start = time.perf_counter()
        try:
            ok, detail = CHECKS[name]()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        res = CheckResult(name, bool(ok), detail, time.perf_counter() - start)
        results.append(res)
        if echo:
            echo(format_row(res))
    return results


def format_row(res: CheckResult) -> str:
    return f"{'PASS' if res.passed else 'FAIL'}  {res.name:<20} {res.seconds:6.2f}s  {res.detail}"
