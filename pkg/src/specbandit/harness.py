"""Seeded, replicated simulation of drafter-selection policies.

Randomness layout per replication ``r`` and query ``q`` (all derived from the
config seed): each drafter owns its own stream, so a policy run and its paired
oracle run see the same draws for the j-th pull of a given drafter.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analytics import RegretReport, switching_regret, switching_tokens
from .config import ExperimentConfig
from .env import accepted_counts, make_categorical_env, sample_rate_rounds, step_dist_env
from .policies import (
    EXP3,
    PETC,
    UCB,
    DiscountedUCB,
    OraclePolicy,
    RandomPolicy,
    SequentialHalving,
    SlidingWindowUCB,
)
from .rewards import RewardKind

_ARM_STREAM, _POLICY_STREAM, _CONTEXT_STREAM, _BUDGET_STREAM, _ENV_STREAM = 0, 1, 2, 3, 4
_CHUNK = 256


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng([int(x) for x in key])


class _RateArm:
    """Per-drafter stream of rate-level rounds, drawn in fixed-size blocks."""

    def __init__(self, profile, n_max: int, rng: np.random.Generator):
        self.profile = profile
        self.n_max = n_max
        self.rng = rng
        self._nacc: list = []
        self._bd: list = []
        self._pos = 0

    def _refill(self) -> None:
        n, bd, _ = sample_rate_rounds(self.profile.dist, self.n_max, _CHUNK, self.rng)
        self._nacc = n.tolist()
        self._bd = bd.tolist()
        self._pos = 0

    def pull(self, t: int) -> tuple:
        if not self.profile.stationary:
            n, bd, _ = sample_rate_rounds(self.profile.active(t), self.n_max, 1, self.rng)
            return int(n[0]), float(bd[0])
        if self._pos == len(self._nacc):
            self._refill()
        i = self._pos
        self._pos += 1
        return self._nacc[i], self._bd[i]

    def run_until(self, budget_b: int) -> tuple:
        """Play this arm alone until ``budget_b`` tokens; same draws as repeated ``pull``."""
        naccs, bds = [], []
        total = 0
        while total < budget_b:
            n, bd, _ = sample_rate_rounds(self.profile.dist, self.n_max, _CHUNK, self.rng)
            naccs.append(n)
            bds.append(bd)
            total += int(n.sum()) + _CHUNK
        n_acc = np.concatenate(naccs)
        l = np.cumsum(n_acc + 1)
        tau = int(np.searchsorted(l, budget_b)) + 1
        return n_acc[:tau], np.concatenate(bds)[:tau], l[:tau]


class _ContextStream:
    """Shared per-round uniforms: drafters are coupled through common quantiles."""

    def __init__(self, profiles, n_max: int, rng: np.random.Generator):
        self.profiles = profiles
        self.n_max = n_max
        self.rng = rng

    def pull(self, arm: int, t: int) -> tuple:
        u_alpha = self.rng.random(self.n_max)
        u_acc = self.rng.random(self.n_max)
        alphas = self.profiles[arm].active(t).ppf(u_alpha)
        return int(accepted_counts(alphas, u_acc)), float(alphas.mean())


class _DistArm:
    def __init__(self, env, index: int, n_max: int, rng: np.random.Generator):
        self.env, self.index, self.n_max, self.rng = env, index, n_max, rng
        self.degenerate = 0

    def pull(self, t: int) -> tuple:
        out = step_dist_env(self.env, self.index, self.n_max, self.rng)
        self.degenerate += out.degenerate
        return out.n_acc, out.bd_reward


@dataclass
class EpisodeTrace:
    arms: np.ndarray
    n_acc: np.ndarray
    bd: np.ndarray
    l: np.ndarray  # cumulative tokens after each round
    best: np.ndarray  # true best arm at each round
    n_max: int
    budget: int
    query_starts: tuple = (0,)
    policy_resets: int = 1
    degenerate_rounds: int = 0
    commit_tokens: Optional[int] = None
    switch_tokens: int = field(init=False)

    def __post_init__(self):
        self.switch_tokens = sum(
            switching_tokens(self.arms[s:e], self.l[s:e] - (self.l[s - 1] if s else 0))
            for s, e in self._segments()
        )

    def _segments(self):
        bounds = list(self.query_starts) + [len(self.arms)]
        return list(zip(bounds[:-1], bounds[1:]))

    @property
    def tau(self) -> int:
        return len(self.arms)

    @property
    def final_tokens(self) -> int:
        return int(self.l[-1]) if len(self.l) else 0

    @property
    def be(self) -> np.ndarray:
        return self.n_acc / self.n_max

    @property
    def switched(self) -> np.ndarray:
        s = np.zeros(len(self.arms), dtype=bool)
        s[1:] = self.arms[1:] != self.arms[:-1]
        s[list(self.query_starts)] = False
        return s

    @property
    def hits(self) -> np.ndarray:
        return self.arms == self.best

    def summary(self) -> "EpisodeSummary":
        return EpisodeSummary(
            tau=self.tau,
            final_tokens=self.final_tokens,
            budget=self.budget,
            switch_tokens=self.switch_tokens,
            hits=self.hits,
            total_n_acc=int(self.n_acc.sum()),
        )


@dataclass
class EpisodeSummary:
    """Compact stand-in for a trace when per-round records are not kept."""

    tau: int
    final_tokens: int
    budget: int
    switch_tokens: int
    hits: np.ndarray
    total_n_acc: int


def replication_budget(config: ExperimentConfig, replication_index: int) -> int:
    if isinstance(config.budget, int):
        return config.budget
    return config.budget.draw(_rng(config.seed, replication_index, _BUDGET_STREAM))


def build_policy(config: ExperimentConfig, profiles, rng, budget_b: int):
    spec, k = config.policy, config.k
    if spec.kind == "ucb":
        return UCB(k, spec.beta)
    if spec.kind == "exp3":
        return EXP3(k, spec.gamma, rng)
    if spec.kind == "sh":
        return SequentialHalving(k, spec.sh_budget or 20 * k)
    if spec.kind == "petc":
        return PETC(k, budget_b, config.n_max, spec.c)
    if spec.kind == "ducb":
        return DiscountedUCB(k, spec.discount, spec.beta)
    if spec.kind == "swucb":
        return SlidingWindowUCB(k, spec.window, spec.beta)
    if spec.kind == "random":
        return RandomPolicy(k, rng)
    if spec.kind == "oracle":
        return OraclePolicy(profiles)
    raise ValueError(f"unknown policy {spec.kind!r}")


def _categorical_env(config: ExperimentConfig):
    alphas = [p.dist.mean for p in config.drafters]
    return make_categorical_env(config.env.vocab, alphas, _rng(config.seed, _ENV_STREAM), config.env.temperature)


def run_episode(config: ExperimentConfig, replication_index: int, env=None) -> EpisodeTrace:
    """Run one replication: select, step, reward, update until ``B`` tokens per query."""
    budget_b = replication_budget(config, replication_index)
    n_max = config.n_max
    use_bd = config.reward is RewardKind.BD
    if config.env.kind == "categorical" and env is None:
        env = _categorical_env(config)
    arms, naccs, bds, ls, best = [], [], [], [], []
    query_starts = []
    resets = 0
    degenerate = 0
    commit_tokens = None
    total_l = 0
    for q in range(config.query_stream or 1):
        key = (config.seed, replication_index, q)
        profiles = config.query_profiles(q)
        oracle = OraclePolicy(profiles)
        policy = build_policy(config, profiles, _rng(*key, _POLICY_STREAM), budget_b)
        resets += 1
        query_starts.append(len(arms))
        if config.env.kind == "categorical":
            order = [(p.id + q) % config.k if config.query_shift else p.id for p in profiles]
            streams = [_DistArm(env, order[i], n_max, _rng(*key, _ARM_STREAM, i)) for i in range(config.k)]
            pull = lambda a, t: streams[a].pull(t)  # noqa: E731
        elif config.common_context:
            ctx = _ContextStream(profiles, n_max, _rng(*key, _CONTEXT_STREAM))
            pull = ctx.pull
            streams = []
        else:
            streams = [_RateArm(p, n_max, _rng(*key, _ARM_STREAM, i)) for i, p in enumerate(profiles)]
            pull = lambda a, t: streams[a].pull(t)  # noqa: E731

        static = all(p.stationary for p in profiles)
        if static and streams and isinstance(policy, OraclePolicy) and isinstance(streams[0], _RateArm):
            a = policy.select(0)
            n_acc, bd, l = streams[a].run_until(budget_b)
            t = len(n_acc)
            arms.extend([a] * t)
            naccs.extend(n_acc.tolist())
            bds.extend(bd.tolist())
            ls.extend((l + total_l).tolist())
            best.extend([a] * t)
            total_l += int(l[-1])
            continue
        l = 0
        t = 0
        select, update = policy.select, policy.update
        append_arm, append_n, append_bd, append_l = arms.append, naccs.append, bds.append, ls.append
        while l < budget_b:
            a = select(t, l)
            n, bd = pull(a, t)
            update(a, bd if use_bd else n / n_max, n + 1)
            l += n + 1
            append_arm(a)
            append_n(n)
            append_bd(bd)
            append_l(total_l + l)
            t += 1
        if static:
            best.extend([oracle.select(0)] * t)
        else:
            best.extend(oracle.select(s) for s in range(t))
        total_l += l
        degenerate += sum(getattr(s, "degenerate", 0) for s in streams)
        if isinstance(policy, PETC) and commit_tokens is None:
            commit_tokens = policy.commit_tokens
    return EpisodeTrace(
        arms=np.asarray(arms, dtype=np.int64),
        n_acc=np.asarray(naccs, dtype=np.int64),
        bd=np.asarray(bds, dtype=float),
        l=np.asarray(ls, dtype=np.int64),
        best=np.asarray(best, dtype=np.int64),
        n_max=n_max,
        budget=budget_b,
        query_starts=tuple(query_starts),
        policy_resets=resets,
        degenerate_rounds=degenerate,
        commit_tokens=commit_tokens,
    )


@dataclass
class BestArmCurve:
    ratio: np.ndarray
    active: np.ndarray

    @property
    def se(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            se = np.sqrt(self.ratio * (1.0 - self.ratio) / self.active)
        return np.nan_to_num(se)

    def __len__(self) -> int:
        return len(self.ratio)

    def rounds_to(self, threshold: float, hold: int = 20) -> Optional[int]:
        """First round from which the ratio stays >= ``threshold`` for ``hold`` rounds.

        Requiring a run of rounds keeps the forced first pull of arm 0 from
        counting as convergence. Returns None if it never happens.
        """
        hold = max(1, min(hold, len(self.ratio)))
        ok = self.ratio >= threshold
        run = np.convolve(ok.astype(np.int64), np.ones(hold, dtype=np.int64), mode="valid")
        idx = np.flatnonzero(run == hold)
        return int(idx[0]) if idx.size else None


def best_arm_curve(traces: Sequence) -> BestArmCurve:
    """Per-round fraction of still-running replications that played the true best arm."""
    horizon = max(len(t.hits) for t in traces)
    hits = np.zeros(horizon)
    active = np.zeros(horizon, dtype=np.int64)
    for tr in traces:
        h = np.asarray(tr.hits)
        hits[: len(h)] += h
        active[: len(h)] += 1
    return BestArmCurve(hits / active, active)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    report: RegretReport
    curve: BestArmCurve
    traces: list
    oracle_traces: list


def _replicate(config: ExperimentConfig, keep_traces: bool, replication_index: int):
    env = _categorical_env(config) if config.env.kind == "categorical" else None
    trace = run_episode(config, replication_index, env)
    if config.policy.kind == "oracle":
        oracle = trace
    else:
        oracle = run_episode(config.with_policy("oracle"), replication_index, env)
    if keep_traces:
        return trace, oracle
    return trace.summary(), oracle.summary()


def run_replications(config: ExperimentConfig, jobs: int = 1, keep_traces: bool = True) -> list:
    work = partial(_replicate, config, keep_traces)
    reps = range(config.replications)
    if jobs > 1 and config.replications > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(work, reps, chunksize=max(1, config.replications // (4 * jobs))))
    return [work(r) for r in reps]


def run_experiment(config: ExperimentConfig, jobs: int = 1, keep_traces: bool = True) -> ExperimentResult:
    """Policy runs paired with oracle runs on matched seeds, plus aggregates."""
    pairs = run_replications(config, jobs, keep_traces)
    traces = [p for p, _ in pairs]
    oracle = [o for _, o in pairs]
    report = switching_regret(traces, oracle, config.lambda_switch)
    return ExperimentResult(config, report, best_arm_curve(traces), traces, oracle)


def _git_commit() -> Optional[str]:
    head = os.path.join(os.path.dirname(__file__), "..", "..", ".git", "HEAD")
    try:
        with open(head) as fh:
            ref = fh.read().strip()
        if ref.startswith("ref:"):
            with open(os.path.join(os.path.dirname(head), ref[5:])) as fh:
                return fh.read().strip()
        return ref
    except OSError:
        return None


def results_payload(result: ExperimentResult, extra: Optional[dict] = None) -> dict:
    cfg = result.config.to_dict()
    r = result.report
    payload = {
        "config": cfg,
        "policy_mean_rounds": r.policy_mean_rounds,
        "oracle_mean_rounds": r.oracle_mean_rounds,
        "stopping_regret": r.stopping_regret,
        "std_err": r.std_err,
        "unpaired_std_err": r.unpaired_std_err,
        "switching_term": r.switching_term,
        "replications": r.replications,
        "seed": result.config.seed,
        "mean_budget": r.mean_budget,
        "run": {
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "version": __version__,
            "git_commit": _git_commit(),
            "config_sha256": hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest(),
        },
    }
    if extra:
        payload.update(extra)
    return payload


def _open(path: str):
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_curve_csv(curve: BestArmCurve, path: str) -> None:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round", "best_arm_ratio", "active_replications", "se"])
        for t, (r, a, s) in enumerate(zip(curve.ratio.tolist(), curve.active.tolist(), curve.se.tolist())):
            w.writerow([t, repr(r), a, repr(s)])


def write_traces_csv(traces: Sequence[EpisodeTrace], path: str) -> None:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replication", "round", "arm", "n_acc", "be", "bd", "l", "switched"])
        for rep, tr in enumerate(traces):
            be = tr.be.tolist()
            for t, (a, n, bd, l, s) in enumerate(
                zip(tr.arms.tolist(), tr.n_acc.tolist(), tr.bd.tolist(), tr.l.tolist(), tr.switched.tolist())
            ):
                w.writerow([rep, t, a, n, repr(be[t]), repr(bd), l, int(s)])


def write_results(
    result: ExperimentResult,
    out_dir: str,
    traces: bool = False,
    plot: bool = True,
    extra: Optional[dict] = None,
) -> list:
    """Write results.json, curve.csv and optionally traces.csv / plot.svg; returns the paths."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc.strerror or exc}") from exc
    written = []
    path = os.path.join(out_dir, "results.json")
    with _open(path) as fh:
        json.dump(results_payload(result, extra), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(path)
    path = os.path.join(out_dir, "curve.csv")
    write_curve_csv(result.curve, path)
    written.append(path)
    if traces:
        if not isinstance(result.traces[0], EpisodeTrace):
            raise ValueError("per-round traces were not kept for this experiment")
        path = os.path.join(out_dir, "traces.csv")
        write_traces_csv(result.traces, path)
        written.append(path)
    if plot:
        from .plotting import plot_best_arm_curves

        path = os.path.join(out_dir, "plot.svg")
        plot_best_arm_curves({result.config.policy.kind: result.curve}, path)
        written.append(path)
    return written
