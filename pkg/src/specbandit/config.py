"""Experiment configuration: JSON schema, validation, overrides and canned scenarios."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .env import BetaScaled, DrafterProfile, dist_from_dict
from .rewards import RewardKind

POLICY_KINDS = ("ucb", "exp3", "sh", "petc", "ducb", "swucb", "random", "oracle")
ENV_KINDS = ("rate", "categorical")

# mean BD alignment of the five drafters in the canned pools; arm 0 is best
STATIONARY_ALPHAS = (0.488, 0.294, 0.317, 0.288, 0.326)
SCENARIO_CONCENTRATION = 10.0


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class PolicySpec:
    kind: str = "ucb"
    beta: float = 0.01
    gamma: float = 0.4
    discount: float = 0.95
    window: Optional[int] = 100
    sh_budget: Optional[int] = None
    c: float = 20.0

    _FIELDS = {
        "ucb": ("beta",),
        "exp3": ("gamma",),
        "sh": ("sh_budget",),
        "petc": ("c",),
        "ducb": ("discount", "beta"),
        "swucb": ("window", "beta"),
        "random": (),
        "oracle": (),
    }

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for name in self._FIELDS[self.kind]:
            d[name] = getattr(self, name)
        return d


@dataclass(frozen=True)
class EnvSpec:
    kind: str = "rate"
    vocab: int = 16
    temperature: float = 1.0

    def to_dict(self) -> dict:
        if self.kind == "rate":
            return {"kind": "rate"}
        return {"kind": self.kind, "vocab": self.vocab, "temperature": self.temperature}


@dataclass(frozen=True)
class BudgetSpec:
    """Random target length ``B = offset + Geometric(p)`` (support starts at offset + 1)."""

    offset: int
    p: float

    @property
    def mean(self) -> float:
        return self.offset + 1.0 / self.p

    def draw(self, rng: np.random.Generator) -> int:
        return int(self.offset + rng.geometric(self.p))

    def to_dict(self) -> dict:
        return {"kind": "geometric", "offset": self.offset, "p": self.p}


@dataclass(frozen=True)
class ExperimentConfig:
    drafters: tuple
    n_max: int = 5
    budget: Union[int, BudgetSpec] = 2000
    policy: PolicySpec = field(default_factory=PolicySpec)
    reward: RewardKind = RewardKind.BD
    env: EnvSpec = field(default_factory=EnvSpec)
    replications: int = 200
    seed: int = 0
    lambda_switch: float = 0.0
    query_stream: Optional[int] = None
    query_shift: bool = False
    common_context: bool = False
    name: str = "custom"

    @property
    def k(self) -> int:
        return len(self.drafters)

    @property
    def mean_budget(self) -> float:
        return float(self.budget) if isinstance(self.budget, int) else self.budget.mean

    def with_policy(self, kind: str, **params) -> "ExperimentConfig":
        return replace(self, policy=replace(self.policy, kind=kind, **params))

    def query_profiles(self, q: int) -> tuple:
        """Drafter pool seen by query ``q``; with ``query_shift`` the pool rotates by ``q``."""
        if not self.query_shift or q == 0:
            return self.drafters
        k = self.k
        return tuple(
            DrafterProfile(i, self.drafters[(i + q) % k].dist, self.drafters[(i + q) % k].schedule)
            for i in range(k)
        )

    def to_dict(self) -> dict:
        drafters = []
        for p in self.drafters:
            d = {"dist": p.dist.to_dict()}
            if p.schedule:
                d["schedule"] = [{"round": r, "dist": dist.to_dict()} for r, dist in p.schedule]
            drafters.append(d)
        return {
            "name": self.name,
            "k": self.k,
            "n_max": self.n_max,
            "budget": self.budget if isinstance(self.budget, int) else self.budget.to_dict(),
            "drafters": drafters,
            "policy": self.policy.to_dict(),
            "reward": self.reward.value,
            "env": self.env.to_dict(),
            "replications": self.replications,
            "seed": self.seed,
            "lambda_switch": self.lambda_switch,
            "query_stream": self.query_stream,
            "query_shift": self.query_shift,
            "common_context": self.common_context,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        return parse_config(raw)


def _num(raw: dict, key: str, default, cast, path: str):
    if key not in raw or raw[key] is None:
        return default
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if cast is int and float(value) != int(value):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return cast(value)


def _parse_policy(raw, k: int) -> PolicySpec:
    if raw is None:
        raw = {}
    if isinstance(raw, str):
        raw = {"kind": raw}
    kind = str(raw.get("kind", "ucb")).lower()
    if kind not in POLICY_KINDS:
        raise ConfigError("policy.kind", f"unknown policy {kind!r}; choose from {', '.join(POLICY_KINDS)}")
    spec = PolicySpec(
        kind=kind,
        beta=_num(raw, "beta", 0.01, float, "policy.beta"),
        gamma=_num(raw, "gamma", 0.4, float, "policy.gamma"),
        discount=_num(raw, "discount", 0.95, float, "policy.discount"),
        window=_num(raw, "window", 100, int, "policy.window") if raw.get("window", 0) is not None else None,
        sh_budget=_num(raw, "sh_budget", None, int, "policy.sh_budget"),
        c=_num(raw, "c", 20.0, float, "policy.c"),
    )
    if spec.beta < 0:
        raise ConfigError("policy.beta", "must be >= 0")
    if not 0 < spec.gamma <= 1:
        raise ConfigError("policy.gamma", "must lie in (0, 1]")
    if not 0 < spec.discount <= 1:
        raise ConfigError("policy.discount", "must lie in (0, 1]")
    if spec.window is not None and spec.window < k:
        raise ConfigError("policy.window", f"must be >= k={k}")
    if spec.sh_budget is not None and spec.sh_budget < 1:
        raise ConfigError("policy.sh_budget", "must be >= 1")
    if spec.c <= 0:
        raise ConfigError("policy.c", "must be > 0")
    return spec


def _parse_drafter(raw, i: int) -> DrafterProfile:
    path = f"drafters[{i}]"
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        raw = {"dist": {"kind": "point", "alpha": raw}}
    if not isinstance(raw, dict) or "dist" not in raw:
        raise ConfigError(path, "expected an object with a 'dist' entry")
    try:
        dist = dist_from_dict(raw["dist"])
        schedule = tuple((int(s["round"]), dist_from_dict(s["dist"])) for s in raw.get("schedule", []))
        return DrafterProfile(i, dist, schedule)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None


def _parse_budget(raw):
    if isinstance(raw, dict):
        if raw.get("kind") != "geometric":
            raise ConfigError("budget.kind", "only 'geometric' random budgets are supported")
        offset = _num(raw, "offset", 0, int, "budget.offset")
        p = _num(raw, "p", None, float, "budget.p")
        if p is None or not 0 < p <= 1:
            raise ConfigError("budget.p", "must lie in (0, 1]")
        if offset < 0:
            raise ConfigError("budget.offset", "must be >= 0")
        return BudgetSpec(offset, p)
    b = _num({"budget": raw}, "budget", None, int, "budget")
    if b is None or b < 1:
        raise ConfigError("budget", "must be an integer >= 1")
    return b


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a JSON object")
    drafters_raw = raw.get("drafters")
    if not drafters_raw:
        raise ConfigError("drafters", "at least one drafter is required")
    drafters = tuple(_parse_drafter(d, i) for i, d in enumerate(drafters_raw))
    k = len(drafters)
    if raw.get("k") is not None and raw["k"] != k:
        raise ConfigError("k", f"k={raw['k']} but {k} drafters were given")
    n_max = _num(raw, "n_max", 5, int, "n_max")
    if n_max < 1:
        raise ConfigError("n_max", f"must be >= 1, got {n_max}")
    budget = _parse_budget(raw.get("budget", 2000))
    try:
        reward = RewardKind.parse(raw.get("reward", "bd"))
    except ValueError as exc:
        raise ConfigError("reward", str(exc)) from None
    env_raw = raw.get("env") or {"kind": "rate"}
    if isinstance(env_raw, str):
        env_raw = {"kind": env_raw}
    env_kind = str(env_raw.get("kind", "rate")).lower()
    if env_kind not in ENV_KINDS:
        raise ConfigError("env.kind", f"unknown environment {env_kind!r}")
    env = EnvSpec(
        env_kind,
        _num(env_raw, "vocab", 16, int, "env.vocab"),
        _num(env_raw, "temperature", 1.0, float, "env.temperature"),
    )
    if env.kind == "categorical":
        if env.vocab < 4:
            raise ConfigError("env.vocab", "must be >= 4")
        if env.temperature < 0:
            raise ConfigError("env.temperature", "must be >= 0")
        if any(d.schedule for d in drafters):
            raise ConfigError("drafters", "schedules are only supported by the rate environment")
    replications = _num(raw, "replications", 200, int, "replications")
    if replications < 1:
        raise ConfigError("replications", "must be >= 1")
    seed = _num(raw, "seed", 0, int, "seed")
    if not 0 <= seed < 2**64:
        raise ConfigError("seed", "must be an unsigned 64-bit integer")
    lam = _num(raw, "lambda_switch", 0.0, float, "lambda_switch")
    if lam < 0 or not math.isfinite(lam):
        raise ConfigError("lambda_switch", "must be a finite number >= 0")
    qs = raw.get("query_stream")
    if qs is not None:
        qs = _num(raw, "query_stream", None, int, "query_stream")
        if qs < 1:
            raise ConfigError("query_stream", "must be >= 1")
    return ExperimentConfig(
        drafters=drafters,
        n_max=n_max,
        budget=budget,
        policy=_parse_policy(raw.get("policy"), k),
        reward=reward,
        env=env,
        replications=replications,
        seed=seed,
        lambda_switch=lam,
        query_stream=qs,
        query_shift=bool(raw.get("query_shift", False)),
        common_context=bool(raw.get("common_context", False)),
        name=str(raw.get("name", "custom")),
    )


def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``a.b.c=value`` overrides to a raw config dict (values parsed as JSON when possible)."""
    out = copy.deepcopy(raw)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError("override", f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = out
        for part in parts[:-1]:
            if isinstance(node, list):
                node = node[int(part)]
                continue
            if not isinstance(node.get(part), (dict, list)):
                node[part] = {} if node.get(part) is None else {"kind": node[part]}
            node = node[part]
        if isinstance(node, list):
            node[int(parts[-1])] = _coerce(value)
        else:
            node[parts[-1]] = _coerce(value)
    return out


def load_config(path, overrides=None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path} is not valid JSON ({exc})") from None
    return parse_config(apply_overrides(raw, overrides))


def _beta_pool(alphas, concentration=SCENARIO_CONCENTRATION) -> list:
    return [{"dist": BetaScaled.from_mean(a, concentration).to_dict()} for a in alphas]


def scenario_dict(name: str, flip_round: int = 200) -> dict:
    """Raw config dict of a canned scenario."""
    base = {
        "name": name,
        "n_max": 5,
        "drafters": _beta_pool(STATIONARY_ALPHAS),
        "policy": {"kind": "ucb", "beta": 0.01},
        "reward": "bd",
        "replications": 200,
        "seed": 0,
    }
    if name == "stationary_k5":
        base["budget"] = 2000
    elif name == "piecewise_flip":
        base["budget"] = 2000
        best = int(np.argmax(STATIONARY_ALPHAS))
        second = int(np.argsort(STATIONARY_ALPHAS)[-2])
        pool = base["drafters"]
        pool[best]["schedule"] = [{"round": flip_round, "dist": pool[second]["dist"]}]
        pool[second]["schedule"] = [{"round": flip_round, "dist": pool[best]["dist"]}]
    elif name == "query_stream":
        base["budget"] = 500
        base["query_stream"] = 10
        base["query_shift"] = True
    elif name == "switching_cost":
        base["budget"] = 10000
        base["policy"] = {"kind": "petc", "c": 20.0}
        base["lambda_switch"] = 0.05
    else:
        raise ConfigError("scenario", f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    return base


SCENARIOS = ("stationary_k5", "piecewise_flip", "query_stream", "switching_cost")


def make_scenario(name: str, **kwargs) -> ExperimentConfig:
    return parse_config(scenario_dict(name, **kwargs))
