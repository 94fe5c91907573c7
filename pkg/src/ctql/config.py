"""Experiment configuration.

A configuration is a YAML mapping. Every key is optional; omitted keys take
the benchmark defaults below, so an empty file reproduces the standard
protocol. Unknown keys are rejected. A run manifest (``manifest.json``) is
also accepted and replays the configuration it recorded.

    seed: 0
    sessions: 10
    episodes: 10000
    horizon: 400
    reward: distance            # distance | gym
    algorithms: [QL, CTQL, pCTQL]   # pCTQL expands over `betas`; "pCTQL:0.99" picks one
                                    # default drops CTQL when reward is gym
    betas: [0.9990, 0.9948, 0.9897, 0.9485, 0.8969]
    discount: 0.97
    eps_rl: 0.03
    eps_tutor: 0.03
    lr_scale: 1000.0
    gain: [5.83, 1.83]
    mass: 1.0
    length: 1.0
    gravity: 10.0
    sample_time: 0.05
    integrator: forward-euler   # forward-euler | semi-implicit
    tutor_input: quantized      # quantized | continuous
    noise_std: 0.0
    x0: [3.141592653589793, 0.0]
    eta: 0.4296...              # 0.05 * |[pi, 8]|
    n_minus: 300
    prize_value: 5.0
    prize_radius: 0.05
    unsafe: false               # allow CTQL with the gym reward
    robustness:
      setups: 1000
      factor_range: [0.95, 1.05]
      angle_range: [-3.141592653589793, 3.141592653589793]
      velocity_range: [-8.0, 8.0]
      seed: null                # defaults to `seed`
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path

import yaml

from .algorithms import KINDS, PAPER_BETAS, REWARDS, TUTOR_INPUTS, AlgorithmConfig, RewardParams
from .dynamics import DEFAULT_INTEGRATOR, INTEGRATORS, PendulumParams
from .experiment import BenchmarkPlan, RobustnessPlan
from .metrics import GoalSpec
from .policies import Hyperparams, TutorGain


class ConfigError(ValueError):
    pass


def _number(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"expected a number, got {v!r}")
    if not math.isfinite(v):
        raise ValueError(f"expected a finite number, got {v!r}")
    return float(v)


def _positive(v):
    v = _number(v)
    if v <= 0:
        raise ValueError(f"must be positive, got {v}")
    return v


def _nonneg(v):
    v = _number(v)
    if v < 0:
        raise ValueError(f"must be non-negative, got {v}")
    return v


def _count(v):
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ValueError(f"expected a positive integer, got {v!r}")
    return v


def _seed(v):
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise ValueError(f"expected a non-negative integer seed, got {v!r}")
    return v


def _probability(v):
    v = _number(v)
    if not 0 <= v < 1:
        raise ValueError(f"must be in [0, 1), got {v}")
    return v


def _unit_interval(v):
    v = _number(v)
    if not 0 <= v <= 1:
        raise ValueError(f"must be in [0, 1], got {v}")
    return v


def _discount(v):
    v = _number(v)
    if not 0 < v <= 1:
        raise ValueError(f"must be in (0, 1], got {v}")
    return v


def _choice(options):
    def check(v):
        if v not in options:
            raise ValueError(f"must be one of {list(options)}, got {v!r}")
        return v
    return check


def _pair(item=_number):
    def check(v):
        if not isinstance(v, (list, tuple)) or len(v) != 2:
            raise ValueError(f"expected a list of two numbers, got {v!r}")
        return [item(x) for x in v]
    return check


def _betas(v):
    if not isinstance(v, (list, tuple)) or not v:
        raise ValueError(f"expected a non-empty list, got {v!r}")
    return [_unit_interval(b) for b in v]


def _bool(v):
    if not isinstance(v, bool):
        raise ValueError(f"expected true/false, got {v!r}")
    return v


def parse_algorithm(token: str):
    """``"QL"``, ``"CTQL"``, ``"pCTQL"`` or ``"pCTQL:<beta>"`` -> ``(kind, beta or None)``."""
    kind, _, beta = str(token).strip().partition(":")
    if kind not in KINDS:
        raise ValueError(f"unknown algorithm {token!r} (expected one of {list(KINDS)})")
    if beta:
        if kind != "pCTQL":
            raise ValueError(f"only pCTQL takes a beta, got {token!r}")
        try:
            return kind, _unit_interval(float(beta))
        except ValueError as exc:
            raise ValueError(f"bad beta in {token!r}: {exc}") from None
    return kind, None


def _algorithms(v):
    if v is None:
        return None
    if isinstance(v, str):
        v = [t for t in v.split(",") if t.strip()]
    if not isinstance(v, (list, tuple)) or not v:
        raise ValueError(f"expected a non-empty list of algorithms, got {v!r}")
    for token in v:
        parse_algorithm(token)
    return [str(t).strip() for t in v]


def _optional_seed(v):
    return None if v is None else _seed(v)


SCHEMA = {
    "seed": (0, _seed),
    "sessions": (10, _count),
    "episodes": (10000, _count),
    "horizon": (400, _count),
    "reward": ("distance", _choice(REWARDS)),
    "algorithms": (None, _algorithms),
    "betas": (list(PAPER_BETAS), _betas),
    "discount": (0.97, _discount),
    "eps_rl": (0.03, _probability),
    "eps_tutor": (0.03, _probability),
    "lr_scale": (1000.0, _positive),
    "gain": ([5.83, 1.83], _pair()),
    "mass": (1.0, _positive),
    "length": (1.0, _positive),
    "gravity": (10.0, _positive),
    "sample_time": (0.05, _positive),
    "integrator": (DEFAULT_INTEGRATOR, _choice(INTEGRATORS)),
    "tutor_input": ("quantized", _choice(TUTOR_INPUTS)),
    "noise_std": (0.0, _nonneg),
    "x0": ([math.pi, 0.0], _pair()),
    "eta": (0.05 * math.hypot(math.pi, 8.0), _positive),
    "n_minus": (300, _count),
    "prize_value": (5.0, _positive),
    "prize_radius": (0.05, _positive),
    "unsafe": (False, _bool),
}

ROBUSTNESS_SCHEMA = {
    "setups": (1000, _count),
    "factor_range": ([0.95, 1.05], _pair(_positive)),
    "angle_range": ([-math.pi, math.pi], _pair()),
    "velocity_range": ([-8.0, 8.0], _pair()),
    "seed": (None, _optional_seed),
}


@dataclass
class Config:
    """Resolved configuration: the plain mapping plus the objects built from it."""

    values: dict
    plan: BenchmarkPlan
    robustness: RobustnessPlan

    def algorithm(self, label: str) -> AlgorithmConfig:
        for cfg in self.plan.algorithms:
            if cfg.label == label:
                return cfg
        raise KeyError(f"algorithm {label!r} not in plan")


def _key_lines(text: str) -> dict:
    """Map ``key`` / ``robustness.key`` to its 1-based line number."""
    lines = {}
    node = yaml.compose(text)
    if not isinstance(node, yaml.MappingNode):
        return lines
    for k, v in node.value:
        lines[str(k.value)] = k.start_mark.line + 1
        if isinstance(v, yaml.MappingNode):
            for k2, _ in v.value:
                lines[f"{k.value}.{k2.value}"] = k2.start_mark.line + 1
    return lines


def _fill(section: dict, schema: dict, prefix: str, where) -> dict:
    out = {}
    unknown = sorted(set(section) - set(schema))
    if unknown:
        raise ConfigError(f"{where(prefix + unknown[0])}unknown key {prefix + unknown[0]!r}")
    for key, (default, check) in schema.items():
        if key not in section:
            out[key] = copy.deepcopy(default)
            continue
        try:
            out[key] = check(section[key])
        except ValueError as exc:
            raise ConfigError(f"{where(prefix + key)}{prefix + key}: {exc}") from None
    return out


def resolve(mapping: dict | None, source: str = "<config>", lines: dict | None = None) -> Config:
    """Validate ``mapping``, apply defaults, and build the plan objects."""
    mapping = dict(mapping or {})
    lines = lines or {}

    def where(key):
        return f"{source}:{lines[key]}: " if key in lines else f"{source}: "

    rob = mapping.pop("robustness", None) or {}
    if not isinstance(rob, dict):
        raise ConfigError(f"{where('robustness')}robustness must be a mapping")
    values = _fill(mapping, SCHEMA, "", where)
    values["robustness"] = _fill(rob, ROBUSTNESS_SCHEMA, "robustness.", where)
    if values["algorithms"] is None:
        values["algorithms"] = ["QL", "CTQL", "pCTQL"] if values["reward"] == "distance" else ["QL", "pCTQL"]
    try:
        return Config(values, *build(values))
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def build(values: dict):
    hp = Hyperparams(values["discount"], values["eps_tutor"], values["eps_rl"], values["lr_scale"])
    gain = TutorGain(*values["gain"])
    rp = RewardParams(prize_value=values["prize_value"], prize_radius=values["prize_radius"])
    reward = values["reward"]
    configs = []
    for token in values["algorithms"]:
        kind, beta = parse_algorithm(token)
        betas = [beta] if beta is not None else (values["betas"] if kind == "pCTQL" else [None])
        for b in betas:
            cfg = AlgorithmConfig(kind, b, reward, hp, gain, rp, allow_unsafe=values["unsafe"],
                                  tutor_input=values["tutor_input"])
            if cfg.label not in [c.label for c in configs]:
                configs.append(cfg)
    plan = BenchmarkPlan(
        sessions=values["sessions"],
        episodes=values["episodes"],
        horizon=values["horizon"],
        reward=reward,
        seed=values["seed"],
        algorithms=tuple(configs),
        env=PendulumParams(values["mass"], values["length"], values["gravity"], values["sample_time"]),
        x0=tuple(values["x0"]),
        integrator=values["integrator"],
        noise_std=values["noise_std"],
        goal=GoalSpec(eta=values["eta"], n_minus=values["n_minus"], horizon=values["horizon"]),
    )
    r = values["robustness"]
    robustness = RobustnessPlan(
        num_setups=r["setups"],
        factor_range=tuple(r["factor_range"]),
        angle_range=tuple(r["angle_range"]),
        velocity_range=tuple(r["velocity_range"]),
        seed=values["seed"] if r["seed"] is None else r["seed"],
    )
    return plan, robustness


def load_config(path=None, overrides: dict | None = None) -> Config:
    """Read a YAML configuration (or a run manifest) and resolve it.

    ``overrides`` replace top-level keys after reading, e.g. from CLI flags.
    """
    mapping, lines, source = {}, {}, "<defaults>"
    if path is not None:
        path = Path(path)
        source = str(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
        try:
            mapping = yaml.safe_load(text)
            lines = _key_lines(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            loc = f":{mark.line + 1}" if mark is not None else ""
            raise ConfigError(f"{path}{loc}: malformed config: {getattr(exc, 'problem', exc)}") from None
        if mapping is None:
            mapping = {}
        if not isinstance(mapping, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        if mapping.get("tool") == "ctql" and isinstance(mapping.get("config"), dict):
            mapping, lines = mapping["config"], {}
    mapping = dict(mapping)
    for key, value in (overrides or {}).items():
        if value is not None:
            mapping[key] = value
            lines.pop(key, None)
    return resolve(mapping, source, lines)
