"""Benchmark orchestration, robustness sweep and statistical comparison."""
from __future__ import annotations

import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .algorithms import PAPER_BETAS, AlgorithmConfig, EpisodeResult, run_episode
from .dynamics import DEFAULT_INTEGRATOR, FACTOR_BOUNDS, INTEGRATORS, PendulumParams, perturb_params
from .metrics import EpisodeRecord, GoalSpec, SessionLog
from .policies import Hyperparams, TutorGain, new_qtable

METRICS = (
    "terminal_episode",
    "avg_reward",
    "avg_reward_after_terminal",
    "settling_time",
    "steady_state_error",
)
SIGNIFICANCE = 0.05

STREAM_TRAIN, STREAM_EVAL, STREAM_ROBUST = 0, 1, 2


def default_algorithms(reward="distance", hyperparams=None, gain=None, betas=PAPER_BETAS):
    hyperparams = hyperparams or Hyperparams()
    gain = gain or TutorGain()
    kinds = [("QL", None)]
    if reward == "distance":
        kinds.append(("CTQL", None))
    kinds += [("pCTQL", b) for b in betas]
    return tuple(AlgorithmConfig(k, b, reward, hyperparams, gain) for k, b in kinds)


@dataclass(frozen=True)
class BenchmarkPlan:
    sessions: int = 10
    episodes: int = 10000
    horizon: int = 400
    reward: str = "distance"
    seed: int = 0
    algorithms: tuple = ()
    env: PendulumParams = field(default_factory=PendulumParams)
    x0: tuple = (math.pi, 0.0)
    integrator: str = DEFAULT_INTEGRATOR
    noise_std: float = 0.0
    goal: GoalSpec = field(default_factory=GoalSpec)

    def __post_init__(self):
        if min(self.sessions, self.episodes, self.horizon) < 1:
            raise ValueError("sessions, episodes and horizon must be positive")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        if self.goal.horizon != self.horizon:
            raise ValueError("goal horizon must equal the plan horizon")
        if not self.algorithms:
            object.__setattr__(self, "algorithms", default_algorithms(self.reward))
        for cfg in self.algorithms:
            if cfg.reward != self.reward:
                raise ValueError(f"{cfg.label} uses reward {cfg.reward!r}, plan uses {self.reward!r}")
        labels = [cfg.label for cfg in self.algorithms]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate algorithms in plan: {labels}")


@dataclass(frozen=True)
class RobustnessPlan:
    num_setups: int = 1000
    factor_range: tuple = FACTOR_BOUNDS
    angle_range: tuple = (-math.pi, math.pi)
    velocity_range: tuple = (-8.0, 8.0)
    seed: int = 0

    def __post_init__(self):
        if self.num_setups < 1:
            raise ValueError("num_setups must be positive")
        lo, hi = self.factor_range
        if not FACTOR_BOUNDS[0] <= lo <= hi <= FACTOR_BOUNDS[1]:
            raise ValueError(f"factor range {self.factor_range} outside {FACTOR_BOUNDS}")
        if not -math.pi <= self.angle_range[0] <= self.angle_range[1] <= math.pi:
            raise ValueError(f"bad angle range {self.angle_range}")
        if not -8.0 <= self.velocity_range[0] <= self.velocity_range[1] <= 8.0:
            raise ValueError(f"bad velocity range {self.velocity_range}")


def stream_rng(seed: int, label: str, reward: str, index: int, stream: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, algorithm, reward, index, stream)."""
    key = zlib.crc32(f"{label}/{reward}".encode())
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, key, index, stream])))


@dataclass
class SessionResult:
    label: str
    session: int
    log: SessionLog
    qtable: np.ndarray
    evaluation: EpisodeRecord


def run_session(config: AlgorithmConfig, plan: BenchmarkPlan, session: int):
    """Train a fresh Q-table for ``plan.episodes`` episodes; returns ``(log, qtable)``."""
    rng = stream_rng(plan.seed, config.label, config.reward, session, STREAM_TRAIN)
    q = new_qtable()
    log = SessionLog.empty(plan.episodes, algorithm=config.label, session=session)
    for e in range(1, plan.episodes + 1):
        res = run_episode(config, q, plan.env, plan.x0, e, plan.horizon, rng, goal=plan.goal,
                          integrator=plan.integrator, noise_std=plan.noise_std)
        log.set(res.record)
    return log, q


def evaluate_policy(config: AlgorithmConfig, q: np.ndarray, env: PendulumParams, x0, horizon: int,
                    rng, goal: GoalSpec | None = None, integrator=DEFAULT_INTEGRATOR) -> EpisodeResult:
    """One frozen episode: no Q updates, no exploration, switching rule kept."""
    return run_episode(config.frozen(), q, env, x0, 1, horizon, rng, learn=False, goal=goal,
                       integrator=integrator)


def _session_job(args):
    config, plan, session = args
    log, q = run_session(config, plan, session)
    rng = stream_rng(plan.seed, config.label, config.reward, session, STREAM_EVAL)
    ev = evaluate_policy(config, q, plan.env, plan.x0, plan.horizon, rng, plan.goal, plan.integrator)
    return SessionResult(config.label, session, log, q, ev.record)


def run_sessions(plan: BenchmarkPlan, parallelism: int = 1, progress=None) -> list:
    """All (algorithm, session) units of the plan, ordered by algorithm then session."""
    jobs = [(cfg, plan, s) for cfg in plan.algorithms for s in range(plan.sessions)]
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = []
            for res in pool.map(_session_job, jobs):
                results.append(res)
                if progress:
                    progress(res)
            return results
    results = []
    for job in jobs:
        res = _session_job(job)
        results.append(res)
        if progress:
            progress(res)
    return results


def session_metrics(log: SessionLog, evaluation: EpisodeRecord) -> dict:
    e_t = log.terminal_episode()
    return {
        "terminal_episode": e_t,
        "avg_reward": log.avg_cumulative_reward(),
        "avg_reward_after_terminal": log.avg_reward_after_terminal(),
        "settling_time": evaluation.settling_time,
        "steady_state_error": evaluation.steady_state_error,
    }


def _mean_std(values):
    values = sorted(values)
    n = len(values)
    mean = math.fsum(values) / n
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else 0.0
    return mean, std


@dataclass(frozen=True)
class WelchResult:
    t: float
    dof: float
    p: float

    @property
    def significant(self) -> bool:
        return self.p < SIGNIFICANCE


def welch_t_test(sample_a, sample_b) -> WelchResult:
    """Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom."""
    # sorted so the result does not depend on sample order
    a = np.sort(np.asarray(sample_a, dtype=np.float64))
    b = np.sort(np.asarray(sample_b, dtype=np.float64))
    if a.size < 2 or b.size < 2:
        raise ValueError("Welch test needs at least two observations per sample")
    va = a.var(ddof=1) / a.size
    vb = b.var(ddof=1) / b.size
    se2 = va + vb
    if se2 == 0:
        raise ValueError("Welch test undefined: both samples have zero variance")
    t = (a.mean() - b.mean()) / math.sqrt(se2)
    dof = se2**2 / (va**2 / (a.size - 1) + vb**2 / (b.size - 1))
    p = 2.0 * stats.t.sf(abs(t), dof)
    return WelchResult(float(t), float(dof), float(min(p, 1.0)))


@dataclass
class ComparisonReport:
    """Across-session statistics per algorithm, and Welch tests against QL.

    ``stats[label][metric]`` holds mean, std, n and the number of sessions
    excluded because the metric was undefined (goal never reached).
    """

    stats: dict
    welch: dict
    baseline: str = "QL"

    def to_dict(self) -> dict:
        return {"baseline": self.baseline, "stats": self.stats, "welch": self.welch}

    def mean(self, label, metric):
        return self.stats[label][metric]["mean"]


def compare(per_session: dict, baseline: str = "QL") -> ComparisonReport:
    """Aggregate ``{label: [session metric dicts]}`` into a report."""
    table = {}
    raw = {}
    for label, sessions in per_session.items():
        table[label] = {}
        raw[label] = {}
        for metric in METRICS:
            values = [s[metric] for s in sessions if s[metric] is not None]
            raw[label][metric] = values
            entry = {"n": len(values), "excluded": len(sessions) - len(values), "mean": None, "std": None}
            if values:
                entry["mean"], entry["std"] = _mean_std(values)
            table[label][metric] = entry
    welch = {}
    if baseline in raw:
        for label in raw:
            if label == baseline:
                continue
            welch[label] = {}
            for metric in METRICS:
                try:
                    res = welch_t_test(raw[label][metric], raw[baseline][metric])
                except ValueError:
                    welch[label][metric] = None
                    continue
                welch[label][metric] = {"t": res.t, "dof": res.dof, "p": res.p,
                                        "significant": res.significant}
    return ComparisonReport(table, welch, baseline)


def run_benchmark(plan: BenchmarkPlan, parallelism: int = 1, progress=None):
    """Train every algorithm of the plan; returns ``(report, session_results)``."""
    results = run_sessions(plan, parallelism, progress)
    per_session = {}
    for res in results:
        per_session.setdefault(res.label, []).append(session_metrics(res.log, res.evaluation))
    return compare(per_session), results


def moving_average(series, window: int) -> np.ndarray:
    """Trailing mean over ``window`` samples; the first outputs use the available prefix."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(series, dtype=np.float64)
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    start = np.maximum(idx - window, 0)
    return (csum[idx] - csum[start]) / (idx - start)


def learning_curves(logs, window: int = 100) -> dict:
    """Per-episode mean/std across sessions of reward and tutor usage, smoothed."""
    rewards = np.stack([log.cumulative_reward for log in logs])
    tutor = np.stack([log.tutor_fraction for log in logs])
    ddof = 1 if len(logs) > 1 else 0
    return {
        "reward_mean": moving_average(rewards.mean(axis=0), window),
        "reward_std": moving_average(rewards.std(axis=0, ddof=ddof), window),
        "tutor_mean": moving_average(tutor.mean(axis=0), window),
        "tutor_std": moving_average(tutor.std(axis=0, ddof=ddof), window),
    }


def latin_hypercube(n: int, dims: int, rng) -> np.ndarray:
    """``n`` points in ``[0, 1)^dims`` with one point per stratum ``[i/n, (i+1)/n)`` per axis."""
    if n < 1 or dims < 1:
        raise ValueError("n and dims must be positive")
    strata = rng.permuted(np.tile(np.arange(n), (dims, 1)), axis=1).T
    points = (strata + rng.random((n, dims))) / n
    # rounding could push a point onto the next stratum's left edge
    return np.minimum(points, np.nextafter((strata + 1) / n, 0.0))


@dataclass
class RobustnessResult:
    setups: np.ndarray  # columns: angle0, velocity0, mass_factor, length_factor
    settling_time: dict = field(default_factory=dict)  # label -> int array, -1 when unmet
    steady_state_error: dict = field(default_factory=dict)  # label -> float array, NaN when unmet

    def summary(self) -> dict:
        out = {}
        for label, k in self.settling_time.items():
            met = k >= 0
            errs = self.steady_state_error[label][met]
            entry = {"setups": int(k.size), "goal_met": int(met.sum())}
            for name, vals in (("settling_time", k[met].astype(float)), ("steady_state_error", errs)):
                entry[name] = _mean_std(list(vals)) if vals.size else (None, None)
            out[label] = entry
        return out


def sample_setups(plan: RobustnessPlan) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([plan.seed, STREAM_ROBUST])))
    unit = latin_hypercube(plan.num_setups, 4, rng)
    bounds = np.array([plan.angle_range, plan.velocity_range, plan.factor_range, plan.factor_range])
    return bounds[:, 0] + unit * (bounds[:, 1] - bounds[:, 0])


def run_robustness(plan: RobustnessPlan, learned: dict, configs, bench: BenchmarkPlan) -> RobustnessResult:
    """Evaluate frozen learned tables on perturbed set-ups.

    ``learned`` maps an algorithm label to its list of session tables; set-up
    ``i`` uses session table ``i mod S``. All algorithms see the same set-ups.
    """
    setups = sample_setups(plan)
    result = RobustnessResult(setups)
    for cfg in configs:
        tables = learned.get(cfg.label)
        if not tables:
            raise ValueError(f"no trained table for {cfg.label}")
        k = np.full(plan.num_setups, -1, dtype=np.int64)
        err = np.full(plan.num_setups, np.nan)
        for i, (angle0, velocity0, mf, lf) in enumerate(setups):
            env = perturb_params(bench.env, mf, lf)
            rng = stream_rng(plan.seed, cfg.label, cfg.reward, i, STREAM_ROBUST)
            ev = evaluate_policy(cfg, tables[i % len(tables)], env, (angle0, velocity0), bench.horizon,
                                 rng, bench.goal, bench.integrator).record
            if ev.goal_met:
                k[i] = ev.settling_time
                err[i] = ev.steady_state_error
        result.settling_time[cfg.label] = k
        result.steady_state_error[cfg.label] = err
    return result
