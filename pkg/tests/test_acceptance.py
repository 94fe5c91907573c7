"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, shown in the pytest terminal summary.
Criteria 10-15 train the full plan (10 sessions x 10^4 episodes) at the
committed master seed; a criterion that fails there is re-run on the retry
seeds and passes on a majority.
"""
import functools
import math

import numpy as np
import pytest

import oracles
from ctql.algorithms import AlgorithmConfig, prize, run_episode, select_action, weighted_distance
from ctql.discretization import level_of, quantize
from ctql.dynamics import PendulumParams
from ctql.experiment import (
    BenchmarkPlan,
    RobustnessPlan,
    latin_hypercube,
    run_benchmark,
    run_robustness,
    welch_t_test,
)
from ctql.metrics import GoalSpec, goal_condition, terminal_episode
from ctql.policies import (
    ACTION_GRID,
    ANGLE_GRID,
    QTABLE_SHAPE,
    VELOCITY_GRID,
    Hyperparams,
    new_qtable,
    q_update,
)
from verdicts import record

MASTER_SEED = 0
RETRY_SEEDS = (1, 2)
ENV = PendulumParams()
GRIDS = {"angle": ANGLE_GRID, "velocity": VELOCITY_GRID, "action": ACTION_GRID}


def check(criterion, ok, detail=""):
    record(criterion, ok, detail)
    assert ok, f"criterion {criterion}: {detail}"


def test_c01_cardinalities():
    sizes = tuple(len(g) for g in GRIDS.values())
    ok = sizes == (39, 37, 25) and QTABLE_SHAPE == sizes and new_qtable().size == 36075
    check(1, ok, f"grids {sizes}, table {new_qtable().size} entries")


def test_c02_quantize_round_trip_and_optimality():
    rng = np.random.default_rng(2)
    bad = 0
    for grid in GRIDS.values():
        lv = grid.levels
        xs = rng.uniform(lv[0] - 0.5, lv[-1] + 0.5, 100_000)
        expected = np.argmin(np.abs(xs[:, None] - lv[None, :]), axis=1)  # first minimum = lower index
        got = np.array([quantize(x, grid) for x in xs])
        bad += int(np.count_nonzero(got != expected))
        bad += sum(quantize(level_of(i, grid), grid) != i for i in range(len(grid)))
        # the returned level is never farther than any other level
        dist = np.abs(xs - lv[got])
        bad += int(np.count_nonzero(dist > np.abs(xs[:, None] - lv[None, :]).min(axis=1)))
    check(2, bad == 0, f"{bad} mismatches over 3 x 10^5 inputs")


def test_c03_q_update():
    rng = np.random.default_rng(3)
    worst = 0.0
    exact = True
    for _ in range(10_000):
        q = new_qtable()
        s = tuple(rng.integers([39, 37]))
        s2 = tuple(rng.integers([39, 37]))
        a = int(rng.integers(25))
        q[s][a] = rng.normal(0, 10)
        q[s2] = rng.normal(0, 10, 25)
        r, alpha, gamma = rng.normal(0, 5), rng.uniform(1e-3, 1), rng.uniform(1e-3, 1)
        old, nxt = q[s][a], q[s2].max()
        expected = (1 - alpha) * old + alpha * (r + gamma * nxt)
        q_update(q, s, a, s2, r, alpha, gamma)
        worst = max(worst, abs(q[s][a] - expected) / max(abs(expected), 1e-300))
        q[s][a] = old
        q_update(q, s, a, s2, r, 1.0, gamma)
        exact &= q[s][a] == r + gamma * nxt
    check(3, worst <= 1e-12 and exact, f"max relative error {worst:.2e}, alpha=1 exact: {exact}")


def test_c04_pctql_source_frequencies():
    cfg = AlgorithmConfig("pCTQL", 0.9897)
    q = new_qtable()
    q[:, :, 3] = 1.0
    rng = np.random.default_rng(4)
    n = 1_000_000
    counts = {"rl-greedy": 0, "tutor": 0, "random": 0}
    for _ in range(n):
        counts[select_action(cfg, q, [0.4, -1.0], rng)[1]] += 1
    target = {"rl-greedy": 0.9897 * 0.97, "tutor": 0.0103 * 0.97, "random": 0.03}
    ok = True
    parts = []
    for k, p in target.items():
        f = counts[k] / n
        ok &= abs(f - p) <= 3 * math.sqrt(p * (1 - p) / n)
        parts.append(f"{k} {f:.4f} (p={p:.4f})")
    check(4, ok, ", ".join(parts))


def test_c05_telescoping_identity():
    rng = np.random.default_rng(5)
    cfg = AlgorithmConfig("pCTQL", 0.5)
    q = new_qtable()
    worst = 0.0
    for e in range(1, 1001):
        x0 = rng.uniform([-math.pi, -8], [math.pi, 8])
        res = run_episode(cfg, q, ENV, x0, e, 400, rng)
        t = res.trajectory
        expected = weighted_distance(t[0]) - weighted_distance(t[-1]) + math.fsum(prize(x) for x in t[1:])
        worst = max(worst, abs(res.record.cumulative_reward - expected))
    check(5, worst <= 1e-9, f"max abs deviation {worst:.2e} over 10^3 trajectories")


def test_c06_goal_condition_and_terminal_episode():
    rng = np.random.default_rng(6)
    spec = GoalSpec()
    bad = met = 0
    for i in range(1000):
        traj = rng.normal(0, 0.1, (401, 2))  # tail mostly inside the tube
        k = int(rng.integers(0, 401))
        traj[:k] *= rng.uniform(2, 20)  # head mostly outside
        if i % 3 == 0:
            traj[int(rng.integers(0, 401))] = [1.0, 1.0]  # a late excursion
        got = goal_condition(traj, spec)
        met += got[0]
        bad += got != oracles.goal_condition(traj, spec.eta, spec.n_minus)
    reached = 0
    for _ in range(1000):
        flags = rng.random(int(rng.integers(1, 400))) < rng.uniform(0.8, 1.0)
        e_t = terminal_episode(flags)
        reached += e_t is not None
        bad += e_t != oracles.terminal_episode(list(flags))
    check(6, bad == 0 and 100 < met < 900 and 100 < reached < 900,
          f"{bad} mismatches over 2 x 10^3 cases ({met} goals met, {reached} terminal episodes found)")


def test_c07_welch():
    res = welch_t_test([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
    example = abs(res.t + 1.0) <= 1e-4 and abs(res.dof - 8) <= 1e-4 and abs(res.p - 0.3466) <= 1e-4
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        a = rng.normal(rng.uniform(-1, 1), rng.uniform(0.2, 2), int(rng.integers(2, 25)))
        b = rng.normal(rng.uniform(-1, 1), rng.uniform(0.2, 2), int(rng.integers(2, 25)))
        got = welch_t_test(a, b)
        t, dof, p = oracles.welch(a, b)
        worst = max(worst, abs(got.t - t) / max(1.0, abs(t)), abs(got.dof - dof) / dof, abs(got.p - p))
    check(7, example and worst <= 1e-9,
          f"example t={res.t:.4f} dof={res.dof:.4f} p={res.p:.4f}; fuzz max error {worst:.1e}")


def test_c08_latin_hypercube():
    rng = np.random.default_rng(8)
    ok = all(oracles.lhs_is_stratified(latin_hypercube(n, 4, rng)) for n in (1, 4, 100, 1000))
    ok &= oracles.lhs_is_stratified(latin_hypercube(4, 2, rng))
    check(8, ok, "n in {1, 4, 100, 1000}")


def test_c09_tutor_alone():
    cfg = AlgorithmConfig("pCTQL", 0.0, hyperparams=Hyperparams(eps_tutor=0.0))
    far = run_episode(cfg, new_qtable(), ENV, [math.pi, 0.0], 1, 400, np.random.default_rng(0), learn=False)
    near = run_episode(cfg, new_qtable(), ENV, [0.1, 0.0], 1, 400, np.random.default_rng(0), learn=False)
    ok = not far.record.goal_met and near.record.goal_met and near.record.settling_time <= 300
    check(9, ok, f"from [pi,0] goal_met={far.record.goal_met}; from [0.1,0] settling time "
                 f"{near.record.settling_time}")


# --- stochastic reproduction -------------------------------------------------


@functools.lru_cache(maxsize=None)
def full_run(reward, seed):
    plan = BenchmarkPlan(reward=reward, seed=seed)
    report, results = run_benchmark(plan)
    return plan, report, results


@functools.lru_cache(maxsize=None)
def robustness_run(seed):
    plan, report, results = full_run("distance", seed)
    learned = {}
    for res in results:
        learned.setdefault(res.label, []).append(res.qtable)
    return run_robustness(RobustnessPlan(seed=seed), learned, plan.algorithms, plan).summary()


def by_majority(criterion, evaluate):
    """Pass at the master seed, or on a majority of master + retry seeds."""
    outcomes = []
    for seed in (MASTER_SEED, *RETRY_SEEDS):
        ok, detail = evaluate(seed)
        outcomes.append((seed, ok, detail))
        passes = sum(o[1] for o in outcomes)
        if (seed == MASTER_SEED and ok) or passes >= 2 or len(outcomes) - passes >= 2:
            break
    passes = sum(o[1] for o in outcomes)
    verdict = passes > len(outcomes) / 2
    detail = "; ".join(f"seed {s}: {'ok' if ok else 'fail'} ({d})" for s, ok, d in outcomes)
    check(criterion, verdict, detail)


OMEGA_001 = "pCTQL-0.9897"
TUTORED_GYM = ("pCTQL-0.9990", "pCTQL-0.9948", "pCTQL-0.9897", "pCTQL-0.9485", "pCTQL-0.8969")
TUTORED_DISTANCE = ("CTQL", *TUTORED_GYM)


@pytest.mark.benchmark
def test_c10_ctql_learns_faster():
    def evaluate(seed):
        _, rep, _ = full_run("distance", seed)
        ctql, ql = rep.mean("CTQL", "terminal_episode"), rep.mean("QL", "terminal_episode")
        w = rep.welch["CTQL"]["terminal_episode"]
        ok = ctql is not None and ql is not None and ctql < ql and w is not None and w["p"] < 0.05
        return ok, f"E_t CTQL {ctql} vs QL {ql}, p={None if w is None else round(w['p'], 4)}"

    by_majority(10, evaluate)


@pytest.mark.benchmark
def test_c11_tutored_average_reward_distance():
    def evaluate(seed):
        _, rep, _ = full_run("distance", seed)
        ql = rep.mean("QL", "avg_reward")
        ctql, p = rep.mean("CTQL", "avg_reward"), rep.mean(OMEGA_001, "avg_reward")
        return ctql > ql and p > ql, f"J_avg CTQL {ctql:.1f}, pCTQL(w=0.01) {p:.1f}, QL {ql:.1f}"

    by_majority(11, evaluate)


@pytest.mark.benchmark
def test_c12_ctql_tutor_usage_decays():
    def evaluate(seed):
        _, _, results = full_run("distance", seed)
        tf = np.stack([r.log.tutor_fraction for r in results if r.label == "CTQL"])
        early, late = tf[:, :500].mean(), tf[:, -500:].mean()
        return early > 0 and early >= 2 * late, f"episodes 1-500 {early:.4f}, last 500 {late:.5f}"

    by_majority(12, evaluate)


@pytest.mark.benchmark
def test_c13_pctql_reward_gym():
    def evaluate(seed):
        _, rep, _ = full_run("gym", seed)
        j = (rep.mean(OMEGA_001, "avg_reward"), rep.mean("QL", "avg_reward"))
        jt = (rep.mean(OMEGA_001, "avg_reward_after_terminal"), rep.mean("QL", "avg_reward_after_terminal"))
        ok = j[0] > j[1] and None not in jt and jt[0] > jt[1]
        return ok, (f"J_avg {j[0]:.1f} vs {j[1]:.1f}, J_avg,t {jt[0]} vs {jt[1]}")

    by_majority(13, evaluate)


def settling_not_significant(reward, labels):
    def evaluate(seed):
        _, rep, _ = full_run(reward, seed)
        significant = {}
        for label in labels:
            w = rep.welch[label]["settling_time"]
            if w is not None and w["p"] < 0.05:
                significant[label] = round(w["p"], 4)
        return not significant, (f"significant: {significant}" if significant else "none significant")

    return evaluate


@pytest.mark.benchmark
def test_c14_settling_time_distance():
    by_majority("14 (reward r^a)", settling_not_significant("distance", TUTORED_DISTANCE))


@pytest.mark.benchmark
def test_c14_settling_time_gym():
    by_majority("14 (reward r^g)", settling_not_significant("gym", TUTORED_GYM))


@pytest.mark.benchmark
def test_c15_robust_error_centered_on_nominal():
    def evaluate(seed):
        _, rep, _ = full_run("distance", seed)
        summary = robustness_run(seed)
        off = {}
        for label, entry in summary.items():
            mean, std = entry["steady_state_error"]
            nominal = rep.mean(label, "steady_state_error")
            if mean is None or nominal is None or abs(mean - nominal) > 2 * std:
                off[label] = (nominal, mean, std)
        return not off, (f"outside 2 std: {off}" if off else f"all {len(summary)} algorithms within 2 std")

    by_majority(15, evaluate)
