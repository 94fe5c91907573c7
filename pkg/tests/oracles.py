"""Slow, obviously-correct reference implementations used by the tests."""
import math

import numpy as np
from scipy import integrate


def goal_condition(trajectory, eta, n_minus):
    n = len(trajectory) - 1
    for k in range(n + 1):
        if all(math.hypot(*trajectory[j]) <= eta for j in range(k, n + 1)):
            return (True, k) if k <= n_minus else (False, None)
    return False, None


def terminal_episode(flags, streak=30):
    for e in range(streak + 1, len(flags) + 1):
        if all(flags[e - 1 - streak:e]):
            return e
    return None


def mean(values):
    total = 0.0
    for v in values:
        total += v
    return total / len(values)


def t_density(x, dof):
    c = math.exp(math.lgamma((dof + 1) / 2) - math.lgamma(dof / 2)) / math.sqrt(dof * math.pi)
    return c * (1 + x * x / dof) ** (-(dof + 1) / 2)


def welch(a, b):
    """Welch t, dof and a two-sided p from numerical integration of the t density."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    va = sum((x - mean(a)) ** 2 for x in a) / (len(a) - 1) / len(a)
    vb = sum((x - mean(b)) ** 2 for x in b) / (len(b) - 1) / len(b)
    t = (mean(a) - mean(b)) / math.sqrt(va + vb)
    dof = (va + vb) ** 2 / (va**2 / (len(a) - 1) + vb**2 / (len(b) - 1))
    tail, _ = integrate.quad(t_density, abs(t), math.inf, args=(dof,), epsabs=1e-14, epsrel=1e-12)
    return t, dof, 2 * tail


def lhs_is_stratified(points):
    n = len(points)
    for column in np.asarray(points).T:
        if sorted(int(math.floor(x * n)) for x in column) != list(range(n)):
            return False
    return True
