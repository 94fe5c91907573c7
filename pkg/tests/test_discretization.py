import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctql.discretization import (
    Grid,
    build_action_grid,
    build_angle_grid,
    build_velocity_grid,
    level_of,
    quantize,
)

ANGLE = build_angle_grid()
VELOCITY = build_velocity_grid()
ACTION = build_action_grid()
ALL = {"angle": ANGLE, "velocity": VELOCITY, "action": ACTION}


def brute_nearest(x, levels):
    return int(np.argmin(np.abs(levels - x)))  # argmin keeps the first (lower) index on ties


def test_cardinalities():
    assert (len(ANGLE), len(VELOCITY), len(ACTION)) == (39, 37, 25)
    assert len(ANGLE) * len(VELOCITY) * len(ACTION) == 36075


@pytest.mark.parametrize("grid, extreme", [(ANGLE, math.pi), (VELOCITY, 8.0), (ACTION, 2.0)])
def test_symmetric_with_endpoints(grid, extreme):
    lv = grid.levels
    assert lv[0] == -extreme and lv[-1] == extreme
    assert np.array_equal(lv, -lv[::-1])
    assert np.count_nonzero(lv == 0.0) == 1
    assert np.all(np.diff(lv) > 0)


def test_angle_levels():
    lv = ANGLE.levels
    assert lv[1] == pytest.approx(-math.pi + (math.pi - math.pi / 9) / 7)
    assert lv[1] == pytest.approx(-2.7427, abs=1e-4)
    assert lv[7] == pytest.approx(-math.pi / 9)
    # 7 values on (-pi/9, -pi/36], 5 on (-pi/36, 0]
    assert lv[14] == pytest.approx(-math.pi / 36)
    np.testing.assert_allclose(np.diff(lv[7:15]), (math.pi / 9 - math.pi / 36) / 7)
    np.testing.assert_allclose(np.diff(lv[14:20]), (math.pi / 36) / 5)


def test_velocity_levels():
    lv = VELOCITY.levels
    assert lv[9] == -1.0
    assert lv[10] == pytest.approx(-1 + 1 / 9)
    assert lv[10] == pytest.approx(-0.8889, abs=1e-4)


def test_action_levels():
    lv = ACTION.levels
    np.testing.assert_allclose(lv[:9], np.linspace(-2, -0.2, 9))
    np.testing.assert_allclose(lv[9:13], [-0.15, -0.1, -0.05, 0.0], atol=1e-15)
    assert level_of(0, ACTION) == -2.0
    assert level_of(len(ACTION) - 1, ACTION) == 2.0


def test_quantize_examples():
    assert ANGLE.levels[quantize(0.0, ANGLE)] == 0.0
    assert quantize(-3.0, ANGLE) == 0
    assert abs(-3.0 - ANGLE.levels[0]) == pytest.approx(0.1416, abs=1e-4)
    assert abs(-3.0 - ANGLE.levels[1]) == pytest.approx(0.2573, abs=1e-4)
    assert quantize(9.5, VELOCITY) == len(VELOCITY) - 1
    assert quantize(-100.0, ACTION) == 0


def test_quantize_tie_goes_low():
    g = Grid([-1.0, 0.0, 1.0])
    assert quantize(0.5, g) == 1
    assert quantize(-0.5, g) == 0


def test_errors():
    with pytest.raises(ValueError):
        quantize(math.nan, ANGLE)
    with pytest.raises(IndexError):
        level_of(39, ANGLE)
    with pytest.raises(IndexError):
        level_of(-1, ANGLE)
    with pytest.raises(ValueError):
        Grid([0.0, 0.0])


@pytest.mark.parametrize("name", ALL)
def test_idempotence(name):
    grid = ALL[name]
    for i in range(len(grid)):
        assert quantize(level_of(i, grid), grid) == i


@pytest.mark.parametrize("name", ALL)
def test_nearest_neighbour_fuzz(name):
    grid = ALL[name]
    lv = grid.levels
    rng = np.random.default_rng(list(ALL).index(name))
    xs = rng.uniform(lv[0] * 1.2, lv[-1] * 1.2, 100_000)
    for x in xs:
        assert quantize(x, grid) == brute_nearest(x, lv)


@given(st.sampled_from(list(ALL)), st.floats(-10, 10))
def test_symmetry(name, x):
    grid = ALL[name]
    lv = grid.levels
    d = np.abs(lv - x)
    if np.count_nonzero(d == d.min()) > 1:
        return  # exact tie; convention breaks symmetry on purpose
    assert lv[quantize(-x, grid)] == -lv[quantize(x, grid)]


def test_checksum_changes_with_levels():
    assert ANGLE.checksum() == build_angle_grid().checksum()
    assert Grid(ANGLE.levels + 1e-12).checksum() != ANGLE.checksum()
