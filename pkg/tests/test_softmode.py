import numpy as np
import pytest

from ioncavity.crystal import linear_chain_seed
from ioncavity.params import SystemParams, g0_for_cooperativity, with_power
from ioncavity.softmode import (classify_minima, count_minima, numeric_threshold_power, theta_parameter,
                                threshold_power, uniform_potential, v_s_projected, v_s_uniform)

P4 = SystemParams(n_ions=4)
SCALE = P4.ion_mass * P4.omega_x ** 2 / P4.k ** 2


def test_uniform_potential_hand_values():
    theta, P, C = 0.22, 0.1, 3.0
    assert v_s_uniform(0.0, theta, P, C, P4) == pytest.approx(SCALE * 2 * P * np.arctan(C), rel=1e-14)
    # cavity term vanishes where every ion sits at a node
    b = np.pi / P4.k
    assert v_s_uniform(b, theta, P, C, P4) == pytest.approx(SCALE * theta / 2 * (np.pi / 2) ** 2, rel=1e-12)


def test_uniform_potential_is_even():
    b = np.linspace(0, 2 * np.pi, 33) / P4.k
    assert np.allclose(v_s_uniform(b, 0.3, 0.2, 2.0, P4), v_s_uniform(-b, 0.3, 0.2, 2.0, P4), rtol=1e-14)


def test_negative_cooperativity_rejected():
    with pytest.raises(ValueError):
        v_s_uniform(0.0, 0.2, 0.1, -1.0, P4)


def test_threshold_power_closed_form():
    assert threshold_power(0.22, 0.5) == pytest.approx(0.1375, rel=1e-14)
    assert threshold_power(0.22, 0.0) == np.inf
    # minimised at C = 1 where it equals theta / 2
    cs = np.linspace(0.2, 5, 481)
    assert cs[np.argmin([threshold_power(0.3, c) for c in cs])] == pytest.approx(1.0, abs=0.01)
    assert threshold_power(0.3, 1.0) == pytest.approx(0.15, rel=1e-14)


@pytest.mark.parametrize("C", [0.3, 0.5, 1.0, 3.0, 10.0])
def test_threshold_matches_numerical_curvature(C):
    assert numeric_threshold_power(0.22, C, P4) == pytest.approx(threshold_power(0.22, C), rel=1e-6)


def test_count_minima_simple_shapes():
    b = np.linspace(-2, 2, 401)
    n, locs, _ = count_minima(b, (b - 0.3) ** 2)
    assert n == 1 and locs[0] == pytest.approx(0.3, abs=1e-12)
    n, locs, _ = count_minima(b, (b ** 2 - 1) ** 2)
    assert n == 2 and np.allclose(sorted(locs), [-1, 1], atol=1e-4)
    n, locs, _ = count_minima(b, b ** 6 - 2 * b ** 4 + 0.8 * b ** 2)
    assert n == 3
    assert count_minima(b, b)[0] == 0
    assert count_minima(b, -(b ** 2))[0] == 0


def test_count_minima_even_grid_flat_bottom_counts_once():
    b = np.linspace(-1, 1, 10)
    assert count_minima(b, b ** 2)[0] == 1


def test_count_minima_rejects_bad_grids():
    with pytest.raises(ValueError):
        count_minima([0, 1, 2, 3], [1, 0, 0, 1])
    with pytest.raises(ValueError):
        count_minima([0, 1, 3, 2, 4], [1, 0, 0.5, 0, 1])
    with pytest.raises(ValueError):
        count_minima(np.arange(6), np.arange(5))


def test_classify_minima():
    assert classify_minima([0.0], 0.1) == "linear-only"
    assert classify_minima([-1.0, 0.0, 1.0], 0.1) == "bistable"
    assert classify_minima([-1.0, 1.0], 0.1) == "zigzag-only"
    assert classify_minima([1.0], 0.1) == "other"


@pytest.mark.parametrize("C", [0.1, 0.5, 1.0])
def test_weak_coupling_never_bistable(C):
    for P in np.linspace(0.0, 0.6, 61):
        assert uniform_potential(0.22, P, C, P4).stability_class != "bistable"


def test_strong_coupling_passes_through_three_minima():
    counts = [len(uniform_potential(0.22, P, 3.0, P4).minima) for P in np.linspace(0.0, 0.3, 61)]
    assert counts[0] == 1
    assert 3 in counts
    first3 = counts.index(3)
    assert all(c == 1 for c in counts[:first3])


def test_projected_potential_without_pump_is_trap_plus_coulomb():
    p = SystemParams(n_ions=4, eta=0.0)
    pot = v_s_projected(p, np.linspace(-3, 3, 401) / p.k)
    assert pot.stability_class == "linear-only"
    assert pot.values[200] == 0.0
    assert np.min(pot.values) == pytest.approx(0.0, abs=1e-12 * np.max(pot.values))
    assert pot.minima[0] == pytest.approx(0.0, abs=1e-3 / p.k)


@pytest.mark.parametrize("C,bistable_expected", [(0.5, False), (3.0, True)])
def test_projected_potential_agrees_with_uniform_model(C, bistable_expected):
    # a waist much larger than the chain approximates uniform illumination
    base = SystemParams(n_ions=4, waist=1e-2)
    theta = theta_parameter(base)
    p = base.with_(g0=g0_for_cooperativity(base, linear_chain_seed(base), C))
    classes = [(uniform_potential(theta, P, C, base).stability_class,
                v_s_projected(with_power(p, P)).stability_class) for P in np.linspace(0.05, 0.4, 15)]
    assert any(u == "bistable" for u, _ in classes) == bistable_expected
    assert any(v == "bistable" for _, v in classes) == bistable_expected
    # the linear minimum disappears at the same power in both
    assert [u == "zigzag-only" for u, _ in classes] == [v == "zigzag-only" for _, v in classes]
