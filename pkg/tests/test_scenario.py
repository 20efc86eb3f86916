import math

import numpy as np
import pytest

from d2dalloc.model import ConfigError, SimParams
from d2dalloc.scenario import (db_to_linear, dbm_to_watts, dumps_instance, generate_instance,
                               loads_instance, path_gain)


@pytest.mark.parametrize("d,eta,beta,expected", [
    (1.0, 4, 1.0, 1.0),
    (50.0, 4, 1.0, 1.6e-7),      # 50**-4 by hand
    (500.0, 4, 2.0, 3.2e-11),    # 2 * 500**-4 by hand
])
def test_path_gain(d, eta, beta, expected):
    assert path_gain(d, eta, beta) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("d", [0.0, -3.0])
def test_path_gain_rejects_nonpositive_distance(d):
    with pytest.raises(ValueError):
        path_gain(d, 4, 1.0)


def test_unit_conversions():
    assert dbm_to_watts(-100) == pytest.approx(1e-13, rel=1e-12)
    assert db_to_linear(0) == 1.0
    assert dbm_to_watts(13.0103) == pytest.approx(0.02, rel=1e-5)


def test_generation_is_deterministic(defaults):
    a = generate_instance(defaults, 42)
    b = generate_instance(defaults, 42)
    for name in ("g_dd", "g_x", "g_c2d", "h_d2b", "g_c2b", "q_budget"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    c = generate_instance(defaults, 43)
    assert not np.array_equal(a.g_dd, c.g_dd)


def test_zero_pairs_rejected():
    with pytest.raises(ConfigError, match="num_d2d must be"):
        generate_instance(SimParams(num_d2d=0), 1)


def test_placement_geometry(defaults):
    inst = generate_instance(defaults, 7)
    pl = inst.placement
    R = defaults.cell_radius_m
    assert np.all(np.hypot(*pl.cu_xy.T) <= R)
    assert np.all(np.hypot(*pl.d2d_tx_xy.T) <= R)
    link = np.hypot(*(pl.d2d_rx_xy - pl.d2d_tx_xy).T)
    np.testing.assert_allclose(link, defaults.d2d_link_length_m, rtol=1e-12)


def test_budget_rule(defaults):
    params = SimParams(tolerance_rel_db=-5.0)
    inst = generate_instance(params, 3)
    expected = 10 ** (-0.5) * params.cu_power_w * inst.g_c2b
    np.testing.assert_allclose(inst.q_budget, expected, rtol=1e-14)


def _recovered_fading(inst):
    """Fading recovered from gains and geometry, independent of the generator's code path."""
    pl, eta = inst.placement, inst.params.pathloss_exp
    dx = pl.d2d_tx_xy[:, None, 0] - pl.d2d_rx_xy[None, :, 0]
    dy = pl.d2d_tx_xy[:, None, 1] - pl.d2d_rx_xy[None, :, 1]
    dist = np.sqrt(dx**2 + dy**2)
    off = ~np.eye(inst.D, dtype=bool)
    beta_cross = (inst.g_x * dist**eta)[:, off]
    beta_own = inst.g_dd * inst.params.d2d_link_length_m**eta
    r_tx = np.sqrt((pl.d2d_tx_xy**2).sum(axis=1))
    beta_d2b = inst.h_d2b * r_tx**eta
    return np.concatenate([beta_cross.ravel(), beta_own.ravel(), beta_d2b.ravel()])


def test_fading_mean_is_one():
    params = SimParams(num_channels=4, num_d2d=10)
    samples = np.concatenate([_recovered_fading(generate_instance(params, s)) for s in range(240)])
    assert samples.size >= 100_000
    assert 0.99 <= samples.mean() <= 1.01
    # Exp(1): variance 1 as well
    assert samples.var() == pytest.approx(1.0, abs=0.03)


def test_placement_uniform_in_disk():
    params = SimParams(num_channels=4, num_d2d=10)
    r2 = []
    for s in range(2000):
        pl = generate_instance(params, s).placement
        r2.append((pl.d2d_tx_xy**2).sum(axis=1))
        r2.append((pl.cu_xy**2).sum(axis=1))
    mean_r2 = np.concatenate(r2).mean()
    assert mean_r2 == pytest.approx(params.cell_radius_m**2 / 2, rel=0.02)


def test_generated_instances_always_valid():
    # the constructor validates; this drives it across many seeds and sizes
    for seed in range(1000):
        params = SimParams(num_channels=1 + seed % 4, num_d2d=1 + seed % 7)
        inst = generate_instance(params, seed)
        assert np.all(inst.g_dd > 0) and np.all(np.isfinite(inst.g_dd))


def test_dump_load_round_trip_is_exact(defaults):
    inst = generate_instance(SimParams(tolerance_rel_db=-3.5, bisect_epsilon=1e-3), 11)
    text = dumps_instance(inst)
    back = loads_instance(text)
    assert back.params == inst.params
    for name in ("g_dd", "g_x", "g_c2d", "h_d2b", "g_c2b", "q_budget"):
        assert np.array_equal(getattr(back, name), getattr(inst, name))
    # documented layout: one K-row block per 2-D matrix, scientific notation
    lines = text.splitlines()
    i = lines.index("[g_dd] 4 10")
    first = lines[i + 1].split()
    assert len(first) == 10 and all("e" in tok for tok in first)
    assert len(first[0].split("e")[0].replace("-", "").replace(".", "")) >= 17


def test_load_rejects_unknown_block(defaults):
    text = dumps_instance(generate_instance(defaults, 1)).replace("[g_c2b]", "[g_bogus]")
    with pytest.raises(ConfigError):
        loads_instance(text)
