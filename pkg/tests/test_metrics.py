import math
from dataclasses import replace

import numpy as np
import pytest

from d2dalloc import metrics as mx
from d2dalloc.matching import allocate_channels
from d2dalloc.model import Matching, SimParams
from d2dalloc.power import allocate_power
from d2dalloc.scenario import generate_instance


def test_d2d_rate_zero_power(random_instances):
    inst = random_instances[0]
    mu, _ = allocate_channels(inst)
    assert mx.d2d_sum_rate(mu, np.zeros(inst.D), inst) == 0.0


def test_d2d_rate_one_nat(make_instance):
    g = (math.e - 1) * 1.2e-13 / 0.02
    inst = make_instance(1, 1, g_dd=g, g_c2d=1e-12)
    assert mx.d2d_sum_rate(Matching((0,), 1), np.array([0.02]), inst) == pytest.approx(1.0, rel=1e-12)


def test_d2d_rate_ignores_unmatched(make_instance):
    inst = make_instance(1, 2)
    mu = Matching((0, None), 1)
    assert mx.d2d_sum_rate(mu, np.array([0.02, 0.0]), inst) == \
        mx.d2d_sum_rate(Matching((0,), 1), np.array([0.02]), make_instance(1, 1))


def test_cu_rate_hand_value(make_instance):
    # q_c g = 1e-12, D2D interference 0.02 * 5e-12 = 1e-13 -> ln 6
    inst = make_instance(1, 1, g_c2b=5e-11, h_d2b=5e-12)
    assert mx.cu_sum_rate(Matching((0,), 1), np.array([0.02]), inst) == pytest.approx(math.log(6), rel=1e-12)
    assert math.log(6) == pytest.approx(1.7918, abs=1e-4)


def test_cu_rate_interference_free(random_instances):
    inst = random_instances[0]
    p = inst.params
    expected = sum(math.log1p(p.cu_power_w * g / p.noise_power_w) for g in inst.g_c2b)
    mu = Matching((None,) * inst.D, inst.K)
    assert mx.cu_sum_rate(mu, np.zeros(inst.D), inst) == pytest.approx(expected, rel=1e-12)


def test_cu_rate_falls_as_d2d_power_rises(random_instances):
    inst = random_instances[1]
    mu, _ = allocate_channels(inst)
    rng = np.random.default_rng(0)
    for _ in range(50):
        p = rng.uniform(0, 0.02, inst.D)
        d = int(rng.integers(inst.D))
        louder = p.copy()
        louder[d] = min(0.02, p[d] * 1.5)
        assert mx.cu_sum_rate(mu, louder, inst) <= mx.cu_sum_rate(mu, p, inst)


def _independent_rates(mu, p, inst):
    """Same quantity evaluated as one vectorised pass over the full gain tensor."""
    par = inst.params
    K, D = inst.K, inst.D
    onehot = np.zeros((K, D))
    for d, k in enumerate(mu.assign):
        if k is not None:
            onehot[k, d] = 1.0
    tx = onehot * p[None, :]
    interference = par.noise_power_w + par.cu_power_w * inst.g_c2d + np.einsum("ki,kid->kd", tx, inst.g_x)
    gamma = tx * inst.g_dd / interference
    d2d = np.log1p(gamma).sum()
    cu = np.log1p(par.cu_power_w * inst.g_c2b / (par.noise_power_w + (tx * inst.h_d2b).sum(axis=1))).sum()
    return d2d, cu


def test_rates_match_independent_evaluation(random_instances):
    for inst in random_instances:
        mu, _ = allocate_channels(inst)
        prof, _ = allocate_power(mu, inst)
        d2d, cu = _independent_rates(mu, prof.p, inst)
        assert mx.d2d_sum_rate(mu, prof, inst) == pytest.approx(d2d, rel=1e-12)
        assert mx.cu_sum_rate(mu, prof, inst) == pytest.approx(cu, rel=1e-12)


def test_rates_invariant_under_relabelling(random_instances):
    rng = np.random.default_rng(3)
    for inst in random_instances[:10]:
        mu, _ = allocate_channels(inst)
        prof, _ = allocate_power(mu, inst)
        ck = rng.permutation(inst.K)      # new channel j is old channel ck[j]
        dp = rng.permutation(inst.D)      # new pair j is old pair dp[j]
        perm = replace(inst, g_dd=inst.g_dd[np.ix_(ck, dp)], g_x=inst.g_x[np.ix_(ck, dp, dp)],
                       g_c2d=inst.g_c2d[np.ix_(ck, dp)], h_d2b=inst.h_d2b[np.ix_(ck, dp)],
                       g_c2b=inst.g_c2b[ck], q_budget=inst.q_budget[ck], placement=None)
        inv = np.argsort(ck)
        mu2 = Matching(tuple(int(inv[mu.assign[d]]) for d in dp), inst.K)
        p2 = prof.p[dp]
        assert mx.d2d_sum_rate(mu2, p2, perm) == pytest.approx(mx.d2d_sum_rate(mu, prof, inst), rel=1e-12)
        assert mx.cu_sum_rate(mu2, p2, perm) == pytest.approx(mx.cu_sum_rate(mu, prof, inst), rel=1e-12)


def test_constraint_audit(random_instances):
    inst = random_instances[2]
    mu, _ = allocate_channels(inst)
    prof, _ = allocate_power(mu, inst)
    assert mx.audit_constraints(mu, prof, inst)["ok"]
    loud = np.full(inst.D, 0.02)
    report = mx.audit_constraints(mu, loud, inst)
    assert report["box"] and not report["budget"] and report["worst_budget_excess"] > 0


def test_lemma_constant(defaults):
    inst = generate_instance(defaults, 0)
    assert mx.lemma1_constant(inst) == pytest.approx(math.log(6e-7) + 1 - 6e-7, rel=1e-15)
    assert mx.lemma1_constant(inst) == pytest.approx(-13.326337, abs=1e-6)


def test_lemma_isolated_pair_strict(make_instance):
    inst = make_instance(1, 1, cu_power_w=1e-300)
    lhs, rhs, holds = mx.lemma1_audit(Matching((0,), 1), inst)
    assert holds and lhs < rhs


def test_lemma_holds_on_random_matchings():
    rng = np.random.default_rng(11)
    params = SimParams(num_channels=4, num_d2d=10)
    for seed in range(200):
        inst = generate_instance(params, seed)
        mu = Matching(tuple(int(k) for k in rng.integers(0, 4, size=10)), 4)
        assert mx.lemma1_audit(mu, inst)[2]


def test_lemma_requires_complete_matching(make_instance):
    with pytest.raises(ValueError):
        mx.lemma1_audit(Matching((0, None), 1), make_instance(1, 2))
