"""Sum rates, constraint audits and the full-power lower-bound audit."""
from __future__ import annotations

import math

import numpy as np

from .model import Matching, NetworkInstance, PowerProfile
from .matching import phi


def _as_array(powers) -> np.ndarray:
    return powers.p if isinstance(powers, PowerProfile) else np.asarray(powers, dtype=float)


def d2d_sum_rate(mu: Matching, powers, inst: NetworkInstance) -> float:
    p = inst.params
    pw = _as_array(powers)
    total = 0.0
    for k in range(inst.K):
        members = mu.members(k)
        for d in members:
            if pw[d] <= 0:
                continue
            interference = p.noise_power_w + p.cu_power_w * inst.g_c2d[k, d]
            interference += sum(pw[i] * inst.g_x[k, i, d] for i in members if i != d)
            total += math.log1p(pw[d] * inst.g_dd[k, d] / interference)
    return total


def cu_sum_rate(mu: Matching, powers, inst: NetworkInstance) -> float:
    """Uplink CU rates at the base station, with the D2D interference on each channel."""
    p = inst.params
    pw = _as_array(powers)
    total = 0.0
    for k in range(inst.K):
        interference = p.noise_power_w + sum(pw[d] * inst.h_d2b[k, d] for d in mu.members(k))
        total += math.log1p(p.cu_power_w * inst.g_c2b[k] / interference)
    return total


def audit_constraints(mu: Matching, powers, inst: NetworkInstance, rel_tol: float = 1e-6) -> dict:
    """Box, budget and exclusivity checks; returns the worst budget overshoot too."""
    pw = _as_array(powers)
    pm = inst.params.max_d2d_power_w
    box = bool(np.all(pw >= 0) and np.all(pw <= pm))
    unmatched_silent = all(pw[d] == 0 for d, a in enumerate(mu.assign) if a is None)
    worst = 0.0
    for k in range(inst.K):
        use = sum(pw[d] * inst.h_d2b[k, d] for d in mu.members(k))
        worst = max(worst, (use - inst.q_budget[k]) / inst.q_budget[k])
    return {"box": box, "budget": worst <= rel_tol, "unmatched_silent": unmatched_silent,
            "worst_budget_excess": worst, "ok": box and unmatched_silent and worst <= rel_tol}


def lemma1_constant(inst: NetworkInstance) -> float:
    """Per-pair constant in the full-power lower bound.

    ``ln(P_m g/(n0+I)) = ln(P_m g/n0) + ln(w n0) - ln(w (n0+I))`` and
    ``ln x <= x - 1`` turn the last term into ``>= 1 - w n0 - w I``, so each
    pair contributes ``ln(w n0) + 1 - w n0``. The symmetric cross term in the
    pair gain sums to the same total as ``w I`` over a channel.
    """
    w, n0 = inst.params.w_tradeoff, inst.params.noise_power_w
    return math.log(w * n0) + 1.0 - w * n0


def lemma1_audit(mu: Matching, inst: NetworkInstance) -> tuple[float, float, bool]:
    """Check ``sum(phi) + D * const < full-power sum rate`` for a complete matching."""
    if not mu.all_matched():
        raise ValueError("lemma1_audit needs every pair matched")
    lhs = sum(phi(mu, d, inst) for d in range(inst.D)) + inst.D * lemma1_constant(inst)
    full = np.full(inst.D, inst.params.max_d2d_power_w)
    rhs = d2d_sum_rate(mu, full, inst)
    return lhs, rhs, lhs < rhs
