"""Reference computations kept apart from the package code paths."""
import itertools
import math

import numpy as np
from scipy.optimize import minimize


def channel_rates(p, members, k, inst):
    """Summed rate on channel k; ``p`` is aligned with ``members``."""
    par = inst.params
    out = 0.0
    for d in members:
        interf = par.noise_power_w + par.cu_power_w * inst.g_c2d[k, d]
        interf += sum(p[i] * inst.g_x[k, members[i], d] for i in range(len(members)) if members[i] != d)
        out += math.log1p(p[members.index(d)] * inst.g_dd[k, d] / interf)
    return out


def slsqp_channel_optimum(members, k, inst):
    """Separate oracle: SLSQP from a grid of starts, on raw gains."""
    if not members:
        return 0.0
    pm, h, q = inst.params.max_d2d_power_w, inst.h_d2b[k, members], inst.q_budget[k]
    cons = [{"type": "ineq", "fun": lambda x: 1.0 - (x * pm) @ h / q}]
    best = -math.inf
    for start in itertools.product([0.05, 0.5, 1.0], repeat=len(members)):
        x0 = np.array(start) * min(1.0, q / (pm * h.sum()))
        r = minimize(lambda x: -channel_rates(x * pm, members, k, inst), x0, method="SLSQP",
                     bounds=[(0, 1)] * len(members), constraints=cons,
                     options={"ftol": 1e-14, "maxiter": 500})
        if r.success and r.x @ h * pm <= q * (1 + 1e-9):
            best = max(best, -r.fun)
    return best


def potential_exact(mu, inst, dps=60):
    """Potential summed in extended precision, straight from its definition.

    Channel loads can reach 1e9, so a double-precision difference of two
    potentials loses the digits a small swap gain lives in.
    """
    import mpmath
    p = inst.params
    with mpmath.workdps(dps):
        f = mpmath.mpf
        pm, w, n0, qc = f(p.max_d2d_power_w), f(p.w_tradeoff), f(p.noise_power_w), f(p.cu_power_w)
        total = f(0)
        for k in range(inst.K):
            members = mu.members(k)
            load = f(0)
            for d in members:
                inner = qc * f(inst.g_c2d[k, d])
                inner += sum((pm * f(inst.g_x[k, i, d]) / 2 for i in members if i != d), f(0))
                total += f(p.xi1) * (mpmath.log(pm * f(inst.g_dd[k, d]) / n0) - w * inner)
                load += pm * f(inst.h_d2b[k, d]) / f(inst.q_budget[k])
            total -= f(p.xi2) * max(f(0), load - 1)
        return total
