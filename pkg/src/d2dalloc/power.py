"""Stage 2: priced power control, solved per channel.

Each pair's best response to a price ``c`` is ``min(P_m, 1/(c h))`` whatever
the others do. The base station bisects on ``c`` until the summed received
interference meets the channel budget.
"""
from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import NEG_INF, Matching, NetworkInstance, PowerProfile, PriceResult

PRICE_SAFETY = 2.0
# Relative accuracy of the default price tolerance, see default_epsilon. Rates
# move at most one-for-one with relative power, so this keeps any budget
# shortfall invisible at 1e-12 nats.
EPSILON_REL = 1e-13


def sinr(d: int, k: int, powers, members: Iterable[int], inst: NetworkInstance) -> float:
    """SINR of pair ``d`` on channel ``k``; ``powers`` is indexed by pair id."""
    p = inst.params
    powers = powers.p if isinstance(powers, PowerProfile) else powers
    interference = p.noise_power_w + p.cu_power_w * inst.g_c2d[k, d]
    for i in members:
        if i != d:
            interference += powers[i] * inst.g_x[k, i, d]
    return powers[d] * inst.g_dd[k, d] / interference


def payoff(d: int, powers, c_k: float, k: int, members: Iterable[int],
           inst: NetworkInstance) -> float:
    powers = powers.p if isinstance(powers, PowerProfile) else powers
    if powers[d] <= 0:
        return NEG_INF
    return math.log(sinr(d, k, powers, members, inst)) - c_k * inst.h_d2b[k, d] * powers[d]


def best_response(c_k: float, h: float, p_max: float) -> float:
    ch = c_k * h
    if ch * p_max <= 1.0:  # also covers c_k = 0 and underflow of c_k * h
        return p_max
    return 1.0 / ch


def _best_responses(c_k: float, h: np.ndarray, p_max: float) -> np.ndarray:
    ch = c_k * h
    with np.errstate(divide="ignore"):
        return np.where(ch * p_max <= 1.0, p_max, 1.0 / ch)


def price_upper_bound(members_count: int, q_k: float, safety: float = PRICE_SAFETY) -> float:
    """A price at which the summed interference is strictly below ``q_k``.

    Every best response obeys ``p h <= 1/c``, so the sum is at most
    ``members_count / c``, which is below ``q_k`` once ``c > members_count / q_k``.
    """
    if members_count < 1 or not q_k > 0 or not safety > 1:
        raise ValueError("need members_count >= 1, q_k > 0, safety > 1")
    return safety * members_count / q_k


def default_epsilon(q_k: float) -> float:
    """Price tolerance giving interference within ``EPSILON_REL`` of the budget.

    In the constrained case at least one pair is interior at the tight price
    ``c*``, so ``c* >= 1/q_k``. With the feasible bracket end ``c_u < c* + eps``
    the interference shortfall relative to ``q_k`` is at most ``eps / c*``,
    i.e. at most ``eps * q_k``.
    """
    return EPSILON_REL / q_k


def bisect_price(k: int, members: Sequence[int], inst: NetworkInstance,
                 epsilon: Optional[float] = None):
    """Bisection on the channel price.

    Returns ``(c, powers, iterations, tight)`` where ``powers`` is aligned with
    ``members``. On exit the price and powers come from the upper (feasible)
    bracket end, so the budget is never exceeded.
    """
    members = list(members)
    if not members:
        raise ValueError("bisect_price needs at least one member")
    q = float(inst.q_budget[k])
    if epsilon is None:
        epsilon = inst.params.bisect_epsilon or default_epsilon(q)
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    pm = inst.params.max_d2d_power_w
    h = inst.h_d2b[k, members]
    if pm * h.sum() <= q:
        return 0.0, np.full(len(members), pm), 0, False

    c_lo, c_hi = 0.0, price_upper_bound(len(members), q)
    iterations = 0
    while c_hi - c_lo >= epsilon:
        c = 0.5 * (c_hi + c_lo)
        if float(_best_responses(c, h, pm) @ h) < q:
            c_hi = c
        else:
            c_lo = c
        iterations += 1
    return c_hi, _best_responses(c_hi, h, pm), iterations, True


def is_pareto_tight(powers, k: int, members: Sequence[int], inst: NetworkInstance,
                    rel_tol: float = 1e-6) -> bool:
    """Budget met with equality, or every member at full power within budget."""
    powers = np.asarray(powers, dtype=float)
    h = inst.h_d2b[k, list(members)]
    q = inst.q_budget[k]
    total = float(powers @ h)
    if abs(total - q) <= rel_tol * q:
        return True
    pm = inst.params.max_d2d_power_w
    return bool(np.all(powers == pm) and pm * h.sum() <= q)


def allocate_power(mu: Matching, inst: NetworkInstance,
                   epsilon: Optional[float] = None) -> tuple[PowerProfile, PriceResult]:
    """Run the price bisection on every occupied channel; unmatched pairs stay silent."""
    K = inst.K
    p = np.zeros(inst.D)
    c = np.zeros(K)
    iterations = np.zeros(K, dtype=int)
    tight = np.zeros(K, dtype=bool)
    for k in range(K):
        members = mu.members(k)
        if not members:
            continue
        c[k], p[members], iterations[k], tight[k] = bisect_price(k, members, inst, epsilon)
    return (PowerProfile(p, inst.params.max_d2d_power_w),
            PriceResult(c=c, iterations=iterations, tight=tight))
