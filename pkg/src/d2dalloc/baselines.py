"""Comparison schemes and the local sum-rate solver used by brute force."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit
from scipy.optimize import linear_sum_assignment

from .model import GuardError, Matching, NetworkInstance, PowerProfile
from .power import bisect_price

BRUTE_FORCE_LIMIT = 10**6


def random_allocation(inst: NetworkInstance, seed: int) -> Matching:
    rng = np.random.default_rng(seed)
    return Matching(tuple(int(k) for k in rng.integers(0, inst.K, size=inst.D)), inst.K)


def interference_min_allocation(inst: NetworkInstance) -> Matching:
    """Minimise full-power interference at the BS; with quota D each pair picks its own argmin."""
    return Matching(tuple(int(k) for k in np.argmin(inst.h_d2b, axis=0)), inst.K)


def singleton_rates(inst: NetworkInstance) -> np.ndarray:
    """``rates[d, k]``: rate of pair d alone on channel k at its priced power."""
    p = inst.params
    rates = np.empty((inst.D, inst.K))
    for k in range(inst.K):
        for d in range(inst.D):
            _, pw, _, _ = bisect_price(k, [d], inst)
            s = pw[0] * inst.g_dd[k, d] / (p.noise_power_w + p.cu_power_w * inst.g_c2d[k, d])
            rates[d, k] = math.log1p(s)
    return rates


def orthogonal_allocation(inst: NetworkInstance) -> Matching:
    """At most one pair per channel; the min(K, D) pairs and channels maximising the summed rate."""
    rows, cols = linear_sum_assignment(singleton_rates(inst), maximize=True)
    assign: list[Optional[int]] = [None] * inst.D
    for d, k in zip(rows, cols):
        assign[int(d)] = int(k)
    return Matching(tuple(assign), inst.K)


# -- local sum-rate maximisation on one channel ----------------------------------
#
# Variables are normalised powers x = p / P_m in [0, 1]. With
# A[i, d] = P_m * gain(tx i -> rx d) / (n0 + q_c g_c2d[d]) the SINR is
# x_d A[d, d] / (1 + sum_{i != d} x_i A[i, d]) and the budget reads a.x <= b
# with a = P_m h / Q and b = 1.

@njit(cache=True)
def _objective(x, A):
    m = x.shape[0]
    f = 0.0
    for d in range(m):
        tot = 1.0
        for i in range(m):
            tot += x[i] * A[i, d]
        f += math.log(tot) - math.log(tot - x[d] * A[d, d])
    return f


@njit(cache=True)
def _gradient(x, A, out):
    m = x.shape[0]
    tot = np.empty(m)
    inter = np.empty(m)
    for d in range(m):
        t = 1.0
        for i in range(m):
            t += x[i] * A[i, d]
        tot[d] = t
        inter[d] = t - x[d] * A[d, d]
    for j in range(m):
        g = 0.0
        for d in range(m):
            g += A[j, d] / tot[d]
            if d != j:
                g -= A[j, d] / inter[d]
        out[j] = g


@njit(cache=True)
def _budget_use(y, lam, a):
    s = 0.0
    for i in range(y.shape[0]):
        v = y[i] - lam * a[i]
        if v > 1.0:
            v = 1.0
        elif v < 0.0:
            v = 0.0
        s += a[i] * v
    return s


@njit(cache=True)
def _project(y, a, b, out):
    """Euclidean projection onto {0 <= x <= 1, a.x <= b}."""
    m = y.shape[0]
    s = 0.0
    for i in range(m):
        v = min(1.0, max(0.0, y[i]))
        out[i] = v
        s += a[i] * v
    if s <= b:
        return
    # a.clip(y - lam a) is piecewise linear and non-increasing in lam
    bps = np.empty(2 * m)
    for i in range(m):
        bps[2 * i] = (y[i] - 1.0) / a[i]
        bps[2 * i + 1] = y[i] / a[i]
    bps.sort()
    lo, g_lo = 0.0, s
    lam = 0.0
    found = False
    for j in range(2 * m):
        bp = bps[j]
        if bp <= lo:
            continue
        g_bp = _budget_use(y, bp, a)
        if g_bp <= b:
            lam = lo + (g_lo - b) * (bp - lo) / (g_lo - g_bp)
            found = True
            break
        lo, g_lo = bp, g_bp
    if not found:
        lam = lo
    for i in range(m):
        out[i] = min(1.0, max(0.0, y[i] - lam * a[i]))
    # guard the budget against rounding in the interpolation
    s = 0.0
    for i in range(m):
        s += a[i] * out[i]
    if s > b:
        scale = b / s
        for i in range(m):
            out[i] *= scale


@njit(cache=True)
def _kkt_residual(x, g, a, b, work):
    for i in range(x.shape[0]):
        work[i] = x[i] + g[i]
    proj = np.empty_like(x)
    _project(work, a, b, proj)
    r = 0.0
    for i in range(x.shape[0]):
        r = max(r, abs(proj[i] - x[i]))
    return r


@njit(cache=True)
def _pga(x0, A, a, b, iters, tol, history):
    """Projected gradient ascent.

    Trial steps follow the Barzilai-Borwein rule; an Armijo backtrack along
    the projection arc keeps the objective non-decreasing.
    """
    m = x0.shape[0]
    x = np.empty(m)
    _project(x0, a, b, x)
    fx = _objective(x, A)
    g = np.empty(m)
    g_old = np.empty(m)
    x_old = np.empty(m)
    y = np.empty(m)
    xn = np.empty(m)
    alpha = 1.0
    resid = np.inf
    n = 0
    converged = False
    flat = 0
    for it in range(iters):
        history[it] = fx
        n = it + 1
        _gradient(x, A, g)
        resid = _kkt_residual(x, g, a, b, y)
        if resid <= tol:
            converged = True
            break
        if it > 0:
            ss = 0.0
            sy = 0.0
            for i in range(m):
                si = x[i] - x_old[i]
                ss += si * si
                sy -= si * (g[i] - g_old[i])
            alpha = ss / sy if sy > 0.0 else alpha * 4.0
            alpha = min(max(alpha, 1e-30), 1e30)
        accepted = False
        while alpha > 1e-30:
            for i in range(m):
                y[i] = x[i] + alpha * g[i]
            _project(y, a, b, xn)
            fn = _objective(xn, A)
            lin = 0.0
            for i in range(m):
                lin += g[i] * (xn[i] - x[i])
            if fn >= fx + 1e-4 * lin:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        step = 0.0
        for i in range(m):
            step = max(step, abs(xn[i] - x[i]))
            x_old[i] = x[i]
            g_old[i] = g[i]
            x[i] = xn[i]
        # objective stuck at rounding level: further steps cannot be verified
        flat = flat + 1 if fn - fx <= 1e-15 * max(1.0, abs(fx)) else 0
        fx = fn
        if step == 0.0 or flat >= 5:
            _gradient(x, A, g)
            resid = _kkt_residual(x, g, a, b, y)
            converged = resid <= tol
            break
    return x, fx, resid, converged, n


@dataclass(frozen=True)
class LocalOptResult:
    powers: np.ndarray      # aligned with the members list
    objective: float        # summed rate, nats
    kkt_residual: float
    converged: bool
    history: np.ndarray     # objective per iteration of the winning start


def _channel_system(members: Sequence[int], k: int, inst: NetworkInstance):
    p = inst.params
    pm = p.max_d2d_power_w
    idx = np.asarray(members, dtype=int)
    G = inst.g_x[k][np.ix_(idx, idx)].copy()
    G[np.diag_indices(len(idx))] = inst.g_dd[k, idx]
    noise = p.noise_power_w + p.cu_power_w * inst.g_c2d[k, idx]
    A = pm * G / noise[None, :]
    # budget normalised to 1
    a = pm * inst.h_d2b[k, idx] / inst.q_budget[k]
    return np.ascontiguousarray(A), np.ascontiguousarray(a), 1.0


def local_power_opt(members: Sequence[int], k: int, inst: NetworkInstance,
                    iters: int = 3000, tol: float = 1e-6, seed: int = 0) -> LocalOptResult:
    """Locally maximise the channel's summed rate under the box and budget constraints.

    Starts: full power scaled into the budget, the priced (bisection) point
    and three random feasible points. The best local optimum is returned.
    """
    members = list(members)
    if not members:
        raise ValueError("local_power_opt needs at least one member")
    pm = inst.params.max_d2d_power_w
    A, a, b = _channel_system(members, k, inst)
    m = len(members)

    rng = np.random.default_rng(seed)
    starts = [np.full(m, min(1.0, b / a.sum()))]
    _, priced, _, _ = bisect_price(k, members, inst)
    starts.append(priced / pm)
    for _ in range(3):
        x = rng.random(m)
        use = a @ x
        starts.append(x * min(1.0, b / use) if use > 0 else x)

    best = None
    for x0 in starts:
        history = np.empty(iters)
        x, fx, resid, conv, n = _pga(np.asarray(x0, dtype=float), A, a, b, iters, tol, history)
        if best is None or fx > best[1]:
            best = (x, fx, resid, conv, history[:n].copy())
    x, fx, resid, conv, hist = best
    return LocalOptResult(np.clip(x * pm, 0.0, pm), float(fx), float(resid), bool(conv), hist)


def channel_rate_sum(members: Sequence[int], k: int, powers, inst: NetworkInstance) -> float:
    """Summed rate on one channel; ``powers`` aligned with ``members``."""
    if len(members) == 0:
        return 0.0
    A, _, _ = _channel_system(members, k, inst)
    return float(_objective(np.asarray(powers, dtype=float) / inst.params.max_d2d_power_w, A))


def brute_force_allocation(inst: NetworkInstance, return_details: bool = False, **opt_kw):
    """Enumerate every channel assignment and keep the best after local power optimisation.

    Every subset of pairs can occupy every channel, so the per-channel optima
    are tabulated once (K * 2**D solves) and each assignment is a table lookup.
    """
    K, D = inst.K, inst.D
    if K**D > BRUTE_FORCE_LIMIT:
        raise GuardError(f"brute force needs K**D <= {BRUTE_FORCE_LIMIT}; got {K}**{D} = {K**D}")

    table = np.zeros((K, 2**D))
    solutions: dict = {}
    all_converged = True
    for k in range(K):
        for mask in range(1, 2**D):
            members = [d for d in range(D) if mask >> d & 1]
            res = local_power_opt(members, k, inst, **opt_kw)
            table[k, mask] = res.objective
            solutions[k, mask] = res
            all_converged &= res.converged

    assignments = np.array(list(itertools.product(range(K), repeat=D)), dtype=np.int64)
    bits = 1 << np.arange(D, dtype=np.int64)
    totals = np.zeros(len(assignments))
    for k in range(K):
        masks = ((assignments == k) * bits).sum(axis=1)
        totals += table[k, masks]
    best = int(np.argmax(totals))
    assign = tuple(int(k) for k in assignments[best])

    p = np.zeros(D)
    for k in range(K):
        mask = int(sum(1 << d for d in range(D) if assign[d] == k))
        if mask:
            members = [d for d in range(D) if mask >> d & 1]
            p[members] = solutions[k, mask].powers
    mu = Matching(assign, K)
    powers = PowerProfile(p, inst.params.max_d2d_power_w)
    if return_details:
        return mu, powers, {"objective": float(totals[best]), "converged": all_converged,
                            "assignments": len(assignments)}
    return mu, powers

