"""Stage 1: channel allocation as a many-to-one matching with externalities.

Deferred-acceptance initialisation followed by a search for approved swaps
until the matching is strongly swap-stable. Utilities are computed twice:
directly from the gains (``d2d_utility``, ``channel_utility``, ``potential``)
and incrementally inside the swap search. The checkers use the direct path.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import NEG_INF, Matching, NetworkInstance

log = logging.getLogger(__name__)

# A weak inequality may fail by float noise only; a strict one must clear a
# margin so every executed swap raises the potential by a positive amount.
WEAK_TOL = 1e-12
STRICT_TOL = 1e-9


@dataclass(frozen=True)
class PreferenceLists:
    d2d_pref: tuple  # d2d_pref[d]: channels, best first
    ch_pref: tuple   # ch_pref[k]: pairs, best first


def estimated_sinr(d: int, k: int, inst: NetworkInstance) -> float:
    """SINR of pair ``d`` alone on channel ``k`` at full power."""
    p = inst.params
    return p.max_d2d_power_w * inst.g_dd[k, d] / (
        p.noise_power_w + p.cu_power_w * inst.g_c2d[k, d])


def preference_lists(inst: NetworkInstance) -> PreferenceLists:
    p = inst.params
    est = p.max_d2d_power_w * inst.g_dd / (p.noise_power_w + p.cu_power_w * inst.g_c2d)
    # stable sorts: ties go to the lower index
    d2d_pref = tuple(tuple(int(k) for k in np.argsort(-est[:, d], kind="stable"))
                     for d in range(inst.D))
    ch_pref = tuple(tuple(int(d) for d in np.argsort(inst.h_d2b[k], kind="stable"))
                    for k in range(inst.K))
    return PreferenceLists(d2d_pref, ch_pref)


def gs_initialize(inst: NetworkInstance, quota: Optional[int] = None) -> Matching:
    """Deferred acceptance with pairs proposing and channel quota ``quota`` (default D)."""
    K, D = inst.K, inst.D
    quota = D if quota is None else int(quota)
    prefs = preference_lists(inst)
    rank = [{d: r for r, d in enumerate(prefs.ch_pref[k])} for k in range(K)]
    next_choice = [0] * D
    held: list[list[int]] = [[] for _ in range(K)]
    free = deque(range(D))
    while free:
        d = free.popleft()
        if next_choice[d] >= K:
            continue  # rejected everywhere; stays unmatched
        k = prefs.d2d_pref[d][next_choice[d]]
        next_choice[d] += 1
        held[k].append(d)
        if len(held[k]) > quota:
            held[k].sort(key=rank[k].__getitem__)
            free.append(held[k].pop())
    assign: list[Optional[int]] = [None] * D
    for k, ds in enumerate(held):
        for d in ds:
            assign[d] = k
    return Matching(tuple(assign), K)


def phi(mu: Matching, d: int, inst: NetworkInstance) -> float:
    """Channel gain term of pair d's utility (before weighting and channel price)."""
    p = inst.params
    k = mu.assign[d]
    pm, w = p.max_d2d_power_w, p.w_tradeoff
    value = math.log(pm * inst.g_dd[k, d] / p.noise_power_w) - w * p.cu_power_w * inst.g_c2d[k, d]
    for i in mu.members(k):
        if i != d:
            value -= 0.5 * w * pm * (inst.g_x[k, d, i] + inst.g_x[k, i, d])
    return value


def d2d_utility(mu: Matching, d: int, inst: NetworkInstance) -> float:
    if mu.assign[d] is None:
        return NEG_INF
    p = inst.params
    return p.xi1 * phi(mu, d, inst) - p.theta


def channel_load(mu: Matching, k: int, inst: NetworkInstance) -> float:
    """Full-power interference on channel ``k`` relative to its budget."""
    pm = inst.params.max_d2d_power_w
    return sum(pm * inst.h_d2b[k, d] / inst.q_budget[k] for d in mu.members(k))


def channel_utility(mu: Matching, k: int, inst: NetworkInstance) -> float:
    p = inst.params
    members = mu.members(k)
    if not members:
        return 0.0
    return p.theta * len(members) - p.xi2 * max(0.0, channel_load(mu, k, inst) - 1.0)


def potential(mu: Matching, inst: NetworkInstance) -> float:
    if not mu.all_matched():
        raise ValueError("potential is defined only when every pair is matched")
    p = inst.params
    pm, w = p.max_d2d_power_w, p.w_tradeoff
    total = 0.0
    for k in range(inst.K):
        members = mu.members(k)
        for d in members:
            inner = p.cu_power_w * inst.g_c2d[k, d]
            inner += sum(pm * inst.g_x[k, i, d] / 2 for i in members if i != d)
            total += p.xi1 * (math.log(pm * inst.g_dd[k, d] / p.noise_power_w) - w * inner)
        total -= p.xi2 * max(0.0, channel_load(mu, k, inst) - 1.0)
    return total


def swap(mu: Matching, s: int, t: Optional[int], target: int) -> Matching:
    """Exchange the channels of ``s`` and ``t``; ``t=None`` moves ``s`` into a hole on ``target``."""
    m = mu.assign[s]
    changes = {s: target}
    if t is not None:
        changes[t] = m
    return mu.replace(changes)


def _channel_change(count: int, load: float, d_count: int, d_load: float,
                    theta: float, xi2: float) -> float:
    """Change in a channel's utility when ``d_count`` pairs carrying ``d_load`` join it.

    Loads can reach 1e9 for a transmitter next to the base station, so the
    hinge change is taken from ``d_load`` rather than by subtracting two
    large hinge values.
    """
    new = load + d_load
    if count + d_count == 0:
        return -(theta * count - xi2 * max(0.0, load - 1.0))
    if count == 0:
        return theta * d_count - xi2 * max(0.0, d_load - 1.0)
    if load >= 1.0 and new >= 1.0:
        hinge = d_load
    elif load <= 1.0 and new <= 1.0:
        hinge = 0.0
    else:
        hinge = max(0.0, new - 1.0) - max(0.0, load - 1.0)
    return theta * d_count - xi2 * hinge


def swap_deltas(mu: Matching, s: int, t: Optional[int], target: int,
                inst: NetworkInstance) -> tuple[float, float, float]:
    """Utility changes (pair s, pair t, the two channels summed) for one swap."""
    p = inst.params
    m = mu.assign[s]
    new = swap(mu, s, t, target)
    du_s = d2d_utility(new, s, inst) - d2d_utility(mu, s, inst)
    du_t = 0.0 if t is None else d2d_utility(new, t, inst) - d2d_utility(mu, t, inst)
    unit = p.max_d2d_power_w * inst.h_d2b / inst.q_budget[:, None]
    if t is None:
        dm, dn = -unit[m, s], unit[target, s]
        cm, cn = -1, 1
    else:
        dm, dn = unit[m, t] - unit[m, s], unit[target, s] - unit[target, t]
        cm = cn = 0
    dch = (_channel_change(len(mu.members(m)), channel_load(mu, m, inst), cm, dm, p.theta, p.xi2)
           + _channel_change(len(mu.members(target)), channel_load(mu, target, inst), cn, dn,
                             p.theta, p.xi2))
    return du_s, du_t, dch


def _approves(deltas) -> bool:
    return all(x >= -WEAK_TOL for x in deltas) and any(x > STRICT_TOL for x in deltas)


def is_approved_swap(mu: Matching, s: int, t: Optional[int], target: int,
                     inst: NetworkInstance, quota: Optional[int] = None) -> bool:
    """Whether the swap of ``s`` with ``t`` (or a hole on ``target``) is approved.

    Pair ``s`` and ``t`` must each weakly gain, the two channels' summed
    utility must weakly gain, and at least one gain must be strict. A hole
    has no preferences, so its own condition holds with equality.
    """
    if mu.assign[s] is None:
        raise ValueError(f"pair {s} is unmatched")
    m = mu.assign[s]
    if t is not None:
        if mu.assign[t] != target:
            raise ValueError(f"pair {t} is not on channel {target}")
    else:
        quota = mu.num_d2d if quota is None else quota
        if len(mu.members(target)) >= quota:
            return False  # no vacancy
    if target == m or t == s:
        return False
    return _approves(swap_deltas(mu, s, t, target, inst))


def _candidates(mu: Matching, quota: int):
    """All (s, t-or-hole, target) triples in scan order."""
    members = [mu.members(k) for k in range(mu.num_channels)]
    for s in range(mu.num_d2d):
        m = mu.assign[s]
        if m is None:
            continue
        for n in range(mu.num_channels):
            if n == m:
                continue
            if len(members[n]) < quota:
                yield s, None, n
            for t in members[n]:
                yield s, t, n


def is_strongly_swap_stable(mu: Matching, inst: NetworkInstance,
                            quota: Optional[int] = None) -> bool:
    quota = inst.D if quota is None else quota
    return not any(is_approved_swap(mu, s, t, n, inst, quota)
                   for s, t, n in _candidates(mu, quota))


class _SwapSearch:
    """Incremental utility bookkeeping for the swap phase."""

    def __init__(self, mu: Matching, inst: NetworkInstance, quota: int):
        p = inst.params
        pm, w = p.max_d2d_power_w, p.w_tradeoff
        self.inst, self.quota = inst, quota
        self.xi1, self.xi2, self.theta = p.xi1, p.xi2, p.theta
        base = np.log(pm * inst.g_dd / p.noise_power_w) - w * p.cu_power_w * inst.g_c2d
        cost = 0.5 * w * pm * (inst.g_x + inst.g_x.transpose(0, 2, 1))
        load = pm * inst.h_d2b / inst.q_budget[:, None]
        self._cost_np, self._load_np = cost, load
        self.base, self.cost, self.load = base.tolist(), cost.tolist(), load.tolist()
        self.assign = list(mu.assign)
        self._refresh()

    def _refresh(self):
        K = self.inst.K
        mask = np.zeros((K, self.inst.D))
        for d, k in enumerate(self.assign):
            if k is not None:
                mask[k, d] = 1.0
        # S[k][d]: summed pair cost seen by d if it sits on k
        self.S = np.einsum("ki,kid->kd", mask, self._cost_np).tolist()
        self.L = (mask * self._load_np).sum(axis=1).tolist()
        self.count = mask.sum(axis=1).astype(int).tolist()
        self.members = [[d for d, a in enumerate(self.assign) if a == k] for k in range(K)]

    def deltas(self, s: int, t: Optional[int], n: int):
        m = self.assign[s]
        base, cost, S, load = self.base, self.cost, self.S, self.load
        old_s = base[m][s] - S[m][s]
        new_s = base[n][s] - S[n][s] + (cost[n][t][s] if t is not None else 0.0)
        du_s = self.xi1 * (new_s - old_s)
        if t is None:
            du_t = 0.0
            cm, cn = -1, 1
            dm, dn = -load[m][s], load[n][s]
        else:
            old_t = base[n][t] - S[n][t]
            new_t = base[m][t] - S[m][t] + cost[m][s][t]
            du_t = self.xi1 * (new_t - old_t)
            cm = cn = 0
            dm, dn = load[m][t] - load[m][s], load[n][s] - load[n][t]
        dch = (_channel_change(self.count[m], self.L[m], cm, dm, self.theta, self.xi2)
               + _channel_change(self.count[n], self.L[n], cn, dn, self.theta, self.xi2))
        return du_s, du_t, dch

    def first_approved(self):
        K = self.inst.K
        for s, m in enumerate(self.assign):
            if m is None:
                continue
            for n in range(K):
                if n == m:
                    continue
                if self.count[n] < self.quota and _approves(self.deltas(s, None, n)):
                    return s, None, n
                for t in self.members[n]:
                    if _approves(self.deltas(s, t, n)):
                        return s, t, n
        return None

    def apply(self, s: int, t: Optional[int], n: int):
        m = self.assign[s]
        self.assign[s] = n
        if t is not None:
            self.assign[t] = m
        self._refresh()


SwapHook = Callable[[Matching, Matching, int, Optional[int], int], None]


def run_swap_phase(mu: Matching, inst: NetworkInstance, quota: Optional[int] = None,
                   max_swaps: int = 10_000,
                   on_swap: Optional[SwapHook] = None) -> tuple[Matching, int]:
    """Apply the first approved swap in scan order until none is left.

    Scan order: pairs by index, target channels by index, then a hole on the
    target (if it has a vacancy) before its occupants by index. ``on_swap``
    is called as ``on_swap(before, after, s, t, target)``.
    """
    if not mu.all_matched():
        raise ValueError("swap phase needs every pair matched")
    quota = inst.D if quota is None else quota
    search = _SwapSearch(mu, inst, quota)
    count = 0
    while count < max_swaps:
        found = search.first_approved()
        if found is None:
            break
        s, t, n = found
        before = Matching(tuple(search.assign), inst.K)
        search.apply(s, t, n)
        count += 1
        if on_swap is not None:
            on_swap(before, Matching(tuple(search.assign), inst.K), s, t, n)
    else:
        log.warning("swap phase stopped after %d swaps without reaching stability", count)
    return Matching(tuple(search.assign), inst.K), count


def allocate_channels(inst: NetworkInstance, quota: Optional[int] = None,
                      max_swaps: int = 10_000) -> tuple[Matching, int]:
    mu = gs_initialize(inst, quota)
    return run_swap_phase(mu, inst, quota, max_swaps)
