"""Invariant suites run by ``d2dalloc audit``: lower bound, stability, equilibrium, Pareto."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import matching, metrics, power
from .model import NetworkInstance, SimParams
from .scenario import generate_instance


def member_rates(k: int, members: Sequence[int], powers_by_member, inst: NetworkInstance) -> np.ndarray:
    full = np.zeros(inst.D)
    full[list(members)] = powers_by_member
    return np.array([math.log1p(power.sinr(d, k, full, members, inst)) for d in members])


def ne_gap(k: int, members: Sequence[int], c_k: float, powers_by_member,
           inst: NetworkInstance, grid_points: int = 1001) -> float:
    """Largest payoff gain any member gets by a unilateral move on a power grid."""
    full = np.zeros(inst.D)
    full[list(members)] = powers_by_member
    grid = np.linspace(0.0, inst.params.max_d2d_power_w, grid_points)
    worst = -math.inf
    for d in members:
        current = power.payoff(d, full, c_k, k, members, inst)
        trial = full.copy()
        for q in grid:
            trial[d] = q
            worst = max(worst, power.payoff(d, trial, c_k, k, members, inst) - current)
    return worst


def pareto_dominations(k: int, members: Sequence[int], powers_by_member, inst: NetworkInstance,
                       samples: int = 1000, slack: float = 1e-12, seed: int = 0) -> int:
    """Count random feasible profiles that Pareto-dominate the given one."""
    rng = np.random.default_rng(seed)
    pm = inst.params.max_d2d_power_w
    h = inst.h_d2b[k, list(members)]
    q = inst.q_budget[k]
    base = member_rates(k, members, powers_by_member, inst)
    hits = 0
    for _ in range(samples):
        step = pm * 10.0 ** rng.uniform(-6, 0)
        trial = np.clip(powers_by_member + step * rng.uniform(-1, 1, len(members)), 0.0, pm)
        use = trial @ h
        if use > q:
            trial *= q / use
        rates = member_rates(k, members, trial, inst)
        if np.all(rates >= base - slack) and np.any(rates > base + slack):
            hits += 1
    return hits


def run_audit(params: SimParams, instances: int, suites: Sequence[str], seed: int = 0) -> dict:
    """Run the requested suites over ``instances`` draws; returns per-suite failure counts."""
    failures = {s: 0 for s in suites}
    checked = {s: 0 for s in suites}
    for i in range(instances):
        inst = generate_instance(params, seed + i)
        mu, _ = matching.allocate_channels(inst)
        if "lemma1" in suites:
            checked["lemma1"] += 1
            failures["lemma1"] += not metrics.lemma1_audit(mu, inst)[2]
        if "stability" in suites:
            checked["stability"] += 1
            failures["stability"] += not matching.is_strongly_swap_stable(mu, inst)
        if "ne" in suites or "pareto" in suites:
            for k in range(inst.K):
                members = mu.members(k)
                if not members:
                    continue
                c, p, _, tight = power.bisect_price(k, members, inst)
                if "ne" in suites:
                    checked["ne"] += 1
                    failures["ne"] += ne_gap(k, members, c, p, inst) > 1e-9
                if "pareto" in suites and tight:
                    checked["pareto"] += 1
                    bad = (not power.is_pareto_tight(p, k, members, inst, 1e-6)
                           or pareto_dominations(k, members, p, inst, seed=i) > 0)
                    failures["pareto"] += bad
    return {s: {"checked": checked[s], "failed": failures[s]} for s in suites}
