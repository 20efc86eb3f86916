"""Domain types for the D2D underlay allocator.

Everything here is immutable once built. Powers are linear watts, gains are
linear, rates are nats. Validation happens in ``__post_init__`` so a bad
object never reaches an algorithm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

# Utility of an unmatched pair / payoff at zero power. Compared, never summed.
NEG_INF = float("-inf")

SCHEMES = ("proposed", "random", "interference_min", "orthogonal", "brute_force")


class ConfigError(ValueError):
    """Invalid parameters or inputs."""


class GuardError(RuntimeError):
    """A size guard refused to run (e.g. brute-force enumeration too large)."""


def _frozen_array(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SimParams:
    cell_radius_m: float = 500.0
    noise_power_w: float = 1e-13
    pathloss_exp: float = 4.0
    cu_power_w: float = 0.02
    max_d2d_power_w: float = 0.02
    d2d_link_length_m: float = 50.0
    num_channels: int = 4
    num_d2d: int = 10
    tolerance_rel_db: float = 0.0
    xi1: float = 1.0
    xi2: float = 1.0
    theta: float = 1.0
    w_tradeoff: float = 6e6
    # None selects the per-channel default, see power.default_epsilon
    bisect_epsilon: Optional[float] = None
    rng_seed: int = 0

    def __post_init__(self):
        positive = ("cell_radius_m", "noise_power_w", "cu_power_w",
                    "max_d2d_power_w", "d2d_link_length_m")
        for name in positive:
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be > 0 (got {v!r})")
        if not self.pathloss_exp >= 2:
            raise ConfigError(f"pathloss_exp must be >= 2 (got {self.pathloss_exp!r})")
        if int(self.num_channels) != self.num_channels or self.num_channels < 1:
            raise ConfigError(f"num_channels must be >= 1 (got {self.num_channels!r})")
        if int(self.num_d2d) != self.num_d2d or self.num_d2d < 1:
            raise ConfigError(f"num_d2d must be >= 1 (got {self.num_d2d!r})")
        for name in ("tolerance_rel_db", "xi1", "xi2", "theta", "w_tradeoff"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if self.bisect_epsilon is not None and not self.bisect_epsilon > 0:
            raise ConfigError(f"bisect_epsilon must be > 0 (got {self.bisect_epsilon!r})")

    @property
    def tolerance_linear(self) -> float:
        return 10.0 ** (self.tolerance_rel_db / 10.0)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass(frozen=True)
class Placement:
    """Node coordinates in meters; the base station sits at the origin."""

    cu_xy: np.ndarray
    d2d_tx_xy: np.ndarray
    d2d_rx_xy: np.ndarray
    bs_xy: tuple = (0.0, 0.0)

    def __post_init__(self):
        for name in ("cu_xy", "d2d_tx_xy", "d2d_rx_xy"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))


@dataclass(frozen=True)
class NetworkInstance:
    """Gains for one network draw.

    Array layout (K channels, D pairs):

    - ``g_dd[k, d]``: own link gain of pair ``d``
    - ``g_x[k, i, d]``: D2D tx ``i`` -> D2D rx ``d``; the diagonal is unused and stored as 0
    - ``g_c2d[k, d]``: CU ``k`` -> D2D rx ``d``
    - ``h_d2b[k, d]``: D2D tx ``d`` -> base station
    - ``g_c2b[k]``: CU ``k`` -> base station
    - ``q_budget[k]``: interference tolerance in watts
    """

    g_dd: np.ndarray
    g_x: np.ndarray
    g_c2d: np.ndarray
    h_d2b: np.ndarray
    g_c2b: np.ndarray
    q_budget: np.ndarray
    params: SimParams
    placement: Optional[Placement] = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("g_dd", "g_x", "g_c2d", "h_d2b", "g_c2b", "q_budget"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))
        K, D = self.params.num_channels, self.params.num_d2d
        shapes = {"g_dd": (K, D), "g_x": (K, D, D), "g_c2d": (K, D),
                  "h_d2b": (K, D), "g_c2b": (K,), "q_budget": (K,)}
        for name, shape in shapes.items():
            if getattr(self, name).shape != shape:
                raise ConfigError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        off_diag = ~np.eye(D, dtype=bool)
        checks = {
            "g_dd": self.g_dd, "g_x": self.g_x[:, off_diag], "g_c2d": self.g_c2d,
            "h_d2b": self.h_d2b, "g_c2b": self.g_c2b, "q_budget": self.q_budget,
        }
        for name, arr in checks.items():
            if not (np.all(np.isfinite(arr)) and np.all(arr > 0)):
                raise ConfigError(f"{name} entries must be finite and > 0")
        if np.any(self.g_x[:, ~off_diag] != 0):
            raise ConfigError("g_x diagonal must be zero")

    @property
    def K(self) -> int:
        return self.params.num_channels

    @property
    def D(self) -> int:
        return self.params.num_d2d

    def with_params(self, **changes) -> "NetworkInstance":
        """Same gains under different scalar parameters (budgets are kept)."""
        from dataclasses import replace
        return replace(self, params=replace(self.params, **changes))


@dataclass(frozen=True)
class Matching:
    """Channel of every D2D pair; ``None`` means unmatched."""

    assign: tuple
    num_channels: int

    def __post_init__(self):
        assign = tuple(None if a is None else int(a) for a in self.assign)
        for a in assign:
            if a is not None and not 0 <= a < self.num_channels:
                raise ConfigError(f"channel index {a} out of range [0, {self.num_channels})")
        object.__setattr__(self, "assign", assign)

    @classmethod
    def from_list(cls, assign: Sequence[Optional[int]], num_channels: int) -> "Matching":
        return cls(tuple(assign), num_channels)

    def to_list(self) -> list:
        return list(self.assign)

    @property
    def num_d2d(self) -> int:
        return len(self.assign)

    def members(self, k: int) -> list[int]:
        return [d for d, a in enumerate(self.assign) if a == k]

    def all_matched(self) -> bool:
        return all(a is not None for a in self.assign)

    def replace(self, changes: dict[int, Optional[int]]) -> "Matching":
        assign = list(self.assign)
        for d, k in changes.items():
            assign[d] = k
        return Matching(tuple(assign), self.num_channels)


@dataclass(frozen=True)
class PowerProfile:
    p: np.ndarray
    p_max: float

    def __post_init__(self):
        p = _frozen_array(self.p)
        if p.ndim != 1:
            raise ConfigError("power vector must be 1-D")
        if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > self.p_max):
            raise ConfigError(f"powers must lie in [0, {self.p_max}]")
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class PriceResult:
    c: np.ndarray
    iterations: np.ndarray
    tight: np.ndarray

    def __post_init__(self):
        c = _frozen_array(self.c)
        it = _frozen_array(self.iterations, dtype=int)
        tight = _frozen_array(self.tight, dtype=bool)
        if np.any(c < 0):
            raise ConfigError("prices must be >= 0")
        if np.any(c[~tight] != 0):
            raise ConfigError("a slack channel must carry zero price")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "iterations", it)
        object.__setattr__(self, "tight", tight)


@dataclass(frozen=True)
class MetricsRecord:
    scheme: str
    run_id: int
    seed: int
    k_channels: int
    d_pairs: int
    tolerance_rel_db: float
    d2d_sum_rate_nats: float
    cu_sum_rate_nats: float
    swap_count: int = 0
    bisect_iters_total: int = 0
    converged: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        for name in ("d2d_sum_rate_nats", "cu_sum_rate_nats"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be finite and >= 0 (got {v!r})")
