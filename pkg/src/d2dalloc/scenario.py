"""Random network draws, unit conversions and the instance text format."""
from __future__ import annotations

import io
import math
from dataclasses import fields

import numpy as np

from .model import ConfigError, NetworkInstance, Placement, SimParams


def dbm_to_watts(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def path_gain(distance_m, eta: float, beta=1.0):
    """Large-scale gain times fading, ``beta * distance**-eta``.

    Works elementwise on arrays.
    """
    distance_m = np.asarray(distance_m, dtype=float)
    if np.any(distance_m <= 0):
        raise ValueError("distance must be > 0")
    out = np.asarray(beta, dtype=float) * distance_m ** (-eta)
    return float(out) if out.ndim == 0 else out


def _uniform_disk(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def _place(params: SimParams, rng: np.random.Generator) -> Placement:
    K, D = params.num_channels, params.num_d2d
    cu = _uniform_disk(rng, K, params.cell_radius_m)
    tx = _uniform_disk(rng, D, params.cell_radius_m)
    phi = rng.uniform(0.0, 2.0 * np.pi, D)
    rx = tx + params.d2d_link_length_m * np.column_stack([np.cos(phi), np.sin(phi)])
    return Placement(cu_xy=cu, d2d_tx_xy=tx, d2d_rx_xy=rx)


def _distances(pl: Placement):
    bs = np.asarray(pl.bs_xy, dtype=float)
    tx_rx = np.linalg.norm(pl.d2d_tx_xy[:, None, :] - pl.d2d_rx_xy[None, :, :], axis=2)
    cu_rx = np.linalg.norm(pl.cu_xy[:, None, :] - pl.d2d_rx_xy[None, :, :], axis=2)
    tx_bs = np.linalg.norm(pl.d2d_tx_xy - bs, axis=1)
    cu_bs = np.linalg.norm(pl.cu_xy - bs, axis=1)
    return tx_rx, cu_rx, tx_bs, cu_bs


def generate_instance(params: SimParams, seed: int) -> NetworkInstance:
    """Draw one network: uniform drops in the cell, Exp(1) fading per link and channel."""
    if not isinstance(params, SimParams):
        raise ConfigError("params must be a SimParams")
    K, D, eta = params.num_channels, params.num_d2d, params.pathloss_exp
    rng = np.random.default_rng(seed)

    # Coincident nodes would give an infinite gain; redraw the whole drop.
    while True:
        pl = _place(params, rng)
        tx_rx, cu_rx, tx_bs, cu_bs = _distances(pl)
        cross = tx_rx[~np.eye(D, dtype=bool)]
        if np.all(cross > 0) and np.all(cu_rx > 0) and np.all(tx_bs > 0) and np.all(cu_bs > 0):
            break

    beta_x = rng.exponential(1.0, size=(K, D, D))
    beta_c2d = rng.exponential(1.0, size=(K, D))
    beta_d2b = rng.exponential(1.0, size=(K, D))
    beta_c2b = rng.exponential(1.0, size=K)

    # Own-link gains sit on the diagonal of the tx->rx draw.
    diag = np.arange(D)
    g_all = beta_x * tx_rx[None, :, :] ** (-eta)
    g_dd = g_all[:, diag, diag].copy()
    g_x = g_all.copy()
    g_x[:, diag, diag] = 0.0

    g_c2d = path_gain(cu_rx, eta, beta_c2d)
    h_d2b = path_gain(np.broadcast_to(tx_bs, (K, D)), eta, beta_d2b)
    g_c2b = np.atleast_1d(path_gain(cu_bs, eta, beta_c2b))
    q_budget = params.tolerance_linear * params.cu_power_w * g_c2b

    return NetworkInstance(g_dd=g_dd, g_x=g_x, g_c2d=g_c2d, h_d2b=h_d2b,
                           g_c2b=g_c2b, q_budget=q_budget, params=params,
                           placement=pl)


# -- instance text format -------------------------------------------------------
#
#   # d2dalloc network instance v1
#   [params]
#   <field> = <value>            one line per SimParams field; "none" for unset
#   [<array>] <dim> <dim> ...    g_dd, g_x, g_c2d, h_d2b, g_c2b, q_budget
#   <row of %.17e values>        row-major, last axis along the line
#
_ARRAYS = ("g_dd", "g_x", "g_c2d", "h_d2b", "g_c2b", "q_budget")
_HEADER = "# d2dalloc network instance v1"


def _fmt(x: float) -> str:
    return f"{x:.17e}"


def dump_instance(inst: NetworkInstance, fh) -> None:
    fh.write(_HEADER + "\n[params]\n")
    for f in fields(SimParams):
        v = getattr(inst.params, f.name)
        if v is None:
            s = "none"
        elif isinstance(v, float):
            s = _fmt(v)
        else:
            s = str(v)
        fh.write(f"{f.name} = {s}\n")
    for name in _ARRAYS:
        arr = getattr(inst, name)
        fh.write(f"[{name}] {' '.join(str(n) for n in arr.shape)}\n")
        rows = arr.reshape(-1, arr.shape[-1])
        for row in rows:
            fh.write(" ".join(_fmt(x) for x in row) + "\n")


def dumps_instance(inst: NetworkInstance) -> str:
    buf = io.StringIO()
    dump_instance(inst, buf)
    return buf.getvalue()


def _parse_param(name: str, raw: str):
    types = {f.name: f.type for f in fields(SimParams)}
    if name not in types:
        raise ConfigError(f"unknown parameter {name!r}")
    if raw.lower() == "none":
        return None
    if name in ("num_channels", "num_d2d", "rng_seed"):
        return int(raw)
    return float(raw)


def load_instance(fh) -> NetworkInstance:
    lines = [ln.strip() for ln in fh.read().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    params: dict = {}
    arrays: dict = {}
    i = 0
    while i < len(lines):
        ln = lines[i]
        if ln == "[params]":
            i += 1
            while i < len(lines) and not lines[i].startswith("["):
                key, _, raw = lines[i].partition("=")
                params[key.strip()] = _parse_param(key.strip(), raw.strip())
                i += 1
        elif ln.startswith("["):
            head, _, dims = ln.partition("]")
            name = head[1:]
            if name not in _ARRAYS:
                raise ConfigError(f"unknown block {name!r}")
            shape = tuple(int(x) for x in dims.split())
            nrows = math.prod(shape[:-1]) if len(shape) > 1 else 1
            rows = [[float(x) for x in lines[i + 1 + r].split()] for r in range(nrows)]
            arrays[name] = np.array(rows, dtype=float).reshape(shape)
            i += 1 + nrows
        else:
            raise ConfigError(f"unexpected line: {ln!r}")
    missing = [n for n in _ARRAYS if n not in arrays]
    if missing:
        raise ConfigError(f"missing blocks: {missing}")
    return NetworkInstance(params=SimParams(**params), **arrays)


def loads_instance(text: str) -> NetworkInstance:
    return load_instance(io.StringIO(text))
