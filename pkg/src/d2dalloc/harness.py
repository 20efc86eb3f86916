"""Monte-Carlo harness: configuration, per-draw scheme runs, sweeps and CSV output."""
from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from . import baselines, matching, metrics, power
from .model import SCHEMES, ConfigError, GuardError, MetricsRecord, NetworkInstance, SimParams
from .scenario import generate_instance

CSV_HEADER = ("run_id", "seed", "scheme", "k_channels", "d_pairs", "tolerance_rel_db",
              "d2d_sum_rate_nats", "cu_sum_rate_nats", "swap_count",
              "bisect_iters_total", "converged")
SWEEP_AXES = ("tolerance_rel_db", "num_d2d", "num_channels")
WORKERS_ENV = "D2D_WORKERS"

_INT_FIELDS = {"num_channels", "num_d2d", "rng_seed"}


@dataclass(frozen=True)
class RunConfig:
    params: SimParams = SimParams()
    schemes: tuple = ("proposed",)

    def __post_init__(self):
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad or not self.schemes:
            raise ConfigError(f"unknown schemes {bad}; choose from {', '.join(SCHEMES)}")


def _coerce(key: str, value):
    if key == "schemes":
        if isinstance(value, str):
            value = [s.strip() for s in value.split(",") if s.strip()]
        return tuple(value)
    if key == "bisect_epsilon" and (value is None or str(value).lower() == "none"):
        return None
    try:
        if key in _INT_FIELDS:
            f = float(value)
            if f != int(f):
                raise ValueError
            return int(f)
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {value!r}") from None


def config_from_mapping(values: Mapping[str, object]) -> RunConfig:
    allowed = set(SimParams.field_names()) | {"schemes"}
    unknown = sorted(set(values) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    coerced = {k: _coerce(k, v) for k, v in values.items()}
    schemes = coerced.pop("schemes", ("proposed",))
    return RunConfig(SimParams(**coerced), schemes)


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def _sub_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


def run_scheme(scheme: str, inst: NetworkInstance, seed: int, run_id: int = 0) -> MetricsRecord:
    swaps, iters, converged = 0, 0, True
    if scheme == "brute_force":
        mu, pw, info = baselines.brute_force_allocation(inst, return_details=True)
        converged = info["converged"]
    else:
        if scheme == "proposed":
            max_swaps = 10_000
            mu, swaps = matching.allocate_channels(inst, max_swaps=max_swaps)
            converged = swaps < max_swaps
        elif scheme == "random":
            mu = baselines.random_allocation(inst, _sub_seed(seed, 1))
        elif scheme == "interference_min":
            mu = baselines.interference_min_allocation(inst)
        elif scheme == "orthogonal":
            mu = baselines.orthogonal_allocation(inst)
        else:
            raise ConfigError(f"unknown scheme {scheme!r}")
        pw, prices = power.allocate_power(mu, inst)
        iters = int(prices.iterations.sum())
    p = inst.params
    return MetricsRecord(
        scheme=scheme, run_id=run_id, seed=seed, k_channels=p.num_channels,
        d_pairs=p.num_d2d, tolerance_rel_db=p.tolerance_rel_db,
        d2d_sum_rate_nats=metrics.d2d_sum_rate(mu, pw, inst),
        cu_sum_rate_nats=metrics.cu_sum_rate(mu, pw, inst),
        swap_count=swaps, bisect_iters_total=iters, converged=converged)


def _check_guard(config: RunConfig):
    p = config.params
    if "brute_force" in config.schemes and p.num_channels**p.num_d2d > baselines.BRUTE_FORCE_LIMIT:
        raise GuardError(f"brute force needs K**D <= {baselines.BRUTE_FORCE_LIMIT}; "
                         f"got {p.num_channels}**{p.num_d2d}")


def run_single(config: RunConfig, run_id: int = 0, seed: Optional[int] = None) -> list[MetricsRecord]:
    """One network draw, every requested scheme on the same draw."""
    _check_guard(config)
    seed = config.params.rng_seed if seed is None else seed
    inst = generate_instance(config.params, seed)
    return [run_scheme(s, inst, seed, run_id) for s in config.schemes]


def _job(args):
    config, run_id, seed = args
    return run_single(config, run_id, seed)


def sweep_jobs(config: RunConfig, axis: str, values: Sequence, runs_per_point: int):
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {', '.join(SWEEP_AXES)}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    if runs_per_point < 1:
        raise ConfigError("runs_per_point must be >= 1")
    master = config.params.rng_seed
    jobs = []
    for i, v in enumerate(values):
        point = replace(config, params=replace(config.params, **{axis: _coerce(axis, v)}))
        _check_guard(point)
        for r in range(runs_per_point):
            run_id = i * runs_per_point + r
            jobs.append((point, run_id, master + run_id))
    return jobs


def run_sweep(config: RunConfig, axis: str, values: Sequence, runs_per_point: int,
              workers: Optional[int] = None) -> Iterator[MetricsRecord]:
    """Stream records ordered by run_id; seeds are ``master_seed + run_id``.

    Configuration errors surface here, before any record is produced.
    """
    jobs = sweep_jobs(config, axis, values, runs_per_point)
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    return _stream(jobs, workers)


def _stream(jobs, workers: int) -> Iterator[MetricsRecord]:
    if workers <= 1:
        for job in jobs:
            yield from _job(job)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order
        for records in pool.map(_job, jobs, chunksize=max(1, len(jobs) // (8 * workers))):
            yield from records


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(records: Iterable[MetricsRecord], fh) -> int:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    n = 0
    for rec in records:
        writer.writerow([_fmt(getattr(rec, name)) for name in CSV_HEADER])
        n += 1
    return n


def read_csv(fh) -> list[MetricsRecord]:
    types = {f.name: f.type for f in fields(MetricsRecord)}
    out = []
    for row in csv.DictReader(fh):
        kw = {}
        for name, raw in row.items():
            t = types[name]
            if t == "bool":
                kw[name] = raw == "true"
            elif t == "int":
                kw[name] = int(raw)
            elif t == "float":
                kw[name] = float(raw)
            else:
                kw[name] = raw
        out.append(MetricsRecord(**kw))
    return out
