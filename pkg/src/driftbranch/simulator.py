"""Monte Carlo front end: parameter records, trajectories, replica ensembles.

Replicas are independent; replica i of an ensemble takes the i-th output of
the splitmix64 stream seeded at base_seed as its own 64-bit seed, which feeds
both the numpy Generator drawing its initial configuration and the engine's
xorshift128+ event stream. Results are therefore reproducible bit for bit
regardless of how replicas are scheduled across processes.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _engine
from .core import Configuration, InitialStateSpec, WeightFunction, sample_initial
from .kernels import CycleKernel, kernel_from_json


class SimulationError(ValueError):
    """Invalid simulation parameters."""


def _tab_cdf(tab_x, tab_y):
    if tab_x.size == 0:
        return np.empty(0)
    seg = 0.5 * (tab_y[1:] + tab_y[:-1]) * np.diff(tab_x)
    return np.concatenate([[0.0], np.cumsum(seg)])


@dataclass(frozen=True)
class ModelParams:
    """Immutable run parameters for the event engine."""

    kernel: CycleKernel
    m: float = 0.0
    horizon: float = 1.0
    n_max: int = 1_000_000
    record_grid: tuple = ()
    branching: bool = True
    weights: tuple = ()

    def __post_init__(self):
        if self.m < 0 or not np.isfinite(self.m):
            raise SimulationError(f"death rate m must be finite and >= 0, got {self.m}")
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise SimulationError(f"horizon must be > 0, got {self.horizon}")
        if self.n_max < 1:
            raise SimulationError(f"n_max must be >= 1, got {self.n_max}")
        grid = tuple(float(t) for t in (self.record_grid or (self.horizon,)))
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise SimulationError("record_grid must be sorted ascending")
        if grid and (grid[0] < 0 or grid[-1] > self.horizon):
            raise SimulationError("record_grid must lie within [0, horizon]")
        object.__setattr__(self, "record_grid", grid)
        object.__setattr__(self, "weights", tuple(self.weights))
        for w in self.weights:
            if not isinstance(w, WeightFunction):
                raise SimulationError(f"weights must be WeightFunction values, got {w!r}")

    def engine_args(self):
        kcode, kp0, kp1, tab_x, tab_y = (0, 1.0, 1.0, np.empty(0), np.empty(0))
        if self.branching:
            kcode, kp0, kp1, tab_x, tab_y = self.kernel.engine_params()
        tab_c = _tab_cdf(tab_x, tab_y)
        rec = np.asarray(self.record_grid, dtype=float)
        w_code = np.array([w.engine_params()[0] for w in self.weights], dtype=np.int64)
        w_p0 = np.array([w.engine_params()[1] for w in self.weights], dtype=float)
        w_p1 = np.array([w.engine_params()[2] for w in self.weights], dtype=float)
        return (
            float(self.m),
            float(self.horizon),
            bool(self.branching),
            int(self.n_max),
            int(kcode),
            float(kp0),
            float(kp1),
            tab_x,
            tab_y,
            tab_c,
            rec,
            w_code,
            w_p0,
            w_p1,
        )

    def to_json(self):
        return {
            "kernel": self.kernel.to_json(),
            "m": self.m,
            "T": self.horizon,
            "n_max": self.n_max,
            "record_grid": list(self.record_grid),
            "branching": self.branching,
            "weights": [w.to_json() for w in self.weights],
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            kernel=kernel_from_json(obj["kernel"]),
            m=float(obj.get("m", 0.0)),
            horizon=float(obj.get("T", obj.get("horizon", 1.0))),
            n_max=int(obj.get("n_max", 1_000_000)),
            record_grid=tuple(obj.get("record_grid", ())),
            branching=bool(obj.get("branching", True)),
            weights=tuple(WeightFunction.from_json(w) for w in obj.get("weights", ())),
        )


@dataclass(frozen=True)
class Trajectory:
    """Recorded statistics of one replica; N == -1 marks grid times after a cap."""

    times: np.ndarray
    N: np.ndarray
    h: dict
    capped: bool
    capped_at: Optional[float]
    extinct_at: Optional[float]
    seed: int
    n_fissions: int
    n_deaths: int
    final_time: Optional[float] = None
    final_config: Optional[Configuration] = None
    events: Optional[np.ndarray] = None  # columns: time, code (0 fission, 1 death), N after


def _none_if_nan(x):
    x = float(x)
    return None if np.isnan(x) else x


def run_replica(
    params: ModelParams,
    init: Configuration,
    seed: int,
    collect_final: bool = True,
    collect_events: bool = False,
) -> Trajectory:
    """Exact simulation of a single replica, deterministic in (params, init, seed)."""
    args = params.engine_args()
    (m, T, branching, n_max, kcode, kp0, kp1, tab_x, tab_y, tab_c, rec, w_code, w_p0, w_p1) = args
    (
        rec_N,
        rec_h,
        capped,
        capped_at,
        extinct_at,
        n_fissions,
        n_deaths,
        _final_n,
        final_time,
        final_traits,
        ev_t,
        ev_code,
        ev_n,
    ) = _engine.run_replica_core(
        np.asarray(init.traits, dtype=float),
        m,
        T,
        branching,
        n_max,
        kcode,
        kp0,
        kp1,
        tab_x,
        tab_y,
        tab_c,
        rec,
        w_code,
        w_p0,
        w_p1,
        np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF),
        collect_final,
        collect_events,
    )
    h = {w.label: rec_h[i] for i, w in enumerate(params.weights)}
    events = np.column_stack([ev_t, ev_code, ev_n]) if collect_events else None
    return Trajectory(
        times=rec,
        N=rec_N,
        h=h,
        capped=bool(capped),
        capped_at=_none_if_nan(capped_at),
        extinct_at=_none_if_nan(extinct_at),
        seed=int(seed),
        n_fissions=int(n_fissions),
        n_deaths=int(n_deaths),
        final_time=float(final_time),
        final_config=Configuration(final_traits) if collect_final else None,
        events=events,
    )


@dataclass(frozen=True)
class EnsembleSummary:
    """Per-grid-time statistics over the valid (not yet capped) replicas."""

    times: np.ndarray
    n_replicas: int
    n_valid: np.ndarray
    mean_N: np.ndarray
    se_N: np.ndarray
    mean_h: np.ndarray  # (n_weights, n_times)
    se_h: np.ndarray
    capped_fraction: np.ndarray
    extinct_fraction: np.ndarray
    live_fraction: np.ndarray
    weight_labels: tuple


@dataclass(frozen=True)
class ReplicaEnsemble:
    """Raw per-replica records plus the seeds that produced them."""

    params: ModelParams
    base_seed: int
    seeds: np.ndarray
    N: np.ndarray  # (n_replicas, n_times), -1 after a replica capped
    h: np.ndarray  # (n_replicas, n_weights, n_times)
    capped: np.ndarray
    capped_at: np.ndarray
    extinct_at: np.ndarray
    final_n: np.ndarray
    n_fissions: np.ndarray
    n_deaths: np.ndarray

    @property
    def n_replicas(self):
        return int(self.N.shape[0])

    def trajectory(self, i: int) -> Trajectory:
        h = {w.label: self.h[i, j] for j, w in enumerate(self.params.weights)}
        return Trajectory(
            times=np.asarray(self.params.record_grid),
            N=self.N[i],
            h=h,
            capped=bool(self.capped[i]),
            capped_at=_none_if_nan(self.capped_at[i]),
            extinct_at=_none_if_nan(self.extinct_at[i]),
            seed=int(self.seeds[i]),
            n_fissions=int(self.n_fissions[i]),
            n_deaths=int(self.n_deaths[i]),
        )

    def summary(self) -> EnsembleSummary:
        """Recompute summary statistics from the stored per-replica data."""
        times = np.asarray(self.params.record_grid)
        valid = self.N >= 0
        n_valid = valid.sum(axis=0)
        nN = np.where(valid, self.N, 0).astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = nN.sum(axis=0) / n_valid
            dev = np.where(valid, nN - mean, 0.0)
            var = (dev * dev).sum(axis=0) / np.maximum(n_valid - 1, 1)
            se = np.sqrt(var / np.maximum(n_valid, 1))
            mean_h = np.empty((self.h.shape[1], times.size))
            se_h = np.empty_like(mean_h)
            for j in range(self.h.shape[1]):
                hj = np.where(valid, self.h[:, j, :], 0.0)
                mh = hj.sum(axis=0) / n_valid
                dv = np.where(valid, hj - mh, 0.0)
                vh = (dv * dv).sum(axis=0) / np.maximum(n_valid - 1, 1)
                mean_h[j] = mh
                se_h[j] = np.sqrt(vh / np.maximum(n_valid, 1))
        n = self.n_replicas
        capped_fraction = 1.0 - n_valid / n
        extinct_fraction = np.where(valid, self.N == 0, False).sum(axis=0) / n
        live_fraction = np.where(valid, self.N > 0, False).sum(axis=0) / n
        return EnsembleSummary(
            times=times,
            n_replicas=n,
            n_valid=n_valid,
            mean_N=mean,
            se_N=se,
            mean_h=mean_h,
            se_h=se_h,
            capped_fraction=capped_fraction,
            extinct_fraction=extinct_fraction,
            live_fraction=live_fraction,
            weight_labels=tuple(w.label for w in self.params.weights),
        )


def _sample_inits(spec: InitialStateSpec, seeds):
    if spec.fixed is not None:
        base = np.asarray(spec.fixed.traits, dtype=float)
        flat = np.tile(base, len(seeds))
        offsets = np.arange(len(seeds) + 1, dtype=np.int64) * base.size
        return flat, offsets
    traits = []
    for s in seeds:
        rng = np.random.default_rng(int(s))
        traits.append(np.asarray(sample_initial(spec, rng).traits, dtype=float))
    offsets = np.zeros(len(traits) + 1, dtype=np.int64)
    np.cumsum([t.size for t in traits], out=offsets[1:])
    flat = np.concatenate(traits) if traits else np.empty(0)
    return flat, offsets


def _batch_worker(payload):
    flat, offsets, seeds, args = payload
    return _engine.run_batch_core(flat, offsets, seeds, *args)


def run_ensemble(
    params: ModelParams,
    init: InitialStateSpec,
    n_replicas: int,
    base_seed: int,
    jobs: int = 1,
) -> ReplicaEnsemble:
    """Independent replicas; identical output for any jobs value."""
    if n_replicas < 1:
        raise SimulationError(f"n_replicas must be >= 1, got {n_replicas}")
    seeds = np.array([_engine.replica_seed(base_seed, i) for i in range(n_replicas)], dtype=np.uint64)
    flat, offsets = _sample_inits(init, seeds)
    args = params.engine_args()

    if jobs <= 1 or n_replicas < 4:
        results = [_engine.run_batch_core(flat, offsets, seeds, *args)]
    else:
        bounds = np.linspace(0, n_replicas, jobs + 1).astype(int)
        payloads = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            if hi == lo:
                continue
            sub_off = offsets[lo : hi + 1] - offsets[lo]
            sub_flat = flat[offsets[lo] : offsets[hi]]
            payloads.append((sub_flat, sub_off, seeds[lo:hi], args))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_batch_worker, payloads))

    out_N = np.concatenate([r[0] for r in results], axis=0)
    out_h = np.concatenate([r[1] for r in results], axis=0)
    capped = np.concatenate([r[2] for r in results])
    capped_at = np.concatenate([r[3] for r in results])
    extinct_at = np.concatenate([r[4] for r in results])
    final_n = np.concatenate([r[5] for r in results])
    n_fissions = np.concatenate([r[6] for r in results])
    n_deaths = np.concatenate([r[7] for r in results])
    return ReplicaEnsemble(
        params=params,
        base_seed=int(base_seed),
        seeds=seeds,
        N=out_N,
        h=out_h,
        capped=capped,
        capped_at=capped_at,
        extinct_at=extinct_at,
        final_n=final_n,
        n_fissions=n_fissions,
        n_deaths=n_deaths,
    )
