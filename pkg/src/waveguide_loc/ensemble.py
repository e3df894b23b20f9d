"""Disorder-averaged experiments with reproducible, schedule-independent seeding.

Realization ``i`` draws its disorder from ``realization_seed(master_seed, i)``
and nothing else, so an ensemble can be evaluated in any order and on any
number of worker processes.  Per-realization observables are folded into
running moments with a pairwise tree whose shape depends only on the
realization count; the result is therefore bit-identical for any worker
count.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Iterable, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .dynamics import default_time_grid, fit_localization_length, initial_state, propagate
from .entanglement import entropy_from_amplitudes
from .model import SystemParams, build_hamiltonian, sample_disorder
from .spectrum import eigenvalues, gap_statistics, sort_spectrum

__all__ = [
    "OBSERVABLES",
    "WORKERS_ENV",
    "EnsembleSpec",
    "EnsembleResult",
    "EnsembleError",
    "Moments",
    "realization_seed",
    "run_ensemble",
    "sweep",
    "central_cut",
]

log = logging.getLogger(__name__)

OBSERVABLES = frozenset(
    {"populations", "total_population", "entropy", "localization_fit", "gap_statistics"}
)
DYNAMIC = frozenset({"populations", "total_population", "entropy", "localization_fit"})
GAP_KEYS = ("r_a", "v_I", "v_I_raw", "n_valid")
SWEEP_KEYS = ("disorder_width", "xi", "n_atoms")
WORKERS_ENV = "WAVEGUIDE_LOC_WORKERS"
MAX_FAILURE_FRACTION = 0.01


class EnsembleError(RuntimeError):
    pass


def realization_seed(master_seed: int, index: int) -> int:
    """64-bit seed for realization ``index``, mixed from ``(master_seed, index)``."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def central_cut(n_atoms: int) -> int:
    """Bipartition after the central site: the left block holds sites ``0..(N-1)/2``."""
    return (n_atoms + 1) // 2


@dataclass(frozen=True)
class EnsembleSpec:
    """What to average and over how many disorder draws.

    ``spectrum_source`` replaces the Hamiltonian eigenvalues with
    ``spectrum_source(params, seed)``; it exists for feeding synthetic
    spectra through the statistics pipeline and must be picklable.
    """

    params: SystemParams
    n_realizations: int = 200
    master_seed: int = 0
    observables: frozenset = frozenset({"total_population"})
    time_grid: tuple | None = None
    sweep: tuple | None = None
    sweep_key: str = "disorder_width"
    fit_times: tuple = (500.0, 1000.0, 1500.0)
    threshold: float = 0.5
    cut: int | None = None
    spectrum_source: Callable | None = None

    def __post_init__(self):
        obs = frozenset(self.observables)
        unknown = obs - OBSERVABLES
        if unknown:
            raise ValueError(f"unknown observables {sorted(unknown)}")
        if not obs:
            raise ValueError("no observables requested")
        object.__setattr__(self, "observables", obs)
        if int(self.n_realizations) != self.n_realizations or self.n_realizations < 1:
            raise ValueError("n_realizations must be a positive integer")
        if self.time_grid is not None:
            object.__setattr__(self, "time_grid", tuple(float(t) for t in self.time_grid))
        if self.sweep_key not in SWEEP_KEYS:
            raise ValueError(f"sweep_key must be one of {SWEEP_KEYS}")
        if self.sweep is not None:
            values = tuple(self.sweep)
            for v in values:
                self.params.replace(**{self.sweep_key: v})
            object.__setattr__(self, "sweep", values)
        object.__setattr__(self, "fit_times", tuple(float(t) for t in self.fit_times))
        if obs & DYNAMIC and self.sweep_key != "n_atoms":
            initial_state(self.params)

    @property
    def times(self) -> np.ndarray:
        if self.time_grid is None:
            return default_time_grid()
        return np.asarray(self.time_grid)

    def replace(self, **changes) -> "EnsembleSpec":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return EnsembleSpec(**values)


class Moments:
    """Elementwise running count, mean and centred second moment.

    Non-finite entries are treated as missing, so counts may differ between
    elements.
    """

    __slots__ = ("n", "mean", "m2")

    def __init__(self, n, mean, m2):
        self.n = n
        self.mean = mean
        self.m2 = m2

    @classmethod
    def leaf(cls, x) -> "Moments":
        x = np.asarray(x, dtype=float)
        ok = np.isfinite(x)
        return cls(ok.astype(float), np.where(ok, x, 0.0), np.zeros_like(x))

    def merge(self, other: "Moments") -> "Moments":
        n = self.n + other.n
        safe = np.where(n > 0, n, 1.0)
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / safe
        m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / safe
        return Moments(n, mean, m2)

    def push(self, x) -> "Moments":
        return self.merge(Moments.leaf(x))

    @property
    def var(self) -> np.ndarray:
        """Sample variance (``ddof=1``); zero where fewer than two samples."""
        return np.where(self.n > 1, self.m2 / np.where(self.n > 1, self.n - 1, 1.0), 0.0)

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.var)

    @property
    def stderr(self) -> np.ndarray:
        return np.where(self.n > 1, self.std / np.sqrt(np.where(self.n > 0, self.n, 1.0)), 0.0)


class _TreeReducer:
    """Pairwise merge of an ordered stream, shaped like a binary counter."""

    def __init__(self):
        self._stack: list[tuple[int, dict]] = []

    def push(self, leaf: dict):
        level, node = 0, leaf
        while self._stack and self._stack[-1][0] == level:
            _, left = self._stack.pop()
            node = _merge_dicts(left, node)
            level += 1
        self._stack.append((level, node))

    def result(self) -> dict:
        if not self._stack:
            return {}
        _, node = self._stack[-1]
        for _, left in reversed(self._stack[:-1]):
            node = _merge_dicts(left, node)
        return node


def _merge_dicts(a: dict, b: dict) -> dict:
    return {k: a[k].merge(b[k]) for k in a}


def _realize(spec: EnsembleSpec, index: int) -> tuple[int, int, dict | None, str | None]:
    params = spec.params
    seed = realization_seed(spec.master_seed, index)
    try:
        disorder = sample_disorder(params, seed)
        obs = spec.observables
        out = {}
        need_h = bool(obs & DYNAMIC) or spec.spectrum_source is None
        h = build_hamiltonian(params, disorder) if need_h else None
        if obs & DYNAMIC:
            traj = propagate(h, initial_state(params), spec.times)
            pops = traj.populations
            if obs & {"populations", "localization_fit"}:
                out["populations"] = pops
            if "total_population" in obs:
                out["total_population"] = pops.sum(axis=0)
            if "entropy" in obs:
                cut = spec.cut if spec.cut is not None else central_cut(params.n_atoms)
                out["entropy"] = entropy_from_amplitudes(traj.amplitudes, cut)
        if "gap_statistics" in obs:
            if spec.spectrum_source is not None:
                ev = sort_spectrum(spec.spectrum_source(params, seed))
            else:
                ev = eigenvalues(h).eigenvalues
            g = gap_statistics(ev, spec.threshold)
            out.update(r_a=g.r_a, v_I=g.v_I, v_I_raw=g.v_I_raw, n_valid=float(g.n_valid))
        for k, v in out.items():
            if k not in GAP_KEYS and not np.all(np.isfinite(v)):
                raise FloatingPointError(f"non-finite values in {k}")
        return index, seed, out, None
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        return index, seed, None, f"{type(exc).__name__}: {exc}"


def _realize_batch(spec: EnsembleSpec, indices: Sequence[int]):
    with threadpool_limits(limits=1):
        return [_realize(spec, i) for i in indices]


def _batches(n: int, size: int) -> list[range]:
    return [range(i, min(i + size, n)) for i in range(0, n, size)]


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers < 1:
        raise ValueError("worker count must be >= 1")
    return workers


@dataclass
class EnsembleResult:
    """Disorder-averaged observables.

    ``mean``, ``std`` (per-point sample standard deviation, the +-1 sigma
    band) and ``stderr`` are keyed by observable.  Gap-statistic keys are
    ``r_a``, ``v_I``, ``v_I_raw`` and ``n_valid``.
    """

    params: SystemParams
    n_realizations: int
    times: np.ndarray | None
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)
    stderr: dict = field(default_factory=dict)
    count: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def single_sample(self) -> bool:
        """True when standard errors are undefined and reported as zero."""
        return self.n_realizations - len(self.failures) < 2

    def band(self, key: str) -> tuple[np.ndarray, np.ndarray]:
        return self.mean[key] - self.std[key], self.mean[key] + self.std[key]

    @property
    def gap_summary(self):
        from .spectrum import GapSummary

        return GapSummary(
            float(self.mean["r_a"]), float(self.mean["v_I"]),
            float(self.stderr["r_a"]), float(self.stderr["v_I"]),
            int(self.count["r_a"]), float(self.mean["n_valid"]),
        )


def run_ensemble(spec: EnsembleSpec, workers: int | None = None, batch_size: int = 8) -> EnsembleResult:
    """Average the requested observables over ``spec.n_realizations`` disorder draws.

    ``workers`` defaults to the ``WAVEGUIDE_LOC_WORKERS`` environment
    variable, then 1.  Realizations whose linear algebra fails are logged
    with their seed and dropped; more than 1% failures raises
    :class:`EnsembleError`.
    """
    workers = resolve_workers(workers)
    n = int(spec.n_realizations)
    batches = _batches(n, batch_size)
    reducer = _TreeReducer()
    records, failures = [], []

    def consume(results):
        for index, seed, out, err in results:
            if out is None:
                log.warning("realization %d (seed %d) failed: %s", index, seed, err)
                failures.append({"index": index, "seed": seed, "error": err})
                continue
            reducer.push({k: Moments.leaf(v) for k, v in out.items()})
            if "r_a" in out:
                records.append({"seed": seed, "r_a": out["r_a"], "v_I": out["v_I"],
                                "n_valid": int(out["n_valid"])})

    if workers == 1:
        for b in batches:
            consume(_realize_batch(spec, b))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(partial(_realize_batch, spec), batches):
                consume(res)

    if len(failures) > MAX_FAILURE_FRACTION * n:
        raise EnsembleError(
            f"{len(failures)} of {n} realizations failed; seeds "
            f"{[f['seed'] for f in failures]}"
        )
    moments = reducer.result()
    dynamic = bool(spec.observables & DYNAMIC)
    result = EnsembleResult(
        params=spec.params,
        n_realizations=n,
        times=spec.times if dynamic else None,
        records=records,
        failures=failures,
        provenance={
            "master_seed": int(spec.master_seed),
            "version": __version__,
            "params": spec.params.to_dict(),
            "n_realizations": n,
            "observables": sorted(spec.observables),
        },
    )
    for k, m in moments.items():
        result.mean[k] = m.mean
        result.std[k] = m.std
        result.stderr[k] = m.stderr
        result.count[k] = m.n
    if "gap_statistics" in spec.observables and not np.any(result.count.get("r_a", 0) > 0):
        raise EnsembleError("no realization produced any valid gap ratio")
    if "localization_fit" in spec.observables:
        result.fits = _fit_times(spec, result.mean["populations"])
    if "populations" not in spec.observables:
        for d in (result.mean, result.std, result.stderr, result.count):
            d.pop("populations", None)
    return result


def _fit_times(spec: EnsembleSpec, mean_pops: np.ndarray) -> dict:
    times = spec.times
    fits = {}
    for t in spec.fit_times:
        k = int(np.argmin(np.abs(times - t)))
        if not math.isclose(times[k], t, rel_tol=1e-9, abs_tol=1e-9):
            raise ValueError(f"fit time {t} is not on the time grid")
        fits[t] = fit_localization_length(mean_pops[:, k], spec.params.center)
    return fits


def sweep(spec: EnsembleSpec, values: Iterable | None = None, workers: int | None = None) -> list[tuple[float, EnsembleResult]]:
    """Run one ensemble per value of ``spec.sweep_key``; all share the master seed."""
    values = tuple(spec.sweep if values is None else values)
    if not values:
        raise ValueError("sweep list is empty")
    out = []
    for v in values:
        params = spec.params.replace(**{spec.sweep_key: v})
        out.append((v, run_ensemble(spec.replace(params=params, sweep=None), workers=workers)))
    return out
