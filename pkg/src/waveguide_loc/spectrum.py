"""Complex spectra of the effective Hamiltonian and gap-ratio statistics.

Eigenvalues are ordered by their real part (the level energy).  Adjacent
levels are kept only where their mean linewidth ``|Im E|`` is below a
fraction of their spacing; gap ratios are formed inside maximal runs of
such valid spacings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .model import EffectiveHamiltonian

__all__ = [
    "R_GOE",
    "R_POISSON",
    "ComplexSpectrum",
    "GapStatistics",
    "GapSummary",
    "eigenvalues",
    "sort_spectrum",
    "filter_valid_pairs",
    "gap_ratios",
    "gap_statistics",
    "mean_gap_ratio",
]

#: mean gap ratio of the Gaussian orthogonal ensemble (level repulsion)
R_GOE = 0.5307
#: mean gap ratio of uncorrelated (Poisson) levels, 2 ln 2 - 1
R_POISSON = 2.0 * math.log(2.0) - 1.0

DEGENERATE_SPACING = 1e-14


@dataclass(frozen=True)
class ComplexSpectrum:
    eigenvalues: np.ndarray
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        ev = np.array(self.eigenvalues, dtype=complex)
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def energies(self) -> np.ndarray:
        return self.eigenvalues.real

    @property
    def decay_rates(self) -> np.ndarray:
        return self.eigenvalues.imag


@dataclass(frozen=True)
class GapStatistics:
    """Per-sample gap-ratio statistics.

    ``v_I`` is the normalized intrasample variance ``mean((r - r_a)^2)``;
    ``v_I_raw`` is the unnormalized sum of squared deviations.
    """

    ratios: np.ndarray
    r_a: float
    v_I: float
    v_I_raw: float
    n_valid: int
    n_degenerate: int = 0

    @property
    def empty(self) -> bool:
        return self.n_valid == 0


class GapSummary(NamedTuple):
    r_mean: float
    v_I_mean: float
    r_stderr: float
    v_I_stderr: float
    n_samples: int
    n_valid_mean: float


def sort_spectrum(values) -> np.ndarray:
    """Sort ascending by real part, ties by imaginary part."""
    ev = np.asarray(values, dtype=complex)
    return ev[np.lexsort((ev.imag, ev.real))]


def eigenvalues(h: EffectiveHamiltonian, source: dict | None = None) -> ComplexSpectrum:
    """Full eigenvalue set of the dense non-Hermitian ``H``."""
    if source is None:
        source = {"params": h.params.to_dict(), "seed": int(h.disorder.seed)}
    try:
        ev = np.linalg.eigvals(h.matrix)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"eigenvalue solver failed for {source}: {exc}") from exc
    return ComplexSpectrum(sort_spectrum(ev), source)


def _spectrum_array(spec) -> np.ndarray:
    if isinstance(spec, ComplexSpectrum):
        return spec.eigenvalues
    return np.asarray(spec, dtype=complex)


def filter_valid_pairs(spec, threshold: float = 0.5, return_degenerate: bool = False):
    """Indices ``j`` whose pair ``(j, j+1)`` is spectrally resolved.

    A pair is valid when ``|Im E_j + Im E_{j+1}| / 2 < threshold * (Re E_{j+1} - Re E_j)``.
    Pairs with real spacing below ``1e-14`` are never valid; their count is
    returned as a second value when ``return_degenerate`` is set.
    """
    ev = _spectrum_array(spec)
    spacing = np.diff(ev.real)
    if np.any(spacing < -1e-12):
        raise ValueError("spectrum must be sorted by real part")
    linewidth = np.abs(ev.imag[:-1] + ev.imag[1:]) / 2
    degenerate = spacing < DEGENERATE_SPACING
    valid = ~degenerate & (linewidth < threshold * spacing)
    idx = np.flatnonzero(valid)
    if return_degenerate:
        return idx, int(degenerate.sum())
    return idx


def gap_ratios(spec, valid_pairs=None) -> GapStatistics:
    """Gap ratios ``min(d_j, d_{j-1}) / max(d_j, d_{j-1})`` within valid sectors.

    ``valid_pairs`` are indices from :func:`filter_valid_pairs`; ``None``
    means all adjacent pairs with nonzero spacing.  A ratio is formed only
    when both neighbouring spacings are valid.
    """
    ev = _spectrum_array(spec)
    spacing = np.diff(ev.real)
    n_degenerate = 0
    if valid_pairs is None:
        valid_pairs, n_degenerate = filter_valid_pairs(ev, threshold=np.inf, return_degenerate=True)
    mask = np.zeros(len(spacing), dtype=bool)
    mask[np.asarray(valid_pairs, dtype=int)] = True
    both = mask[1:] & mask[:-1]
    lo = np.minimum(spacing[1:], spacing[:-1])[both]
    hi = np.maximum(spacing[1:], spacing[:-1])[both]
    ratios = lo / hi
    if ratios.size == 0:
        return GapStatistics(ratios, math.nan, math.nan, math.nan, 0, n_degenerate)
    r_a = float(ratios.mean())
    dev2 = float(np.sum((ratios - r_a) ** 2))
    v_i = dev2 / ratios.size
    return GapStatistics(ratios, r_a, v_i, dev2, int(ratios.size), n_degenerate)


def gap_statistics(spec, threshold: float = 0.5) -> GapStatistics:
    """Filter then compute gap ratios in one call."""
    idx, n_deg = filter_valid_pairs(spec, threshold, return_degenerate=True)
    stats = gap_ratios(spec, idx)
    return GapStatistics(stats.ratios, stats.r_a, stats.v_I, stats.v_I_raw, stats.n_valid, n_deg)


def mean_gap_ratio(samples: Sequence[GapStatistics], raw: bool = False) -> GapSummary:
    """Ensemble mean and standard error of ``r_a`` and ``v_I`` over non-empty samples."""
    kept = [s for s in samples if not s.empty]
    if not kept:
        raise ValueError("no sample produced any gap ratio")
    r = np.array([s.r_a for s in kept])
    v = np.array([s.v_I_raw if raw else s.v_I for s in kept])
    n = len(kept)

    def se(x):
        return float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0

    return GapSummary(float(r.mean()), float(v.mean()), se(r), se(v), n,
                      float(np.mean([s.n_valid for s in kept])))


def equally_spaced_spectrum(params, seed) -> np.ndarray:
    """Synthetic real spectrum ``0, 1, ..., N-1`` (all gap ratios equal 1)."""
    return np.arange(params.n_atoms, dtype=float)


def poisson_spectrum(params, seed) -> np.ndarray:
    """Synthetic uncorrelated levels: cumulative i.i.d. unit exponential spacings."""
    rng = np.random.default_rng(seed)
    return np.cumsum(rng.exponential(1.0, size=params.n_atoms))


SYNTHETIC_SPECTRA = {"equal": equally_spaced_spectrum, "poisson": poisson_spectrum}
