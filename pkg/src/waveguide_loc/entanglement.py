"""Half-chain reduced density matrices and von Neumann entropy.

Within the single-excitation manifold the global state is purified by the
vacuum amplitude ``a_0 = sqrt(1 - sum |a_j|^2)``.  Tracing out one side
leaves a matrix on ``{one excitation on a kept site} + {kept side empty}``:

    rho = v v^dag + c |empty><empty|,   v = (a_kept..., a_0),

with ``c`` the population on the traced-out side.  Its nonzero spectrum is
that of a 2x2 Gram matrix, which gives the entropy in O(cut) work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import AmplitudeState, Trajectory

__all__ = [
    "ReducedDensityMatrix",
    "EntropyTrace",
    "PowerLawFit",
    "reduced_density_left",
    "reduced_density_right",
    "von_neumann_entropy",
    "entropy_from_amplitudes",
    "entropy_trace",
    "fit_power_law",
]

NORM_TOL = 1e-9
NEG_EIG_TOL = 1e-8


@dataclass(frozen=True)
class ReducedDensityMatrix:
    """Reduced state of one side of the chain.

    Basis order: the kept sites in chain order, then the "kept side empty"
    state last.
    """

    matrix: np.ndarray
    cut: int
    side: str
    # rank-2 factors: rho = v v^dag + corner_extra * e_last e_last^T
    v: np.ndarray
    corner_extra: float


@dataclass(frozen=True)
class EntropyTrace:
    times: np.ndarray
    entropy: np.ndarray


@dataclass(frozen=True)
class PowerLawFit:
    """``values ~ A t**(-beta)`` fitted on ``window``."""

    beta: float
    amplitude: float
    r_squared: float
    window: tuple[float, float]
    n_points: int


def _vacuum_amplitude(a: np.ndarray) -> float:
    norm2 = float(np.sum(np.abs(a) ** 2))
    if norm2 > 1 + NORM_TOL:
        raise ValueError(f"state norm {norm2:.12g} exceeds 1")
    return math.sqrt(max(0.0, 1.0 - norm2))


def _reduced(a_kept, a_traced, a0, cut, side):
    v = np.append(np.asarray(a_kept, dtype=complex), a0)
    extra = float(np.sum(np.abs(a_traced) ** 2))
    rho = np.outer(v, v.conj())
    rho[-1, -1] += extra
    rho.setflags(write=False)
    v.setflags(write=False)
    return ReducedDensityMatrix(rho, cut, side, v, extra)


def _as_amplitudes(state):
    if isinstance(state, AmplitudeState):
        return state.amplitudes
    return np.asarray(state, dtype=complex)


def reduced_density_left(state: AmplitudeState, cut: int) -> ReducedDensityMatrix:
    """Reduced state of sites ``0..cut-1`` (the first ``cut`` atoms).

    Entries are ``a_i a_j^*`` on the site block, ``a_i a_0^*`` in the last
    row/column and ``1 - sum_{l<cut} |a_l|^2`` in the corner.
    """
    a = _as_amplitudes(state)
    if not 1 <= cut < len(a):
        raise ValueError(f"cut must satisfy 1 <= cut < N={len(a)}, got {cut}")
    return _reduced(a[:cut], a[cut:], _vacuum_amplitude(a), cut, "left")


def reduced_density_right(state: AmplitudeState, cut: int) -> ReducedDensityMatrix:
    """Reduced state of sites ``cut..N-1``, the complement of :func:`reduced_density_left`."""
    a = _as_amplitudes(state)
    if not 1 <= cut < len(a):
        raise ValueError(f"cut must satisfy 1 <= cut < N={len(a)}, got {cut}")
    return _reduced(a[cut:], a[:cut], _vacuum_amplitude(a), cut, "right")


def _entropy_of(eigs):
    eigs = np.asarray(eigs, dtype=float)
    if np.any(eigs < -NEG_EIG_TOL):
        raise ValueError(f"density matrix has eigenvalue {eigs.min():.3g} < 0")
    eigs = eigs[eigs > 0]
    return float(-np.sum(eigs * np.log(eigs)))


def _rank2_eigs(vnorm2, a0, extra):
    # nonzero spectrum of v v^dag + extra e e^T equals that of the Gram matrix
    # [[|v|^2, sqrt(extra) a0], [sqrt(extra) a0, extra]]
    tr = vnorm2 + extra
    det = vnorm2 * extra - extra * a0 * a0
    disc = math.sqrt(max(0.0, tr * tr / 4 - det))
    hi = tr / 2 + disc
    lo = det / hi if hi > 0 else 0.0
    return hi, lo


def von_neumann_entropy(rho: ReducedDensityMatrix | np.ndarray, method: str = "rank2") -> float:
    """``S = -sum_k lambda_k ln lambda_k`` in nats, with ``0 ln 0 = 0``.

    ``method="rank2"`` uses the two-dimensional nonzero subspace;
    ``method="full"`` diagonalizes the whole matrix.  A bare ndarray is
    always diagonalized.
    """
    if isinstance(rho, np.ndarray):
        return _entropy_of(np.linalg.eigvalsh(rho))
    if method == "full":
        return _entropy_of(np.linalg.eigvalsh(rho.matrix))
    if method != "rank2":
        raise ValueError(f"unknown method {method!r}")
    vnorm2 = float(np.sum(np.abs(rho.v) ** 2))
    a0 = float(rho.v[-1].real)
    return _entropy_of(_rank2_eigs(vnorm2, a0, rho.corner_extra))


def entropy_from_amplitudes(amplitudes: np.ndarray, cut: int) -> np.ndarray:
    """Vectorized half-chain entropy for amplitudes of shape ``(N, T)``.

    Left and right partitions have identical entropy, so only one is needed.
    """
    a = np.asarray(amplitudes)
    if a.ndim == 1:
        a = a[:, None]
    p = np.abs(a) ** 2
    left = p[:cut].sum(axis=0)
    right = p[cut:].sum(axis=0)
    total = left + right
    if np.any(total > 1 + NORM_TOL):
        raise ValueError("state norm exceeds 1")
    a0sq = np.clip(1.0 - total, 0.0, None)
    vnorm2 = left + a0sq
    tr = vnorm2 + right
    det = right * (vnorm2 - a0sq)
    disc = np.sqrt(np.clip(tr * tr / 4 - det, 0.0, None))
    hi = tr / 2 + disc
    lo = np.divide(det, hi, out=np.zeros_like(hi), where=hi > 0)

    def h(x):
        return -np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)

    return h(hi) + h(lo)


def entropy_trace(traj: Trajectory, cut: int, method: str = "rank2", side: str = "left") -> EntropyTrace:
    """Half-chain entropy at every point of ``traj``.

    ``method="full"`` builds each reduced density matrix and diagonalizes it
    (slow; a cross-check).
    """
    n = traj.amplitudes.shape[0]
    if not 1 <= cut < n:
        raise ValueError(f"cut must satisfy 1 <= cut < N={n}, got {cut}")
    if method == "rank2":
        s = entropy_from_amplitudes(traj.amplitudes, cut)
    elif method == "full":
        build = reduced_density_left if side == "left" else reduced_density_right
        s = np.array([
            von_neumann_entropy(build(traj.amplitudes[:, k], cut), method="full")
            for k in range(len(traj.times))
        ])
    else:
        raise ValueError(f"unknown method {method!r}")
    return EntropyTrace(np.asarray(traj.times), np.clip(s, 0.0, None))


def fit_power_law(times, values, window=(500.0, 1500.0)) -> PowerLawFit:
    """Least-squares slope of ``ln values`` against ``ln t`` inside ``window``.

    Returns ``beta = -slope`` so that a decaying series has positive ``beta``.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    lo, hi = window
    if lo <= 0 or hi <= lo:
        raise ValueError(f"invalid window {window}")
    if lo < t.min() - 1e-9 or hi > t.max() + 1e-9:
        raise ValueError(f"window {window} outside the grid [{t.min()}, {t.max()}]")
    sel = (t >= lo - 1e-9) & (t <= hi + 1e-9)
    if np.count_nonzero(sel) < 5:
        raise ValueError("fewer than 5 points in the fit window")
    if np.any(y[sel] <= 0):
        raise ValueError("power-law fit needs strictly positive values")
    x = np.log(t[sel])
    ly = np.log(y[sel])
    slope, intercept = np.polyfit(x, ly, 1)
    resid = ly - (slope * x + intercept)
    sst = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / sst if sst > 0 else 1.0
    return PowerLawFit(float(-slope), float(np.exp(intercept)), float(r2),
                       (float(lo), float(hi)), int(sel.sum()))
