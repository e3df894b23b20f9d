"""System parameters, phase disorder and the effective non-Hermitian Hamiltonian.

The chain lives in the single-excitation subspace, so every operator here is
a dense complex ``N x N`` matrix indexed by the excited site.  Sites are
0-based in arrays; site ``j`` of a 1-based physical labelling is index
``j - 1``.

Disorder enters as a random offset of each atom's optical phase,
``k_s r_mu = xi * mu + W_mu``.  The waveguide-mediated coupling between two
atoms depends on the phase separation ``k_s |r_mu - r_nu|``, which for an
ordered chain is ``xi |mu - nu| + sgn(mu - nu) (W_mu - W_nu)``.  The
resulting matrix is complex symmetric (reciprocal coupling).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SystemParams",
    "DisorderRealization",
    "EffectiveHamiltonian",
    "sample_disorder",
    "build_hamiltonian",
    "decompose",
    "coupling_phases",
]


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the atom-waveguide chain.

    Parameters
    ----------
    n_atoms : int
        Number of atoms ``N`` (>= 2 for a chain; 1 is allowed as a scalar
        test case).
    xi : float
        Interparticle phase ``k_s * d`` in radians.
    disorder_width : float
        Half-width ``w`` of the uniform phase disorder, radians.
    gamma : float
        Single-atom decay rate, sets the unit of rates and inverse times.
    """

    n_atoms: int
    xi: float
    disorder_width: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ValueError(f"n_atoms must be a positive integer, got {self.n_atoms!r}")
        object.__setattr__(self, "n_atoms", int(self.n_atoms))
        if not np.isfinite(self.xi):
            raise ValueError("xi must be finite")
        if not (self.disorder_width >= 0 and np.isfinite(self.disorder_width)):
            raise ValueError(f"disorder_width must be >= 0, got {self.disorder_width!r}")
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise ValueError(f"gamma must be > 0, got {self.gamma!r}")

    @property
    def center(self) -> int:
        """0-based index of the central site (requires odd ``n_atoms``)."""
        if self.n_atoms % 2 == 0:
            raise ValueError(f"central site undefined for even n_atoms={self.n_atoms}")
        return (self.n_atoms - 1) // 2

    def replace(self, **changes) -> "SystemParams":
        values = dict(
            n_atoms=self.n_atoms,
            xi=self.xi,
            disorder_width=self.disorder_width,
            gamma=self.gamma,
        )
        values.update(changes)
        return SystemParams(**values)

    def to_dict(self) -> dict:
        return {
            "n_atoms": self.n_atoms,
            "xi": float(self.xi),
            "disorder_width": float(self.disorder_width),
            "gamma": float(self.gamma),
        }


@dataclass(frozen=True)
class DisorderRealization:
    """One draw of onsite phases ``W_mu`` together with the seed that made it."""

    phases: np.ndarray
    seed: int

    def __post_init__(self):
        phases = np.array(self.phases, dtype=float)
        phases.setflags(write=False)
        object.__setattr__(self, "phases", phases)

    def __len__(self):
        return len(self.phases)

    @classmethod
    def clean(cls, n_atoms: int) -> "DisorderRealization":
        """The disorder-free realization."""
        return cls(np.zeros(n_atoms), seed=0)


@dataclass(frozen=True)
class EffectiveHamiltonian:
    matrix: np.ndarray
    params: SystemParams
    disorder: DisorderRealization = field(repr=False)

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def sample_disorder(params: SystemParams, seed: int) -> DisorderRealization:
    """Draw ``N`` independent phases uniformly from ``[-w, w]``.

    The generator is seeded from ``seed`` alone, so equal ``(params, seed)``
    pairs give bit-identical phases.
    """
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    w = params.disorder_width
    if w == 0:
        return DisorderRealization(np.zeros(params.n_atoms), seed)
    rng = np.random.default_rng(seed)
    return DisorderRealization(rng.uniform(-w, w, size=params.n_atoms), seed)


def coupling_phases(n_atoms: int, xi: float, phases: np.ndarray) -> np.ndarray:
    """Matrix of pairwise optical phase separations ``k_s |r_mu - r_nu|``.

    Uses the ordered-chain form ``xi |mu - nu| + sgn(mu - nu) (W_mu - W_nu)``,
    which is symmetric in ``mu <-> nu``.
    """
    idx = np.arange(n_atoms)
    sep = idx[:, None] - idx[None, :]
    dw = phases[:, None] - phases[None, :]
    return xi * np.abs(sep) + np.sign(sep) * dw


def build_hamiltonian(params: SystemParams, disorder: DisorderRealization | None = None) -> EffectiveHamiltonian:
    """Dense effective Hamiltonian ``H[mu, nu] = -i gamma exp(i k_s |r_mu - r_nu|)``.

    The diagonal is ``-i gamma``.  Its Hermitian part carries the coherent
    exchange ``gamma sin(k_s |r_mu - r_nu|)`` and its anti-Hermitian part the
    collective decay ``-i gamma cos(k_s (r_mu - r_nu))``.
    """
    if disorder is None:
        disorder = DisorderRealization.clean(params.n_atoms)
    if len(disorder) != params.n_atoms:
        raise ValueError(
            f"disorder has {len(disorder)} phases but n_atoms={params.n_atoms}"
        )
    theta = coupling_phases(params.n_atoms, params.xi, disorder.phases)
    matrix = -1j * params.gamma * np.exp(1j * theta)
    np.fill_diagonal(matrix, -1j * params.gamma)
    return EffectiveHamiltonian(matrix, params, disorder)


def decompose(h: EffectiveHamiltonian | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split ``H`` into Hermitian ``(H + H^dag)/2`` and anti-Hermitian ``(H - H^dag)/2`` parts."""
    m = h.matrix if isinstance(h, EffectiveHamiltonian) else np.asarray(h)
    mh = m.conj().T
    return (m + mh) / 2, (m - mh) / 2
