"""Disorder-driven localization of a single excitation in an atom-waveguide chain."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    DisorderRealization,
    EffectiveHamiltonian,
    SystemParams,
    build_hamiltonian,
    decompose,
    sample_disorder,
)
from .dynamics import (  # noqa: E402
    AmplitudeState,
    LocalizationFit,
    Trajectory,
    fit_localization_length,
    initial_state,
    propagate,
    propagate_rk,
    site_state,
    total_population,
)
from .entanglement import (  # noqa: E402
    EntropyTrace,
    ReducedDensityMatrix,
    entropy_trace,
    fit_power_law,
    reduced_density_left,
    reduced_density_right,
    von_neumann_entropy,
)
from .spectrum import (  # noqa: E402
    R_GOE,
    R_POISSON,
    ComplexSpectrum,
    GapStatistics,
    eigenvalues,
    filter_valid_pairs,
    gap_ratios,
    gap_statistics,
    mean_gap_ratio,
)
from .ensemble import (  # noqa: E402
    EnsembleResult,
    EnsembleSpec,
    central_cut,
    realization_seed,
    run_ensemble,
    sweep,
)
