"""Gaussian-mixture quasiclassical propagation for Markovian open systems,
with exact quantum (grid Lindblad) and classical (Langevin) references and
the distance/gap metrics that compare them."""

from .errors import (
    ConfigError,
    DerivativeOrderError,
    DimensionError,
    GridError,
    InvalidCovarianceError,
    LindgaussError,
    MomentOrderError,
    NonPsdDiffusionError,
    NtsConstraintError,
    SolverError,
)
from .grids import GridState, PhaseSpaceField, PhaseSpaceGrid
from .harmonic import (
    CovarianceSplit,
    LocalHarmonicData,
    covariance_rhs,
    default_lambda_star,
    nts_decompose,
    taylor_local,
)
from .metrics import ComparisonReport, l1_distance, trace_distance
from .mixture import (
    ParticleEnsemble,
    ensemble_from_states,
    ensemble_sampled,
    ensemble_single,
    evolve,
    mixture_density_matrix,
    mixture_expectation,
    mixture_wigner,
    step,
)
from .model import DynamicsModel, canonical_unit_transform
from .moyal import (
    GridSymbol,
    classical_generator_on_wigner,
    moyal_star_integral,
    moyal_star_series,
    quantum_generator_on_wigner,
)
from .reference import (
    ClassicalEnsemble,
    QuantizedModel,
    classical_ensemble_gaussian,
    classical_expectation,
    classical_histogram,
    langevin_evolve,
    langevin_step,
    lindblad_evolve,
    lindblad_step,
    weyl_quantize,
    wigner_transform,
)
from .symplectic import (
    GaussianState,
    gaussian_convolve,
    gaussian_density,
    gaussian_quadratic_moments,
    hamiltonian_skew_split,
    symplectic_form,
    williamson_eigenvalues,
)

__version__ = "0.1.0"
