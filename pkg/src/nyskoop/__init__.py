"""Sketched kernel estimators of the Koopman operator.

The package fits kernel ridge regression (KRR), principal component
regression (PCR, the kernel-DMD family) and reduced rank regression (RRR)
operators on trajectory data, either exactly or through a Nystrom sketch
over m inducing points, and post-processes any fit into eigenvalues,
eigenfunctions, Koopman modes and forecasts.
"""

from .data import (
    LaggedPairs,
    NystromCenters,
    TrajectoryDataset,
    all_centers,
    build_pairs,
    build_pairs_multi,
    centers_from_indices,
    load_trajectory,
    load_trajectory_bin,
    load_trajectory_csv,
    philox_generator,
    sample_centers,
    save_trajectory_bin,
    save_trajectory_csv,
)
from .dynamics import AR1, BURN_IN, LinearGaussian, Lorenz63, ar1_truth, simulate
from .errors import (
    DataError,
    InputError,
    KoopmanError,
    NumericError,
    RankDeficiencyError,
)
from .estimators import (
    DEFAULT_N_MAX_EXACT,
    EXACT_KRR,
    EXACT_PCR,
    EXACT_RRR,
    KINDS,
    NYS_KRR,
    NYS_PCR,
    NYS_RRR,
    FittedEstimator,
    effective_rank,
    empirical_risk,
    fit_exact_krr,
    fit_exact_pcr,
    fit_exact_rrr,
    fit_nys_krr,
    fit_nys_pcr,
    fit_nys_rrr,
    hs_norm_sq,
)
from .kernels import KernelSpec, eval_kernel, gram, gram_diag
from .metrics import (
    BenchmarkRecord,
    eigenfunction_residual,
    eigenvalue_error,
    nrmse,
    read_records,
    time_fit,
    write_records,
)
from .serialize import load_model, save_model
from .spectral import (
    ModeSet,
    SpectralDecomposition,
    biorthogonality,
    decompose,
    eval_eigenfunctions,
    forecast,
    identity_observable,
    implied_timescale,
    kmd_forecast,
    modes,
    psi_norms,
    rollout_forecast,
    save_spectrum_json,
    spectrum_records,
)

__version__ = "0.1.0"
