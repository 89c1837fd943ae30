"""Maximum likelihood for separable spatio-temporal SAR error models on lattices."""

from .errors import DegenerateLikelihoodError, EstimationError, InfeasibleError
from .inference import (
    FitOptions,
    FitResult,
    expected_information,
    fit_mle,
    info_blocks,
    maximize_profile,
    observed_information,
    standard_errors,
)
from .lattice import (
    NeighborOrders,
    SiteSet,
    WeightSet,
    build_lattice,
    build_neighbors,
    lattice_weights,
    read_weights,
    row_standardize,
    write_weights,
)
from .likelihood import (
    ProfileEval,
    beta_hat,
    full_loglik,
    log_det_Snm,
    profile_loglik,
    profile_score,
    sigma2_hat,
)
from .model import (
    PanelData,
    Params,
    StOperator,
    apply_S_blockwise,
    read_panel_csv,
    solve_S_blockwise,
    validate_params,
    write_panel_csv,
)
from .simulate import PAPER_TRUTH, SimConfig, gen_covariates, gen_dataset, gen_errors

__version__ = "0.1.0"
