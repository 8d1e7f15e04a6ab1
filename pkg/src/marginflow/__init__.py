"""Gradient descent on linearly separable data: max-margin solving with
KKT certification, trajectory recording, log-growth residual analysis,
and convergence-rate verdicts."""

from .data import Dataset, check_separability, fold_labels, generate, load_csv, save_csv
from .errors import (
    DegenerateCaseError,
    InfeasibleError,
    InputError,
    NonConvergenceError,
    NotApplicableError,
    OverflowError_,
    ParseError,
)
from .losses import LossSpec, TailParams, exp_loss, logistic_loss, loss_by_name, probit_loss
from .margin import (
    DegenerateChain,
    MaxMarginSolution,
    ResidualOffset,
    degenerate_chain,
    dual_positivity_check,
    kkt_certificate,
    nonsupport_theta,
    solve_hard_margin,
    solve_w_tilde,
)
from .multiclass import (
    KClassSVMSolution,
    MulticlassProblem,
    ce_gradient,
    ce_loss,
    make_three_class,
    multiclass_bias_check,
    pairwise_transform,
    run_multiclass,
    solve_kclass_svm,
)
from .optim import OptimConfig, Trajectory, checkpoint_times, full_gradient, run
from .rates import (
    RateReport,
    RateSeries,
    angle_gap,
    direction_gap,
    fit_bounded,
    margin_gap,
    rate_report,
    residual_series,
    scaled_loss,
    validation_loss_slope,
)

__version__ = "0.1.0"
