from .common import Batch, StepReport
from .dispatch import (
    ConjGrad,
    LevenbergMarquardt,
    Lbfgs,
    OptimizerKind,
    Sgd,
    batch_loss,
    batch_loss_grad,
    init_state,
    optimizer_step,
    regression_batch,
)
from .first_order import BetaRule, CgState, cg_direction, cg_step, compute_beta, sgd_step
from .lbfgs import LbfgsState, LineSearchResult, bfgs_update, lbfgs_direction, line_search
from .lm import GaussNewtonSystem, LmState, lm_step, lm_update, network_system

__all__ = [
    "Batch", "StepReport", "ConjGrad", "LevenbergMarquardt", "Lbfgs", "OptimizerKind", "Sgd",
    "batch_loss", "batch_loss_grad", "init_state", "optimizer_step", "regression_batch",
    "BetaRule", "CgState", "cg_direction", "cg_step", "compute_beta", "sgd_step",
    "LbfgsState", "LineSearchResult", "bfgs_update", "lbfgs_direction", "line_search",
    "GaussNewtonSystem", "LmState", "lm_step", "lm_update", "network_system",
]
