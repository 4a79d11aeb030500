"""Dispersal density estimation across scales from parent/offspring point clouds."""
from .kernels import Kernel, bandlimited_kernel, get_kernel, paper_kernel, rect_kernel
from .model import DispersalModel, ModelParams, PointClouds, make_beta23_model, make_uniform_model
from .point_estimators import (
    Bandwidths,
    TheoryRangeWarning,
    bandwidth_rule,
    bias_oracle,
    f_hat_1,
    f_hat_2,
    f_hat_dec,
    f_hat_int,
    joint_statistic,
    normalized_statistic,
)
from .simulation import SeedSpec, draw_cox_primitives, sample_cox, sample_cox_batch, sample_iid_pairs, sample_one_to_one

__version__ = "0.1.0"
