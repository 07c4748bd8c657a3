"""Homogeneous chaoses: tensors, constrained maximization, norms and moment/tail tools."""

from chaoscon.chaos.ascent import AscentResult, sup_over_balls, sup_over_balls_batch
from chaoscon.chaos.constraints import BallConstraint, BallSolution, TailFunctionN, solve_ball_argmax
from chaoscon.chaos.moments import (
    MomentEstimate,
    brute_force_enumerate,
    chaos_samples,
    decoupled_undecoupled_compare,
    empirical_moment,
    empirical_moments,
    exact_chaos_moments,
    exp_integrability,
    tail_certificate,
)
from chaoscon.chaos.norms import (
    NormEstimate,
    all_subsets,
    moment_bound_euclidean,
    moment_bound_logconcave,
    norm_T_I,
    norm_T_N_I_p,
    norm_T_N_I_p_grid,
    phi_curve,
    phi_of_t,
)
from chaoscon.chaos.tensors import (
    ChaosSpec,
    CoefficientTensor,
    contract_axes,
    evaluate_chaos,
    read_tensor_binary,
    read_tensor_text,
    sample_chaos_inputs,
    write_tensor_binary,
    write_tensor_text,
)

__all__ = [
    "AscentResult", "BallConstraint", "BallSolution", "ChaosSpec", "CoefficientTensor", "MomentEstimate",
    "NormEstimate", "TailFunctionN", "all_subsets", "brute_force_enumerate", "chaos_samples", "contract_axes",
    "decoupled_undecoupled_compare", "empirical_moment", "empirical_moments", "evaluate_chaos",
    "exact_chaos_moments", "exp_integrability", "moment_bound_euclidean", "moment_bound_logconcave",
    "norm_T_I", "norm_T_N_I_p", "norm_T_N_I_p_grid", "phi_curve", "phi_of_t", "read_tensor_binary",
    "read_tensor_text", "sample_chaos_inputs", "solve_ball_argmax", "sup_over_balls", "sup_over_balls_batch",
    "tail_certificate", "write_tensor_binary", "write_tensor_text",
]
