#pragma once

#include "rfolio/regression.hpp"
#include "rfolio/reward.hpp"

namespace rfolio {

struct BsdeConfig {
    int basis_degree = 3;      ///< polynomial degree in the log-price state
    double tol_picard = 1e-6;  ///< sup-norm stop for the fixed-point iteration (delta > 0)
    int max_iters = 50;
    double ridge = 1e-8;       ///< relative ridge weight; 0 switches to rank-revealing QR
};

/// Solution of the entropic quadratic BSDE
///   dY = (δY - αU(c)) dt + |Z|²/(2β) dt + Z'dW,   Y_T = ᾱ Ū(ξ),
/// computed through the recursive log-exponential representation of Y with
/// regression-estimated conditional expectations.
struct BsdeSolution {
    MatrixXd Y;              ///< M x (N+1); Y_T matches ᾱ Ū(ξ) pathwise exactly
    std::vector<MatrixXd> Z; ///< N entries, each M x d
    int basis_degree = 0;
    int picard_iters = 0;
    double residual = 0.0;   ///< last Picard sup-norm change (0 for the single-pass case)
    double y0 = 0.0;
    double y0_se = 0.0;      ///< delta-method standard error of y0
    VectorXd root_weights;   ///< exp weights at t=0, max-shifted (for paired comparisons)
    double root_shift = 0.0;
    int clamp_count = 0;     ///< regression fits clamped away from nonpositive values
};

/// Backward solve of the entropic BSDE on the given path grid. With δ ≡ 0 a
/// single backward regression pass over the full-horizon exponential weight;
/// with δ > 0 a Picard iteration of the recursive relation. Z is extracted per
/// step by regressing the Y-increment against the Brownian increments.
BsdeSolution solve_entropic_bsde(const PathGrid& paths, const RewardSpec& spec, const MarketParams& params,
                                 const BsdeConfig& config = {});

struct Y0Estimate {
    double value = 0.0;
    double se = 0.0;
};

/// Direct Monte Carlo oracle for Y_0 when δ ≡ 0:
/// -β log of the plain sample mean of exp(-(α∫U(c) + ᾱŪ(ξ))/β), max-shifted.
Y0Estimate evaluate_Y0_direct(const PathGrid& paths, const RewardSpec& spec, const MarketParams& params);

/// Worst-case density Z* = E(-M^Y/β): the discrete stochastic exponential of
/// -(1/β) Σ Z'ΔW in log space. M x (N+1), strictly positive, Z*_0 = 1.
MatrixXd worst_case_density(const BsdeSolution& solution, const MarketParams& params, const PathGrid& paths);

struct MomentEstimate {
    double p = 1.0;
    double moment = 0.0;
    double se = 0.0;
};

/// Sample estimate of E[(Z*_T)^p], p >= 1. Diagnostic only.
MomentEstimate moment_check_Zstar(const MatrixXd& Zstar, double p);

namespace detail {

/// αU(c) on the grid (M x N zero matrix when consumption is absent or α = 0)
/// and ᾱŪ(ξ) per path; throws when a built-in utility is evaluated outside
/// its domain.
struct RewardOnGrid {
    MatrixXd running;  ///< α U(c_{m,n}), M x N (empty if no running reward)
    VectorXd terminal; ///< ᾱ Ū(ξ_m), M
};

RewardOnGrid evaluate_reward(const PathGrid& paths, const RewardSpec& spec, const MarketParams& params);

} // namespace detail

} // namespace rfolio
