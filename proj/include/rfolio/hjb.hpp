#pragma once

#include "rfolio/numerics.hpp"

namespace rfolio {

/// Log-spaced dual-state grid and uniform time grid for the rectangular-
/// constraint dual HJB problem.
struct HjbGrid {
    VectorXd z;  ///< strictly increasing, z(0) > 0
    int nt = 0;
    double T = 0.0;

    static HjbGrid log_spaced(double z_min, double z_max, int nz, int nt, double T);
};

/// Scalar market and the rectangular constraint K = [a_lo, a_hi]
/// (a_lo <= 0 <= a_hi, infinities allowed). beta is the entropy weight; the
/// box bounds enter only through the support penalty a_hi a^- - a_lo a^+.
struct HjbProblem {
    double b = 0.0;
    double sigma = 1.0;
    double beta = 1.0;
    double a_lo = 0.0;
    double a_hi = 0.0;
};

struct HjbOptions {
    int control_points = 41;      ///< uniform candidates over the truncated control range
    bool explicit_scheme = false; ///< explicit monotone fallback (CFL-checked)
    double convexity_tol = 1e-7;
};

struct DualValueSurface {
    VectorXd z;
    VectorXd t;       ///< size nt+1, t(0) = 0 .. t(nt) = T
    MatrixXd v;       ///< (nt+1) x nz, v.row(nt) equals the terminal transform exactly
    MatrixXd a_star;  ///< maximizing control per node
    int non_convex_slices = 0;      ///< slices failing the convexity check
    double worst_non_convexity = 0.0;
};

/// Fenchel-Legendre transform of U^rm(z) = -z^{-1/beta} (log terminal
/// utility): sup_{z>0}(U^rm(z) - z y) = -((1+beta)/beta) (beta y)^{1/(1+beta)}.
double fenchel_legendre_log(double beta, double y);

/// Terminal condition on a grid of y values; errors on nonpositive entries.
VectorXd fenchel_legendre_transform(double beta, const VectorXd& y_grid);

/// Grid-search lower bound of the transform over a log-spaced z grid; oracle
/// for the closed form.
double fenchel_legendre_gridsearch(double beta, double y, int n_grid = 20001, double z_lo = 1e-8,
                                   double z_hi = 1e8);

/// Backward finite-difference solve of
///   -v_t + sup_a [ -1/2 z^2 ((b+a)/sigma)^2 v_zz - z (a_hi a^- - a_lo a^+) ] = 0
/// with the Fenchel-Legendre terminal condition. Implicit in the diffusion
/// with the control frozen from the previous slice; one-sided curvature at the
/// grid ends (v_zz -> 0). Infinite box bounds restrict the control to the
/// finite-penalty side; both infinite forces a = 0.
DualValueSurface solve_hjb(const HjbGrid& grid, const HjbProblem& prob, const HjbOptions& opts = {});

/// Exact value of the a = 0 restricted problem by Gauss-Hermite quadrature:
/// v(t, z) = E[ Ufl(z exp(-theta G sqrt(T-t) - theta^2 (T-t)/2)) ], theta = b/sigma.
double hjb_zero_kernel_oracle(const HjbProblem& prob, double t, double z, double T, int quad_nodes = 64);

struct RefinementLevel {
    int nz = 0;
    int nt = 0;
};

struct ConvergenceRow {
    RefinementLevel coarse, fine;
    double sup_diff = 0.0; ///< sup-norm of the t=0 slice difference on the coarse interior nodes
    double order = 0.0;    ///< estimated order vs the previous row (0 for the first row)
};

/// Self-convergence table across >= 3 refinement levels (sup-norm differences
/// of successive t=0 slices, finer solution interpolated log-linearly).
std::vector<ConvergenceRow> hjb_convergence_study(const std::vector<RefinementLevel>& levels, double z_min,
                                                  double z_max, double T, const HjbProblem& prob,
                                                  const HjbOptions& opts = {});

} // namespace rfolio
