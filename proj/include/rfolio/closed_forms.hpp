#pragma once

#include "rfolio/market_model.hpp"

namespace rfolio {

/// Closed forms of the two-asset incomplete-market benchmark (log terminal
/// utility, no consumption, no discounting, trading restricted to the first
/// asset), evaluated pathwise on a simulated grid.
///
/// theta_beta follows the published share formula including its horizon
/// factor exp(-beta (b1)^2 T / (2 (1+beta)^2 sigma1^2)); X_star is normalized
/// so that X_0 = x exactly (x times the stochastic exponential driving the
/// optimal wealth). theta_inf is the beta -> infinity limit.
struct Example1ClosedForm {
    MatrixXd X_star;     ///< M x (N+1)
    MatrixXd theta_beta; ///< M x (N+1), shares of the first asset
    MatrixXd theta_inf;  ///< M x (N+1)
    MatrixXd Ztilde;     ///< risk-neutral density E(-theta^1 W^1), M x (N+1)
};

/// Pre: d = 2, delta == 0, alpha == 0, diagonal sigma. Throws otherwise.
Example1ClosedForm example1_closed_form(const PathGrid& paths, const MarketParams& params, double x);

struct MertonLogReference {
    double proportion = 0.0; ///< b / sigma^2
    double value = 0.0;      ///< E[log(x / Ztilde_T)] by Gauss-Hermite quadrature
};

/// Classical complete-market log-utility reference for a single asset.
MertonLogReference merton_log_reference(double b, double sigma, double x, double T, int quad_nodes = 64);

} // namespace rfolio
