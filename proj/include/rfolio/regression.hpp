#pragma once

#include <memory>

#include "rfolio/numerics.hpp"

namespace rfolio {

/// Least-squares projection on a polynomial basis of state variables, the
/// conditional-expectation estimator used by the backward solvers.
///
/// The basis holds all monomials of total degree <= degree in the state
/// columns. Columns are standardized and near-constant ones dropped before
/// solving; with ridge > 0 the normal problem is solved through a
/// row-augmented QR, with ridge == 0 through a rank-revealing QR.
class PolynomialRegression {
public:
    /// states: M x k matrix of state variables at one time slice.
    PolynomialRegression(const MatrixXd& states, int degree, double ridge);

    /// Fitted conditional expectation of y at the sample states (in-sample).
    VectorXd fit(const VectorXd& y) const;

    /// Weighted projection: minimizes sum_m w_m (y_m - fit_m)^2, w >= 0.
    VectorXd fit_weighted(const VectorXd& y, const VectorXd& w) const;

    Eigen::Index basis_size() const { return B_.cols(); }
    const MatrixXd& basis() const { return B_; }

private:
    MatrixXd B_;   // M x p standardized basis
    double ridge_; // relative ridge weight; lambda = ridge * trace(B'B) / M
    std::shared_ptr<Eigen::HouseholderQR<MatrixXd>> qr_plain_;        // ridge > 0 (row-augmented)
    std::shared_ptr<Eigen::ColPivHouseholderQR<MatrixXd>> qr_pivot_;  // ridge == 0
};

/// Basis of all monomials of total degree <= degree over the columns of
/// states, including the constant. Exposed for reuse in tandem regressions.
MatrixXd polynomial_basis(const MatrixXd& states, int degree);

/// log E[exp(e) | state] estimated in two stages: a fit mu of the exponent e
/// absorbs its dynamic range, a second fit catches the multiplicative
/// residual exp(e - mu). Exact whenever e lies in the basis span and far
/// better conditioned than regressing the raw exponential. clamp_count is
/// incremented for every fitted residual clamped away from nonpositive values.
VectorXd fit_log_conditional_exp(const PolynomialRegression& reg, const VectorXd& exponent, int& clamp_count);

} // namespace rfolio
