#include "rfolio/regression.hpp"

#include <cmath>
#include <vector>

namespace rfolio {

namespace {

void enumerate_monomials(int k, int degree, std::vector<int>& current, std::vector<std::vector<int>>& out,
                         int start, int remaining) {
    out.push_back(current);
    if (remaining == 0) return;
    for (int i = start; i < k; ++i) {
        ++current[i];
        enumerate_monomials(k, degree, current, out, i, remaining - 1);
        --current[i];
    }
}

} // namespace

MatrixXd polynomial_basis(const MatrixXd& states, int degree) {
    if (degree < 0) throw std::invalid_argument("polynomial_basis: degree must be >= 0");
    const Eigen::Index M = states.rows();
    const int k = static_cast<int>(states.cols());
    std::vector<std::vector<int>> exponents;
    std::vector<int> current(k, 0);
    enumerate_monomials(k, degree, current, exponents, 0, degree);

    MatrixXd B(M, static_cast<Eigen::Index>(exponents.size()));
    for (std::size_t c = 0; c < exponents.size(); ++c) {
        VectorXd col = VectorXd::Ones(M);
        for (int i = 0; i < k; ++i) {
            for (int e = 0; e < exponents[c][i]; ++e) col = col.cwiseProduct(states.col(i));
        }
        B.col(static_cast<Eigen::Index>(c)) = col;
    }
    return B;
}

PolynomialRegression::PolynomialRegression(const MatrixXd& states, int degree, double ridge) : ridge_(ridge) {
    if (ridge < 0.0) throw std::invalid_argument("PolynomialRegression: ridge must be >= 0");
    MatrixXd raw = polynomial_basis(states, degree);
    const Eigen::Index M = raw.rows();

    // Standardize all non-constant columns and drop the degenerate ones;
    // residual collinearity is left to the rank-revealing solve.
    std::vector<Eigen::Index> keep;
    keep.push_back(0);
    std::vector<std::pair<double, double>> scale; // (mean, sd)
    scale.emplace_back(0.0, 1.0);
    for (Eigen::Index c = 1; c < raw.cols(); ++c) {
        double mean = raw.col(c).mean();
        double sd = std::sqrt((raw.col(c).array() - mean).square().sum() / std::max<Eigen::Index>(M - 1, 1));
        if (sd > 1e-12 * (std::abs(mean) + 1.0)) {
            keep.push_back(c);
            scale.emplace_back(mean, sd);
        }
    }
    B_ = MatrixXd(M, static_cast<Eigen::Index>(keep.size()));
    B_.col(0).setOnes();
    for (std::size_t i = 1; i < keep.size(); ++i) {
        B_.col(static_cast<Eigen::Index>(i)) = (raw.col(keep[i]).array() - scale[i].first) / scale[i].second;
    }

    const Eigen::Index p = B_.cols();
    if (p > 1) {
        if (ridge_ > 0.0) {
            double lambda = ridge_ * (B_.squaredNorm() / static_cast<double>(M));
            MatrixXd Baug(M + p, p);
            Baug.topRows(M) = B_;
            Baug.bottomRows(p) = std::sqrt(lambda) * MatrixXd::Identity(p, p);
            qr_plain_ = std::make_shared<Eigen::HouseholderQR<MatrixXd>>(Baug);
        } else {
            qr_pivot_ = std::make_shared<Eigen::ColPivHouseholderQR<MatrixXd>>(B_);
            if (qr_pivot_->rank() == 0) {
                throw SolverError("PolynomialRegression: rank-deficient basis (all columns degenerate)");
            }
        }
    }
}

VectorXd PolynomialRegression::fit(const VectorXd& y) const {
    const Eigen::Index M = B_.rows();
    if (y.size() != M) throw std::invalid_argument("PolynomialRegression::fit: size mismatch");
    const Eigen::Index p = B_.cols();
    if (p == 1) return VectorXd::Constant(M, pairwise_mean(y));

    VectorXd coef;
    if (qr_plain_) {
        VectorXd yaug = VectorXd::Zero(M + p);
        yaug.head(M) = y;
        coef = qr_plain_->solve(yaug);
    } else {
        coef = qr_pivot_->solve(y);
    }
    if (!coef.allFinite()) {
        throw SolverError("PolynomialRegression: singular least-squares system on polynomial basis of size " +
                          std::to_string(p));
    }
    return B_ * coef;
}

VectorXd fit_log_conditional_exp(const PolynomialRegression& reg, const VectorXd& exponent, int& clamp_count) {
    VectorXd mu = reg.fit(exponent);
    VectorXd centered = exponent - mu;
    double shift = centered.maxCoeff();
    VectorXd residual = (centered.array() - shift).exp().matrix();
    VectorXd g = reg.fit(residual);
    const double floor_val = 1e-12;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        if (!(g(i) > floor_val)) {
            g(i) = floor_val;
            ++clamp_count;
        }
    }
    return mu.array() + shift + g.array().log();
}

VectorXd PolynomialRegression::fit_weighted(const VectorXd& y, const VectorXd& w) const {
    if (y.size() != B_.rows() || w.size() != B_.rows()) {
        throw std::invalid_argument("PolynomialRegression::fit_weighted: size mismatch");
    }
    if ((w.array() < 0.0).any()) throw std::invalid_argument("PolynomialRegression::fit_weighted: negative weight");
    const Eigen::Index p = B_.cols();
    if (p == 1) {
        double ws = pairwise_sum(w.data(), w.size());
        if (ws <= 0.0) throw SolverError("PolynomialRegression: zero total weight");
        VectorXd wy = w.cwiseProduct(y);
        return VectorXd::Constant(y.size(), pairwise_sum(wy.data(), wy.size()) / ws);
    }
    VectorXd sw = w.array().sqrt().matrix();
    MatrixXd Bw = B_.array().colwise() * sw.array();
    VectorXd yw = y.cwiseProduct(sw);

    VectorXd coef;
    if (ridge_ > 0.0) {
        double lambda = ridge_ * (Bw.squaredNorm() / static_cast<double>(Bw.rows()));
        MatrixXd Baug(Bw.rows() + p, p);
        Baug.topRows(Bw.rows()) = Bw;
        Baug.bottomRows(p) = std::sqrt(lambda) * MatrixXd::Identity(p, p);
        VectorXd yaug = VectorXd::Zero(Bw.rows() + p);
        yaug.head(Bw.rows()) = yw;
        coef = Baug.householderQr().solve(yaug);
    } else {
        coef = Bw.colPivHouseholderQr().solve(yw);
    }
    if (!coef.allFinite()) throw SolverError("PolynomialRegression: singular weighted least-squares system");
    return B_ * coef;
}

} // namespace rfolio
