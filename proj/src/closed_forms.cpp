#include "rfolio/closed_forms.hpp"

#include <cmath>

namespace rfolio {

Example1ClosedForm example1_closed_form(const PathGrid& paths, const MarketParams& params, double x) {
    if (params.dim() != 2) throw std::invalid_argument("example1_closed_form: needs a 2-asset market");
    if (params.alpha() != 0.0) throw std::invalid_argument("example1_closed_form: needs alpha == 0");
    for (double dv : params.delta().values()) {
        if (dv != 0.0) throw std::invalid_argument("example1_closed_form: needs delta == 0");
    }
    if (params.drift().segments() != 1) throw std::invalid_argument("example1_closed_form: needs constant drift");
    if (std::abs(params.sigma()(0, 1)) > 1e-14 || std::abs(params.sigma()(1, 0)) > 1e-14) {
        throw std::invalid_argument("example1_closed_form: needs diagonal sigma");
    }
    const double b1 = params.drift_at(0.0)(0);
    const double s1 = params.sigma()(0, 0);
    const double beta = params.beta();
    const double T = params.horizon();
    const double theta1 = b1 / s1;
    const double q = (beta / (1.0 + beta)) * theta1;
    const double horizon_factor = std::exp(-(beta / ((1.0 + beta) * (1.0 + beta))) * b1 * b1 / (2.0 * s1 * s1) * T);

    const Eigen::Index M = paths.paths;
    const int N = paths.steps;
    Example1ClosedForm cf;
    cf.X_star = MatrixXd(M, N + 1);
    cf.theta_beta = MatrixXd(M, N + 1);
    cf.theta_inf = MatrixXd(M, N + 1);
    cf.Ztilde = MatrixXd(M, N + 1);

    VectorXd W1 = VectorXd::Zero(M);
    for (int n = 0; n <= N; ++n) {
        if (n > 0) W1 += paths.dW[n - 1].col(0);
        const double t = paths.time_at(n);
        VectorXd Wtilde = W1.array() + theta1 * t;
        VectorXd Zbeta = (q * Wtilde.array() - 0.5 * q * q * t).exp();
        cf.Ztilde.col(n) = (-theta1 * W1.array() - 0.5 * theta1 * theta1 * t).exp();
        cf.X_star.col(n) = x * Zbeta;
        cf.theta_beta.col(n) = (x * horizon_factor * (beta / (1.0 + beta)) * (b1 / (s1 * s1))) *
                               Zbeta.cwiseQuotient(paths.S[n].col(0));
        cf.theta_inf.col(n) =
            (x * b1 / (s1 * s1)) * cf.Ztilde.col(n).cwiseInverse().cwiseQuotient(paths.S[n].col(0));
    }
    return cf;
}

MertonLogReference merton_log_reference(double b, double sigma, double x, double T, int quad_nodes) {
    if (!(sigma > 0.0) || !(x > 0.0) || !(T > 0.0)) {
        throw std::invalid_argument("merton_log_reference: need sigma, x, T positive");
    }
    MertonLogReference ref;
    const double theta = b / sigma;
    ref.proportion = b / (sigma * sigma);
    // xi* = x / Ztilde_T with Ztilde_T = exp(-theta W_T - theta^2 T / 2).
    ref.value = normal_expectation(
        [&](double g) { return std::log(x) + theta * std::sqrt(T) * g + 0.5 * theta * theta * T; }, quad_nodes);
    return ref;
}

} // namespace rfolio
