#include "rfolio/bsde.hpp"

#include <cmath>
#include <sstream>

namespace rfolio {

namespace detail {

RewardOnGrid evaluate_reward(const PathGrid& paths, const RewardSpec& spec, const MarketParams& params) {
    RewardOnGrid r;
    const Eigen::Index M = paths.paths;
    const int N = paths.steps;

    // Built-in families are increasing/concave with Inada endpoints by
    // construction; user-supplied utilities get the numerical spot check.
    if (params.alpha_bar() > 0.0 && spec.Ubar.kind() == Utility::Kind::Custom) spec.Ubar.check_shape();
    if (params.alpha() > 0.0 && spec.U.kind() == Utility::Kind::Custom) spec.U.check_shape();

    VectorXd xi = spec.terminal.evaluate(paths);
    r.terminal = VectorXd(M);
    for (Eigen::Index m = 0; m < M; ++m) {
        double u = params.alpha_bar() == 0.0 ? 0.0 : params.alpha_bar() * spec.Ubar.value(xi(m));
        if (!std::isfinite(u)) {
            throw std::invalid_argument("entropic BSDE: terminal utility not finite (xi=" + std::to_string(xi(m)) +
                                        " at path " + std::to_string(m) + ")");
        }
        r.terminal(m) = u;
    }

    if (params.alpha() > 0.0 && !spec.consumption.is_zero()) {
        MatrixXd c = spec.consumption.evaluate(paths);
        r.running = MatrixXd(M, N);
        for (Eigen::Index m = 0; m < M; ++m) {
            for (int n = 0; n < N; ++n) {
                double u = params.alpha() * spec.U.value(c(m, n));
                if (!std::isfinite(u)) {
                    throw std::invalid_argument("entropic BSDE: running utility not finite (c=" +
                                                std::to_string(c(m, n)) + " at path " + std::to_string(m) +
                                                ", step " + std::to_string(n) + ")");
                }
                r.running(m, n) = u;
            }
        }
    } else if (params.alpha() > 0.0 && spec.consumption.is_zero()) {
        throw std::invalid_argument("entropic BSDE: alpha > 0 requires a consumption process");
    }
    return r;
}

} // namespace detail

namespace {

} // namespace

BsdeSolution solve_entropic_bsde(const PathGrid& paths, const RewardSpec& spec, const MarketParams& params,
                                 const BsdeConfig& config) {
    const Eigen::Index M = paths.paths;
    const int N = paths.steps;
    const int d = params.dim();
    const double beta = params.beta();
    const double dt = paths.dt;

    detail::RewardOnGrid reward = detail::evaluate_reward(paths, spec, params);
    const bool has_running = reward.running.size() > 0;

    std::vector<double> delta_at(N);
    bool delta_zero = true;
    for (int n = 0; n < N; ++n) {
        delta_at[n] = params.delta_at(paths.time_at(n));
        delta_zero = delta_zero && delta_at[n] == 0.0;
    }

    // Regression designs are rebuilt per slice on demand; holding one QR per
    // step for large M would dominate memory.
    auto make_reg = [&](int n) {
        return PolynomialRegression(paths.S[n].array().log().matrix(), config.basis_degree, config.ridge);
    };

    BsdeSolution sol;
    sol.basis_degree = config.basis_degree;
    sol.Y = MatrixXd::Zero(M, N + 1);
    sol.Y.col(N) = reward.terminal;

    const int max_iters = delta_zero ? 1 : config.max_iters;
    std::vector<double> residual_history;
    bool converged = delta_zero;

    for (int iter = 0; iter < max_iters; ++iter) {
        MatrixXd Ynew(M, N + 1);
        Ynew.col(N) = reward.terminal;

        // Exponent of the recursive relation, accumulated backward:
        // E_n = (1/β) Σ_{s=n}^{N-1} (δ_s Y_s - αU(c_s)) Δ - (1/β) ᾱ Ū(ξ).
        VectorXd exponent = -reward.terminal / beta;
        for (int n = N - 1; n >= 0; --n) {
            VectorXd slice = VectorXd::Zero(M);
            if (delta_at[n] != 0.0) slice += delta_at[n] * sol.Y.col(n);
            if (has_running) slice -= reward.running.col(n);
            exponent += (dt / beta) * slice;

            if (n == 0) {
                ShiftedExpMean sm = shifted_exp_mean(exponent);
                double y0 = -beta * (sm.shift + std::log(sm.mean));
                Ynew.col(0).setConstant(y0);
                sol.root_weights = (exponent.array() - sm.shift).exp().matrix();
                sol.root_shift = sm.shift;
            } else {
                Ynew.col(n) = -beta * fit_log_conditional_exp(make_reg(n), exponent, sol.clamp_count);
            }
        }

        double change = (Ynew - sol.Y).cwiseAbs().maxCoeff();
        sol.Y = Ynew;
        sol.picard_iters = iter + 1;
        if (!delta_zero) {
            residual_history.push_back(change);
            sol.residual = change;
            if (change < config.tol_picard && iter > 0) {
                converged = true;
                break;
            }
        }
    }

    if (!converged) {
        std::ostringstream os;
        os << "entropic BSDE: Picard iteration did not converge after " << max_iters
           << " iterations; residual history:";
        for (double r : residual_history) os << " " << r;
        throw SolverError(os.str());
    }

    // Z per step from the martingale-increment regression
    // Z_n ≈ E[(Y_{n+1} - Y_n) ΔW_n | F_n] / Δ.
    sol.Z.assign(N, MatrixXd(M, d));
    for (int n = 0; n < N; ++n) {
        VectorXd dY = sol.Y.col(n + 1) - sol.Y.col(n);
        if (n == 0) {
            for (int j = 0; j < d; ++j) {
                VectorXd target = dY.cwiseProduct(paths.dW[n].col(j)) / dt;
                sol.Z[n].col(j).setConstant(pairwise_mean(target));
            }
        } else {
            PolynomialRegression reg = make_reg(n);
            for (int j = 0; j < d; ++j) {
                VectorXd target = dY.cwiseProduct(paths.dW[n].col(j)) / dt;
                sol.Z[n].col(j) = reg.fit(target);
            }
        }
    }

    sol.y0 = sol.Y(0, 0);
    SampleStats ws = sample_stats(sol.root_weights);
    sol.y0_se = ws.mean > 0.0 ? beta * ws.se / ws.mean : 0.0;
    return sol;
}

Y0Estimate evaluate_Y0_direct(const PathGrid& paths, const RewardSpec& spec, const MarketParams& params) {
    for (double dv : params.delta().values()) {
        if (dv != 0.0) throw std::invalid_argument("evaluate_Y0_direct: requires delta == 0");
    }
    detail::RewardOnGrid reward = detail::evaluate_reward(paths, spec, params);
    const double beta = params.beta();
    VectorXd exponent = -reward.terminal / beta;
    if (reward.running.size() > 0) {
        exponent -= (paths.dt / beta) * reward.running.rowwise().sum();
    }
    ShiftedExpMean sm = shifted_exp_mean(exponent);
    VectorXd w = (exponent.array() - sm.shift).exp().matrix();
    SampleStats st = sample_stats(w);
    Y0Estimate est;
    est.value = -beta * (sm.shift + std::log(sm.mean));
    est.se = beta * st.se / st.mean;
    return est;
}

MatrixXd worst_case_density(const BsdeSolution& solution, const MarketParams& params, const PathGrid& paths) {
    if (solution.Z.empty()) throw std::invalid_argument("worst_case_density: solution carries no Z process");
    const Eigen::Index M = paths.paths;
    const int N = paths.steps;
    const double beta = params.beta();
    MatrixXd logZ = MatrixXd::Zero(M, N + 1);
    for (int n = 0; n < N; ++n) {
        VectorXd inc = (solution.Z[n].array() * paths.dW[n].array()).rowwise().sum();
        VectorXd quad = solution.Z[n].rowwise().squaredNorm() * paths.dt;
        logZ.col(n + 1) = logZ.col(n) - inc / beta - quad / (2.0 * beta * beta);
    }
    return logZ.array().exp().matrix();
}

MomentEstimate moment_check_Zstar(const MatrixXd& Zstar, double p) {
    if (p < 1.0) throw std::invalid_argument("moment_check_Zstar: p must be >= 1");
    MomentEstimate est;
    est.p = p;
    VectorXd v = Zstar.col(Zstar.cols() - 1).array().pow(p).matrix();
    SampleStats st = sample_stats(v);
    est.moment = st.mean;
    est.se = st.se;
    return est;
}

} // namespace rfolio
