#include "rfolio/dual.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rfolio {

KernelFamily::KernelFamily(std::vector<KernelProcess> kernels, const ConstraintSet& K, const PathGrid& paths,
                           const MarketParams& params)
    : kernels_(std::move(kernels)), paths_(&paths), params_(&params) {
    if (kernels_.empty()) throw std::invalid_argument("KernelFamily: empty kernel family");
    ZT_.reserve(kernels_.size());
    AT_.reserve(kernels_.size());
    for (const KernelProcess& nu : kernels_) {
        MatrixXd A = upper_variation(K, nu, paths); // throws on barrier-cone violation
        MatrixXd Z = girsanov_density(paths, params, nu);
        ZT_.push_back(Z.col(paths.steps));
        AT_.push_back(A.col(paths.steps));
    }
}

MatrixXd KernelFamily::full_density(int i) const {
    return girsanov_density(*paths_, *params_, kernels_.at(i));
}

std::vector<BudgetValue> budget_value_per_kernel(const MatrixXd& c, const VectorXd& xi, const KernelFamily& family,
                                                 const PathGrid& paths) {
    const Eigen::Index M = paths.paths;
    VectorXd outflow = VectorXd::Zero(M);
    if (xi.size() > 0) {
        require_dim(xi.size(), M, "budget_value xi");
        outflow = xi;
    }
    if (c.size() > 0) {
        if (c.rows() != M || c.cols() != paths.steps) throw std::invalid_argument("budget_value: c must be M x N");
        outflow += c.rowwise().sum() * paths.dt;
    }

    std::vector<BudgetValue> out(family.size());
    for (int i = 0; i < family.size(); ++i) {
        VectorXd sample = family.terminal_density(i).cwiseProduct(outflow - family.terminal_variation(i));
        SampleStats st = sample_stats(sample);
        out[i].value = st.mean;
        out[i].se = st.se;
        out[i].argmax_kernel = i;
    }
    return out;
}

BudgetValue budget_value(const MatrixXd& c, const VectorXd& xi, const KernelFamily& family, const PathGrid& paths) {
    std::vector<BudgetValue> all = budget_value_per_kernel(c, xi, family, paths);
    BudgetValue best = all.front();
    for (const BudgetValue& bv : all) {
        if (bv.value > best.value) best = bv;
    }
    return best;
}

OptimalControls optimal_controls(double lambda, const MatrixXd& Zstar, const MatrixXd& Ztilde,
                                 const VectorXd& Sdelta, const RewardSpec& spec, const MarketParams& params) {
    if (!(lambda > 0.0)) throw std::invalid_argument("optimal_controls: lambda must be positive");
    if (params.alpha() == 0.0 && params.alpha_bar() == 0.0) {
        throw std::invalid_argument("optimal_controls: both utility weights are zero");
    }
    const Eigen::Index M = Zstar.rows();
    const int N = static_cast<int>(Zstar.cols()) - 1;

    // Inverting the first-order conditions alpha Z* S^delta U'(c*) = lambda Ztilde
    // (and the terminal analogue) puts the discount factor under the marginal.
    OptimalControls out;
    if (params.alpha() > 0.0) {
        out.c = MatrixXd(M, N);
        for (int n = 0; n < N; ++n) {
            double scale = lambda / (params.alpha() * Sdelta(n));
            for (Eigen::Index m = 0; m < M; ++m) {
                out.c(m, n) = spec.U.inv_deriv(scale * Ztilde(m, n) / Zstar(m, n));
            }
        }
    }
    if (params.alpha_bar() > 0.0) {
        out.xi = VectorXd(M);
        double scale = lambda / (params.alpha_bar() * Sdelta(N));
        for (Eigen::Index m = 0; m < M; ++m) {
            out.xi(m) = spec.Ubar.inv_deriv(scale * Ztilde(m, N) / Zstar(m, N));
        }
    }
    return out;
}

DualState calibrate_lambda(double x, const MatrixXd& Zstar, const MatrixXd& Ztilde, int kernel_index,
                           const VectorXd& Sdelta, const RewardSpec& spec, const MarketParams& params,
                           const KernelFamily& family, const PathGrid& paths, double tol_budget) {
    DualState st;
    st.kernel_index = kernel_index;

    auto budget_at = [&](double lambda) {
        OptimalControls ctr = optimal_controls(lambda, Zstar, Ztilde, Sdelta, spec, params);
        return budget_value(ctr.c, ctr.xi, family, paths).value;
    };

    if (x < 1e-10) {
        // Degenerate budget: push the shadow price to the boundary, controls
        // collapse toward zero by Inada.
        st.lambda = 1e16;
        st.budget_gap = std::abs(budget_at(st.lambda) - x) / std::max(x, 1.0);
        return st;
    }

    // The budget map is strictly decreasing in λ (inverse marginals are), so
    // bracket by geometric expansion and bisect on log λ.
    double lo = 1.0 / x, hi = 1.0 / x;
    double b_lo = budget_at(lo);
    int guard = 0;
    while (b_lo < x) {
        lo /= 4.0;
        b_lo = budget_at(lo);
        if (++guard > 80) throw SolverError("calibrate_lambda: failed to bracket from below; budget(" +
                                            std::to_string(lo) + ")=" + std::to_string(b_lo));
    }
    double b_hi = budget_at(hi);
    guard = 0;
    while (b_hi > x) {
        hi *= 4.0;
        b_hi = budget_at(hi);
        if (++guard > 80) throw SolverError("calibrate_lambda: failed to bracket from above; budget(" +
                                            std::to_string(hi) + ")=" + std::to_string(b_hi));
    }

    double lambda = std::sqrt(lo * hi);
    for (int it = 0; it < 200; ++it) {
        lambda = std::sqrt(lo * hi);
        double b = budget_at(lambda);
        if (std::abs(b - x) / std::max(std::abs(x), 1e-12) <= tol_budget) break;
        if (b > x) {
            lo = lambda;
        } else {
            hi = lambda;
        }
    }
    st.lambda = lambda;
    double b = budget_at(lambda);
    st.budget_gap = std::abs(b - x) / std::max(std::abs(x), 1e-12);
    return st;
}

ReplicationResult replicating_portfolio(const VectorXd& xi, const MatrixXd& c, const MatrixXd& Ztilde,
                                        const KernelProcess& nu, const PathGrid& paths, const MarketParams& params,
                                        const ConstraintSet& K, const BsdeConfig& config,
                                        const MatrixXd* exact_martingale) {
    (void)params; // market coefficients enter only through the simulated paths
    const Eigen::Index M = paths.paths;
    const int N = paths.steps;
    const int d = paths.dim();
    const bool has_c = c.size() > 0;

    VectorXd payoff = xi.size() > 0 ? xi : VectorXd::Zero(M);
    if (has_c) payoff += c.rowwise().sum() * paths.dt;

    // Total-outflow martingale M_n = E_{P~}[ξ + Σ_all c Δ | F_n]; its
    // increments carry the hedge, the wealth reported below strips the
    // already-consumed part.
    MatrixXd mart(M, N + 1);
    if (exact_martingale) {
        if (exact_martingale->rows() != M || exact_martingale->cols() != N + 1) {
            throw std::invalid_argument("replicating_portfolio: exact martingale must be M x (N+1)");
        }
        mart = *exact_martingale;
    } else {
        mart.col(N) = payoff;
        // M_n = E_P[Z̃_T (ξ + Σ c Δ) | F_n] / Z̃_n. Strictly positive payoffs
        // are fitted in log space (two-stage), the general case falls back to
        // the plain projection.
        VectorXd target = Ztilde.col(N).cwiseProduct(payoff);
        const bool log_fit = (payoff.array() > 0.0).all();
        VectorXd log_target;
        if (log_fit) log_target = target.array().log();
        int clamped = 0;
        for (int n = N - 1; n >= 1; --n) {
            PolynomialRegression reg(paths.S[n].array().log().matrix(), config.basis_degree, config.ridge);
            if (log_fit) {
                VectorXd logV = fit_log_conditional_exp(reg, log_target, clamped);
                mart.col(n) = (logV - Ztilde.col(n).array().log().matrix()).array().exp();
            } else {
                mart.col(n) = reg.fit(target).cwiseQuotient(Ztilde.col(n));
            }
        }
        mart.col(0).setConstant(pairwise_mean(target));
    }

    ReplicationResult res;
    res.X = mart;
    if (has_c) {
        VectorXd consumed = VectorXd::Zero(M);
        for (int n = 1; n <= N; ++n) {
            consumed += c.col(n - 1) * paths.dt;
            res.X.col(n) = mart.col(n) - consumed;
        }
    }

    // First pass: per-step hedge coefficients in the raw monomial basis.
    std::vector<VectorXd> gammas(N);
    Eigen::Index p = 0;
    for (int n = 0; n < N; ++n) {
        VectorXd dM = mart.col(n + 1) - mart.col(n);
        // ν-compensated relative returns: σ ΔW̃ ≈ ΔS/S + ν Δ under P̃.
        MatrixXd R = (paths.S[n + 1] - paths.S[n]).array() / paths.S[n].array();
        if (!nu.is_zero()) {
            if (nu.is_deterministic()) {
                R.rowwise() += (nu.at(paths.time_at(n)) * paths.dt).transpose();
            } else {
                for (Eigen::Index m = 0; m < M; ++m) {
                    R.row(m) += (nu.at(paths.time_at(n), paths.S[n].row(m).transpose()) * paths.dt).transpose();
                }
            }
        }

        // Design [basis | basis ⊗ R]: the plain block absorbs the O(Δ) drift
        // residue, the tensor block carries the state-dependent holdings.
        MatrixXd basis = polynomial_basis(paths.S[n].array().log().matrix(), config.basis_degree);
        p = basis.cols();
        MatrixXd design(M, p + p * d);
        design.leftCols(p) = basis;
        for (int j = 0; j < d; ++j) {
            design.middleCols(p + j * p, p) = basis.array().colwise() * R.col(j).array();
        }

        // Per-step likelihood ratio moves the projection under P̃.
        VectorXd w = Ztilde.col(n + 1).cwiseQuotient(Ztilde.col(n));
        VectorXd sw = w.array().sqrt().matrix();
        MatrixXd Dw = design.array().colwise() * sw.array();
        VectorXd yw = dM.cwiseProduct(sw);
        double lambda = config.ridge * (Dw.squaredNorm() / static_cast<double>(M));
        MatrixXd Daug(M + design.cols(), design.cols());
        Daug.topRows(M) = Dw;
        Daug.bottomRows(design.cols()) = std::sqrt(lambda) * MatrixXd::Identity(design.cols(), design.cols());
        VectorXd yaug = VectorXd::Zero(M + design.cols());
        yaug.head(M) = yw;
        gammas[n] = Daug.householderQr().solve(yaug);
        if (!gammas[n].allFinite()) {
            throw SolverError("replicating_portfolio: singular hedge regression at step " + std::to_string(n));
        }
    }

    // The fitted-wealth noise telescopes out of windowed increments, so a
    // short moving average of the coefficient vectors removes the step-level
    // estimation noise (largest at t = 0, where X_0 is an exact mean) while
    // the holdings themselves vary only smoothly in time.
    std::vector<VectorXd> smoothed(N);
    for (int n = 0; n < N; ++n) {
        int lo = std::max(0, n - 2), hi = std::min(N - 1, n + 2);
        VectorXd acc = VectorXd::Zero(gammas[0].size());
        for (int j = lo; j <= hi; ++j) acc += gammas[j];
        smoothed[n] = acc / static_cast<double>(hi - lo + 1);
    }

    res.H.assign(N, MatrixXd::Zero(M, d));
    double viol_sq = 0.0;
    for (int n = 0; n < N; ++n) {
        MatrixXd basis = polynomial_basis(paths.S[n].array().log().matrix(), config.basis_degree);
        for (int j = 0; j < d; ++j) {
            res.H[n].col(j) = basis * smoothed[n].segment(p + j * p, p);
        }
        for (Eigen::Index m = 0; m < M; ++m) {
            VectorXd h = res.H[n].row(m).transpose();
            VectorXd hp = project(K, h);
            viol_sq += (h - hp).squaredNorm();
            res.H[n].row(m) = hp.transpose();
        }
    }
    res.pre_projection_violation = std::sqrt(viol_sq / (static_cast<double>(M) * N));
    return res;
}

RobustSolution solve_robust_problem(double x, const PathGrid& paths, const MarketParams& params,
                                    const ConstraintSet& K, const RewardSpec& spec,
                                    const std::vector<KernelProcess>& kernel_family, const DualConfig& dual_config,
                                    const BsdeConfig& bsde_config) {
    if (x < 0.0) throw std::invalid_argument("solve_robust_problem: initial wealth must be >= 0");
    const Eigen::Index M = paths.paths;
    const int N = paths.steps;
    const bool with_consumption = params.alpha() > 0.0;
    const bool with_terminal = params.alpha_bar() > 0.0;
    if (!with_consumption && !with_terminal) {
        throw std::invalid_argument("solve_robust_problem: both utility weights are zero");
    }

    KernelFamily family(kernel_family, K, paths, params);
    VectorXd Sdelta = discount_factor(params, paths);

    // Slater-style start: split the budget between consumption and terminal
    // wealth, with a positive floor so Log utilities stay evaluable.
    const double x_eff = std::max(x, 1e-8);
    MatrixXd c;
    VectorXd xi;
    if (with_consumption && with_terminal) {
        c = MatrixXd::Constant(M, N, x_eff / (2.0 * params.horizon()));
        xi = VectorXd::Constant(M, x_eff / 2.0);
    } else if (with_terminal) {
        xi = VectorXd::Constant(M, x_eff);
    } else {
        c = MatrixXd::Constant(M, N, x_eff / params.horizon());
    }

    RobustSolution sol;
    // A degenerate budget (x at the v(0,0) boundary) collapses the controls
    // toward zero; damping only stretches that collapse, so skip it there.
    const double rho = x < 1e-10 ? 1.0 : dual_config.damping;
    double y0_prev = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    OptimalControls last_controls;

    int incumbent = -1;
    for (int iter = 0; iter < dual_config.max_outer; ++iter) {
        RewardSpec iter_spec = spec;
        if (with_consumption) iter_spec.consumption = ConsumptionSpec::per_path(c);
        if (with_terminal) iter_spec.terminal = TerminalSpec::per_path(xi);

        BsdeSolution bsde = solve_entropic_bsde(paths, iter_spec, params, bsde_config);
        sol.Zstar = worst_case_density(bsde, params, paths);
        sol.Y0 = bsde.y0;
        sol.Y0_se = bsde.y0_se;
        sol.y0_trace.push_back(bsde.y0);
        sol.outer_iters = iter + 1;

        // Budget-binding kernel with hysteresis: family members can tie in
        // expectation, so displace the incumbent only on a statistically
        // significant improvement; genuine gaps switch within one iteration.
        std::vector<BudgetValue> budgets = budget_value_per_kernel(c, xi, family, paths);
        int best = 0;
        for (int i = 1; i < family.size(); ++i) {
            if (budgets[i].value > budgets[best].value) best = i;
        }
        if (incumbent < 0 || budgets[best].value > budgets[incumbent].value +
                                                       (budgets[best].se + budgets[incumbent].se)) {
            incumbent = best;
        }
        sol.Ztilde = family.full_density(incumbent);
        sol.dual = calibrate_lambda(x, sol.Zstar, sol.Ztilde, incumbent, Sdelta, spec, params, family, paths,
                                    dual_config.tol_budget);

        last_controls = optimal_controls(sol.dual.lambda, sol.Zstar, sol.Ztilde, Sdelta, spec, params);
        if (with_consumption) c = (1.0 - rho) * c + rho * last_controls.c;
        if (with_terminal) xi = (1.0 - rho) * xi + rho * last_controls.xi;

        // Internal factor 1/2: the criterion downstream is the Y_0 move on a
        // re-solve at the undamped returned controls, roughly one damped step
        // ahead of the in-loop Cauchy difference measured here.
        if (iter >= 1 && std::abs(bsde.y0 - y0_prev) < 0.5 * dual_config.tol_fp) {
            converged = true;
            break;
        }
        y0_prev = bsde.y0;
    }

    if (!converged) {
        std::ostringstream os;
        os << "solve_robust_problem: outer fixed point did not converge after " << dual_config.max_outer
           << " iterations; Y0 trace:";
        for (double y : sol.y0_trace) os << " " << y;
        throw SolverError(os.str());
    }

    // Returned controls are the pure maximum-principle image, so the budget
    // equality and the first-order identities hold at the returned state.
    sol.c_star = last_controls.c;
    sol.xi_star = with_terminal ? last_controls.xi : VectorXd::Zero(M);
    BudgetValue final_budget = budget_value(sol.c_star, sol.xi_star, family, paths);
    sol.dual.kernel_index = incumbent;
    sol.dual.budget_gap = std::abs(final_budget.value - x) / std::max(std::abs(x), 1e-12);
    sol.Ztilde = family.full_density(incumbent);

    // Log utilities admit the exact density-ratio martingale
    //   M_n = Σ_{s<n} c*_s Δ + [ᾱ/S^δ_N + α Σ_{s>=n} Δ/S^δ_s] Z*_n / (λ Z̃_n)
    // through the maximum principle; it replaces the regression-estimated
    // martingale and removes its estimation noise from the hedge.
    std::optional<MatrixXd> exact_mart;
    const bool log_terminal = !with_terminal || spec.Ubar.kind() == Utility::Kind::Log;
    const bool log_running = !with_consumption || spec.U.kind() == Utility::Kind::Log;
    if (log_terminal && log_running) {
        MatrixXd mart(M, N + 1);
        VectorXd consumed = VectorXd::Zero(M);
        for (int n = 0; n <= N; ++n) {
            double factor = with_terminal ? params.alpha_bar() / Sdelta(N) : 0.0;
            if (with_consumption) {
                for (int s = n; s < N; ++s) factor += params.alpha() * paths.dt / Sdelta(s);
            }
            mart.col(n) = consumed + (factor / sol.dual.lambda) *
                                         sol.Zstar.col(n).cwiseQuotient(sol.Ztilde.col(n));
            if (with_consumption && n < N) consumed += sol.c_star.col(n) * paths.dt;
        }
        exact_mart.emplace(std::move(mart));
    }

    ReplicationResult rep = replicating_portfolio(sol.xi_star, sol.c_star, sol.Ztilde, family.kernel(incumbent),
                                                  paths, params, K, bsde_config,
                                                  exact_mart ? &*exact_mart : nullptr);
    sol.H_star = std::move(rep.H);
    sol.X_star = std::move(rep.X);
    sol.pre_projection_violation = rep.pre_projection_violation;
    return sol;
}

std::vector<AdmissibilityEntry> admissibility_check(const MatrixXd& c, const VectorXd& xi,
                                                    const std::vector<double>& gammas, const RewardSpec& spec,
                                                    const PathGrid& paths) {
    const Eigen::Index M = paths.paths;
    std::vector<AdmissibilityEntry> report;

    auto top_share = [&](VectorXd v) {
        std::sort(v.data(), v.data() + v.size(), std::greater<double>());
        Eigen::Index k = std::max<Eigen::Index>(1, v.size() / 1000);
        double total = pairwise_sum(v.data(), v.size());
        if (!(total > 0.0) || !std::isfinite(total)) return 1.0;
        return pairwise_sum(v.data(), k) / total;
    };

    for (double gamma : gammas) {
        AdmissibilityEntry e;
        e.gamma = gamma;

        VectorXd term(M);
        bool finite = true;
        for (Eigen::Index m = 0; m < M; ++m) {
            double u = xi.size() > 0 ? spec.Ubar.value(xi(m)) : 0.0;
            term(m) = std::exp(gamma * std::abs(u));
            finite = finite && std::isfinite(term(m));
        }
        e.terminal_moment = finite ? pairwise_mean(term) : std::numeric_limits<double>::infinity();
        e.terminal_top_share = finite ? top_share(term) : 1.0;

        bool running_finite = true;
        if (c.size() > 0) {
            VectorXd run(M);
            for (Eigen::Index m = 0; m < M; ++m) {
                double acc = 0.0;
                for (int n = 0; n < paths.steps; ++n) {
                    double u = spec.U.value(c(m, n));
                    acc += std::exp(gamma * std::abs(u)) * paths.dt;
                }
                run(m) = acc;
                running_finite = running_finite && std::isfinite(acc);
            }
            e.running_moment = running_finite ? pairwise_mean(run) : std::numeric_limits<double>::infinity();
            e.running_top_share = running_finite ? top_share(run) : 1.0;
        }

        e.flagged = !finite || !running_finite || !std::isfinite(e.terminal_moment) ||
                    !std::isfinite(e.running_moment) || e.terminal_top_share > 0.5 || e.running_top_share > 0.5;
        report.push_back(e);
    }
    return report;
}

} // namespace rfolio
