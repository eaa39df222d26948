#include "rfolio/market_model.hpp"

#include <cmath>
#include <sstream>

namespace rfolio {

MarketParams::MarketParams(int dim, PiecewiseConstant<VectorXd> drift, MatrixXd sigma,
                           PiecewiseConstant<double> delta, double beta, double alpha, double alpha_bar,
                           double horizon)
    : dim_(dim),
      drift_(std::move(drift)),
      sigma_(std::move(sigma)),
      delta_(std::move(delta)),
      beta_(beta),
      alpha_(alpha),
      alpha_bar_(alpha_bar),
      horizon_(horizon) {
    if (dim_ < 1) throw std::invalid_argument("MarketParams: dim must be positive");
    if (sigma_.rows() != dim_ || sigma_.cols() != dim_) {
        throw std::invalid_argument("MarketParams: sigma must be d x d");
    }
    for (const VectorXd& b : drift_.values()) require_dim(b.size(), dim_, "MarketParams drift");
    Eigen::JacobiSVD<MatrixXd> svd(sigma_, Eigen::ComputeThinU | Eigen::ComputeThinV);
    double smin = svd.singularValues()(svd.singularValues().size() - 1);
    double smax = svd.singularValues()(0);
    if (smin <= 0.0 || smax / smin > 1e12) {
        throw std::invalid_argument("MarketParams: sigma is singular or too ill-conditioned");
    }
    sigma_inv_ = sigma_.inverse();
    for (double dv : delta_.values()) {
        if (dv < 0.0 || !std::isfinite(dv)) throw std::invalid_argument("MarketParams: delta must be >= 0 and bounded");
    }
    if (!(beta_ > 0.0) || !std::isfinite(beta_)) throw std::invalid_argument("MarketParams: beta must be in (0, inf)");
    if (alpha_ < 0.0 || alpha_bar_ < 0.0) throw std::invalid_argument("MarketParams: utility weights must be >= 0");
    if (!(horizon_ > 0.0)) throw std::invalid_argument("MarketParams: horizon must be positive");
}

MarketParams MarketParams::constant(const VectorXd& b, const MatrixXd& sigma, double delta, double beta,
                                    double alpha, double alpha_bar, double horizon) {
    return MarketParams(static_cast<int>(b.size()), PiecewiseConstant<VectorXd>(b), sigma,
                        PiecewiseConstant<double>(delta), beta, alpha, alpha_bar, horizon);
}

MatrixXd PathGrid::brownian_at(int n) const {
    MatrixXd W = MatrixXd::Zero(paths, dim());
    for (int s = 0; s < n; ++s) W += dW[s];
    return W;
}

KernelProcess KernelProcess::zero(int dim) { return KernelProcess(Kind::Zero, dim); }

KernelProcess KernelProcess::piecewise_constant(PiecewiseConstant<VectorXd> values) {
    if (values.values().empty()) throw std::invalid_argument("KernelProcess: empty value list");
    KernelProcess k(Kind::PiecewiseConstantDeterministic, static_cast<int>(values.values().front().size()));
    for (const VectorXd& v : values.values()) require_dim(v.size(), k.dim_, "KernelProcess values");
    k.values_ = std::move(values);
    return k;
}

KernelProcess KernelProcess::constant(const VectorXd& value) {
    return piecewise_constant(PiecewiseConstant<VectorXd>(value));
}

KernelProcess KernelProcess::state_feedback(int dim, StateFn fn) {
    KernelProcess k(Kind::StateFeedback, dim);
    k.fn_ = std::move(fn);
    return k;
}

VectorXd KernelProcess::at(double t, const VectorXd& state) const {
    switch (kind_) {
        case Kind::Zero: return VectorXd::Zero(dim_);
        case Kind::PiecewiseConstantDeterministic: return values_.at(t);
        case Kind::StateFeedback: return fn_(t, state);
    }
    throw std::logic_error("KernelProcess::at: unhandled kind");
}

VectorXd KernelProcess::at(double t) const {
    if (!is_deterministic()) throw std::logic_error("KernelProcess::at(t): state-feedback kernel needs a state");
    return at(t, VectorXd::Zero(dim_));
}

std::string KernelProcess::describe() const {
    switch (kind_) {
        case Kind::Zero: return "Zero";
        case Kind::PiecewiseConstantDeterministic: {
            std::ostringstream os;
            os << "PiecewiseConstant[";
            for (std::size_t i = 0; i < values_.segments(); ++i) {
                if (i) os << "; ";
                os << "t>=" << values_.times()[i] << ": (" << values_.values()[i].transpose() << ")";
            }
            os << "]";
            return os.str();
        }
        case Kind::StateFeedback: return "StateFeedback";
    }
    return "?";
}

PathGrid simulate_paths(const MarketParams& params, int steps, Eigen::Index paths, std::uint64_t seed) {
    if (steps < 1 || paths < 1) throw std::invalid_argument("simulate_paths: steps and paths must be >= 1");
    const int d = params.dim();
    PathGrid g;
    g.steps = steps;
    g.paths = paths;
    g.horizon = params.horizon();
    g.dt = params.horizon() / steps;
    g.seed = seed;
    g.dW.assign(steps, MatrixXd(paths, d));
    const double sq_dt = std::sqrt(g.dt);
    for (Eigen::Index m = 0; m < paths; ++m) {
        PathNormalSampler rng(seed, static_cast<std::uint64_t>(m));
        for (int n = 0; n < steps; ++n) {
            for (int j = 0; j < d; ++j) g.dW[n](m, j) = sq_dt * rng.normal();
        }
    }

    g.S.assign(steps + 1, MatrixXd(paths, d));
    g.S[0].setOnes();
    for (int n = 0; n < steps; ++n) {
        const VectorXd b = params.drift_at(g.time_at(n));
        VectorXd drift_term(d); // (b^i - 0.5 sum_j sigma_ij^2) dt
        for (int i = 0; i < d; ++i) drift_term(i) = (b(i) - 0.5 * params.sigma().row(i).squaredNorm()) * g.dt;
        // S_{n+1}^i = S_n^i exp(drift_i + sum_j sigma_ij dW^j)
        MatrixXd diffusion = g.dW[n] * params.sigma().transpose(); // M x d
        g.S[n + 1] = g.S[n].array() * (diffusion.rowwise() + drift_term.transpose()).array().exp();
    }
    return g;
}

PathGrid path_grid_from_increments(const MarketParams& params, const std::vector<MatrixXd>& dW, double horizon) {
    if (dW.empty()) throw std::invalid_argument("path_grid_from_increments: need at least one step");
    const int d = params.dim();
    const Eigen::Index M = dW.front().rows();
    PathGrid g;
    g.steps = static_cast<int>(dW.size());
    g.paths = M;
    g.horizon = horizon;
    g.dt = horizon / g.steps;
    g.seed = 0;
    g.dW = dW;
    for (const MatrixXd& inc : dW) {
        if (inc.rows() != M || inc.cols() != d) throw std::invalid_argument("path_grid_from_increments: ragged increments");
    }
    g.S.assign(g.steps + 1, MatrixXd(M, d));
    g.S[0].setOnes();
    for (int n = 0; n < g.steps; ++n) {
        const VectorXd b = params.drift_at(g.time_at(n));
        VectorXd drift_term(d);
        for (int i = 0; i < d; ++i) drift_term(i) = (b(i) - 0.5 * params.sigma().row(i).squaredNorm()) * g.dt;
        MatrixXd diffusion = g.dW[n] * params.sigma().transpose();
        g.S[n + 1] = g.S[n].array() * (diffusion.rowwise() + drift_term.transpose()).array().exp();
    }
    return g;
}

PiecewiseConstant<VectorXd> relative_risk(const MarketParams& params) {
    std::vector<VectorXd> theta;
    theta.reserve(params.drift().segments());
    for (const VectorXd& b : params.drift().values()) theta.push_back(params.sigma_inv() * b);
    return PiecewiseConstant<VectorXd>(params.drift().times(), std::move(theta));
}

MatrixXd girsanov_density(const PathGrid& paths, const MarketParams& params, const KernelProcess& nu) {
    require_dim(nu.dim(), params.dim(), "girsanov_density kernel");
    const Eigen::Index M = paths.paths;
    const int N = paths.steps;
    const int d = params.dim();
    MatrixXd logZ = MatrixXd::Zero(M, N + 1);
    const auto theta = relative_risk(params);
    for (int n = 0; n < N; ++n) {
        const double t = paths.time_at(n);
        const VectorXd th = theta.at(t);
        if (nu.is_deterministic()) {
            const VectorXd phi = th + params.sigma_inv() * nu.at(t);
            const double half_phi2_dt = 0.5 * phi.squaredNorm() * paths.dt;
            logZ.col(n + 1) = logZ.col(n) - paths.dW[n] * phi;
            logZ.col(n + 1).array() -= half_phi2_dt;
        } else {
            for (Eigen::Index m = 0; m < M; ++m) {
                const VectorXd phi = th + params.sigma_inv() * nu.at(t, paths.S[n].row(m).transpose());
                logZ(m, n + 1) = logZ(m, n) - paths.dW[n].row(m).dot(phi) - 0.5 * phi.squaredNorm() * paths.dt;
            }
        }
    }
    (void)d;
    return logZ.array().exp().matrix();
}

MatrixXd upper_variation(const ConstraintSet& K, const KernelProcess& nu, const PathGrid& paths) {
    require_dim(nu.dim(), K.dim(), "upper_variation kernel");
    const Eigen::Index M = paths.paths;
    const int N = paths.steps;
    MatrixXd A = MatrixXd::Zero(M, N + 1);
    for (int n = 0; n < N; ++n) {
        const double t = paths.time_at(n);
        if (nu.is_deterministic()) {
            ExtReal sv = support_value(K, nu.at(t));
            if (!sv.is_finite()) {
                throw SolverError("upper_variation: kernel value outside the barrier cone at time bucket " +
                                  std::to_string(n) + " (t=" + std::to_string(t) + ")");
            }
            A.col(n + 1) = A.col(n).array() + sv.value() * paths.dt;
        } else {
            for (Eigen::Index m = 0; m < M; ++m) {
                ExtReal sv = support_value(K, nu.at(t, paths.S[n].row(m).transpose()));
                if (!sv.is_finite()) {
                    throw SolverError("upper_variation: kernel value outside the barrier cone at time bucket " +
                                      std::to_string(n) + ", path " + std::to_string(m));
                }
                A(m, n + 1) = A(m, n) + sv.value() * paths.dt;
            }
        }
    }
    return A;
}

WealthResult wealth_path(const PathGrid& paths, const std::vector<MatrixXd>& H, const MatrixXd& c, double x0,
                         const ConstraintSet* K) {
    const Eigen::Index M = paths.paths;
    const int N = paths.steps;
    const int d = paths.dim();
    const bool has_c = c.size() > 0;
    if (has_c && (c.rows() != M || c.cols() != N)) throw std::invalid_argument("wealth_path: c must be M x N");
    if (has_c && (c.array() < 0.0).any()) throw std::invalid_argument("wealth_path: negative consumption");
    const bool has_H = !H.empty();
    if (has_H && static_cast<int>(H.size()) != N) throw std::invalid_argument("wealth_path: H must have N entries");

    WealthResult res;
    res.X = MatrixXd(M, N + 1);
    res.X.col(0).setConstant(x0);
    for (int n = 0; n < N; ++n) {
        VectorXd gain = VectorXd::Zero(M);
        if (has_H) {
            if (H[n].rows() != M || H[n].cols() != d) throw std::invalid_argument("wealth_path: H entries must be M x d");
            MatrixXd rel = (paths.S[n + 1] - paths.S[n]).array() / paths.S[n].array();
            gain = (H[n].array() * rel.array()).rowwise().sum();
            if (K) {
                for (Eigen::Index m = 0; m < M; ++m) {
                    VectorXd h = H[n].row(m).transpose();
                    double viol = (h - project(*K, h)).norm();
                    res.constraint_violation = std::max(res.constraint_violation, viol);
                }
            }
        }
        res.X.col(n + 1) = res.X.col(n) + gain;
        if (has_c) res.X.col(n + 1) -= c.col(n) * paths.dt;
    }
    return res;
}

VectorXd discount_factor(const MarketParams& params, const PathGrid& paths) {
    VectorXd Sd(paths.steps + 1);
    double integral = 0.0;
    Sd(0) = 1.0;
    for (int n = 0; n < paths.steps; ++n) {
        integral += params.delta_at(paths.time_at(n)) * paths.dt;
        Sd(n + 1) = std::exp(-integral);
    }
    return Sd;
}

VectorXd relative_entropy_penalty(const MatrixXd& Zq, const MarketParams& params, const PathGrid& paths,
                                  int t_index) {
    const Eigen::Index M = paths.paths;
    const int N = paths.steps;
    if (Zq.rows() != M || Zq.cols() != N + 1) throw std::invalid_argument("relative_entropy_penalty: Z must be M x (N+1)");
    if (t_index < 0 || t_index > N) throw std::invalid_argument("relative_entropy_penalty: bad time index");
    if ((Zq.array() <= 0.0).any()) throw std::invalid_argument("relative_entropy_penalty: density must be positive");
    VectorXd Sd = discount_factor(params, paths);
    VectorXd logZt = Zq.col(t_index).array().log().matrix();
    VectorXd R = VectorXd::Zero(M);
    for (int s = t_index; s < N; ++s) {
        double w = params.delta_at(paths.time_at(s)) * Sd(s) * paths.dt;
        if (w != 0.0) R += w * (Zq.col(s).array().log() - logZt.array()).matrix();
    }
    R /= Sd(t_index);
    R += (Sd(N) / Sd(t_index)) * (Zq.col(N).array().log() - logZt.array()).matrix();
    return R;
}

std::pair<MomentDiagnostic, MomentDiagnostic> kernel_moment_diagnostics(const MatrixXd& Znu, double eta,
                                                                        double eta_bar) {
    const VectorXd ZT = Znu.col(Znu.cols() - 1);
    auto one = [&](double p) {
        MomentDiagnostic m;
        m.eta = p;
        VectorXd v = ZT.array().pow(p).matrix();
        SampleStats st = sample_stats(v);
        m.moment = st.mean;
        m.se = st.se;
        m.finite = std::isfinite(st.mean) && std::isfinite(st.se);
        return m;
    };
    return {one(eta), one(1.0 - eta_bar)};
}

} // namespace rfolio
