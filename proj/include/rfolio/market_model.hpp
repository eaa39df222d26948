#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rfolio/constraint_set.hpp"
#include "rfolio/numerics.hpp"

namespace rfolio {

/// Right-open piecewise-constant function of time: value values[i] on
/// [times[i], times[i+1]) with times[0] == 0. A single segment is a constant.
template <typename V>
class PiecewiseConstant {
public:
    PiecewiseConstant() = default;
    explicit PiecewiseConstant(V constant) : times_{0.0}, values_{std::move(constant)} {}
    PiecewiseConstant(std::vector<double> times, std::vector<V> values)
        : times_(std::move(times)), values_(std::move(values)) {
        if (times_.empty() || times_.size() != values_.size() || times_.front() != 0.0) {
            throw std::invalid_argument("PiecewiseConstant: need times starting at 0, one value per segment");
        }
        for (std::size_t i = 1; i < times_.size(); ++i) {
            if (times_[i] <= times_[i - 1]) throw std::invalid_argument("PiecewiseConstant: times must increase");
        }
    }

    const V& at(double t) const {
        std::size_t i = times_.size();
        while (i > 1 && times_[i - 1] > t) --i;
        return values_[i - 1];
    }

    std::size_t segments() const { return values_.size(); }
    const std::vector<double>& times() const { return times_; }
    const std::vector<V>& values() const { return values_; }

private:
    std::vector<double> times_{0.0};
    std::vector<V> values_{V{}};
};

/// Market primitives: drift b (piecewise constant in time), constant invertible
/// volatility matrix σ, discount rate δ(t) >= 0, entropy weight β > 0, utility
/// weights α, ᾱ >= 0, horizon T. All prices start at 1.
class MarketParams {
public:
    MarketParams(int dim, PiecewiseConstant<VectorXd> drift, MatrixXd sigma, PiecewiseConstant<double> delta,
                 double beta, double alpha, double alpha_bar, double horizon);

    /// Convenience: constant coefficients.
    static MarketParams constant(const VectorXd& b, const MatrixXd& sigma, double delta, double beta, double alpha,
                                 double alpha_bar, double horizon);

    int dim() const { return dim_; }
    const PiecewiseConstant<VectorXd>& drift() const { return drift_; }
    const MatrixXd& sigma() const { return sigma_; }
    const MatrixXd& sigma_inv() const { return sigma_inv_; }
    const PiecewiseConstant<double>& delta() const { return delta_; }
    double beta() const { return beta_; }
    double alpha() const { return alpha_; }
    double alpha_bar() const { return alpha_bar_; }
    double horizon() const { return horizon_; }

    VectorXd drift_at(double t) const { return drift_.at(t); }
    double delta_at(double t) const { return delta_.at(t); }

private:
    int dim_;
    PiecewiseConstant<VectorXd> drift_;
    MatrixXd sigma_, sigma_inv_;
    PiecewiseConstant<double> delta_;
    double beta_, alpha_, alpha_bar_, horizon_;
};

/// Simulated Brownian increments and asset paths on a uniform grid.
/// Immutable after construction; shared by every downstream transform.
struct PathGrid {
    int steps = 0;             ///< N
    Eigen::Index paths = 0;    ///< M
    double dt = 0.0;           ///< T / N
    double horizon = 0.0;      ///< T
    std::uint64_t seed = 0;
    std::vector<MatrixXd> dW;  ///< N entries, each M x d
    std::vector<MatrixXd> S;   ///< N+1 entries, each M x d

    int dim() const { return S.empty() ? 0 : static_cast<int>(S.front().cols()); }
    double time_at(int n) const { return dt * n; }

    /// Running Brownian motion W_{t_n} (pathwise sums of increments), M x d.
    MatrixXd brownian_at(int n) const;
};

/// Girsanov kernel process ν. Values must lie in the barrier cone of the
/// session's constraint set wherever they are used.
class KernelProcess {
public:
    using StateFn = std::function<VectorXd(double t, const VectorXd& state)>;

    static KernelProcess zero(int dim);
    static KernelProcess piecewise_constant(PiecewiseConstant<VectorXd> values);
    static KernelProcess constant(const VectorXd& value);
    static KernelProcess state_feedback(int dim, StateFn fn);

    bool is_zero() const { return kind_ == Kind::Zero; }
    bool is_deterministic() const { return kind_ != Kind::StateFeedback; }
    int dim() const { return dim_; }

    /// ν(t, S_t); the state argument is ignored for deterministic kernels.
    VectorXd at(double t, const VectorXd& state) const;
    VectorXd at(double t) const;

    std::string describe() const;

private:
    enum class Kind { Zero, PiecewiseConstantDeterministic, StateFeedback };
    KernelProcess(Kind kind, int dim) : kind_(kind), dim_(dim) {}

    Kind kind_;
    int dim_;
    PiecewiseConstant<VectorXd> values_;
    StateFn fn_;
};

/// Exact lognormal simulation of the asset paths, one RNG stream per path.
PathGrid simulate_paths(const MarketParams& params, int steps, Eigen::Index paths, std::uint64_t seed);

/// Build a grid from externally supplied Brownian increments (deterministic
/// test lattices); asset paths still follow the exact lognormal update.
PathGrid path_grid_from_increments(const MarketParams& params, const std::vector<MatrixXd>& dW, double horizon);

/// Relative risk θ_t = σ^{-1} b_t, piecewise constant in time.
PiecewiseConstant<VectorXd> relative_risk(const MarketParams& params);

/// Density process Z^ν of P^ν w.r.t. P: the discrete stochastic exponential
/// of -∫(θ + σ^{-1}ν)'dW, stepped in log space. M x (N+1), strictly positive,
/// Z_0 = 1.
MatrixXd girsanov_density(const PathGrid& paths, const MarketParams& params, const KernelProcess& nu);

/// Upper variation A_t(ν) = ∫_0^t δ^supp(ν_s) ds by left-endpoint Riemann sum;
/// per path, M x (N+1), nondecreasing with A_0 = 0. Kernel values outside the
/// barrier cone raise an error naming the offending time bucket.
MatrixXd upper_variation(const ConstraintSet& K, const KernelProcess& nu, const PathGrid& paths);

struct WealthResult {
    MatrixXd X;                        ///< M x (N+1)
    double constraint_violation = 0.0; ///< max distance of H_t to K (0 when unconstrained)
};

/// Euler wealth accumulation X_{n+1} = X_n + Σ_i H_n^i (S_{n+1}^i - S_n^i)/S_n^i - c_n Δ.
/// H: N entries of M x d, c: M x N (empty means zero consumption).
WealthResult wealth_path(const PathGrid& paths, const std::vector<MatrixXd>& H, const MatrixXd& c, double x0,
                         const ConstraintSet* K = nullptr);

/// Discount factor S^δ on grid points, exact exponential of the left Riemann
/// sum of δ; size N+1, starts at 1, nonincreasing.
VectorXd discount_factor(const MarketParams& params, const PathGrid& paths);

/// Entropy penalty R^δ_{t,T} per path for a positive density path Z^Q:
/// (1/S^δ_t) ∫_t^T δ_s S^δ_s log(Z_s/Z_t) ds + (S^δ_T/S^δ_t) log(Z_T/Z_t).
VectorXd relative_entropy_penalty(const MatrixXd& Zq, const MarketParams& params, const PathGrid& paths,
                                  int t_index);

struct MomentDiagnostic {
    double eta = 0.0;
    double moment = 0.0; ///< sample E[(Z_T)^eta]
    double se = 0.0;
    bool finite = false;
};

/// Admissibility-style moment estimates E[(Z^ν_T)^η] and E[(Z^ν_T)^{1-η̄}].
std::pair<MomentDiagnostic, MomentDiagnostic> kernel_moment_diagnostics(const MatrixXd& Znu, double eta,
                                                                        double eta_bar);

} // namespace rfolio
