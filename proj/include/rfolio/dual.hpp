#pragma once

#include "rfolio/bsde.hpp"

namespace rfolio {

struct DualConfig {
    double tol_budget = 1e-3; ///< relative budget-equality tolerance for λ*
    double tol_fp = 1e-3;     ///< |ΔY_0| stop for the outer fixed point
    double damping = 0.5;     ///< weight of the new controls in the damped update
    int max_outer = 30;
};

/// Finite family of admissible dual kernels with cached terminal densities
/// Z^ν_T and terminal upper variations A_T(ν). Admissibility (barrier-cone
/// membership) is checked at construction.
class KernelFamily {
public:
    KernelFamily(std::vector<KernelProcess> kernels, const ConstraintSet& K, const PathGrid& paths,
                 const MarketParams& params);

    int size() const { return static_cast<int>(kernels_.size()); }
    const KernelProcess& kernel(int i) const { return kernels_.at(i); }
    const VectorXd& terminal_density(int i) const { return ZT_.at(i); }
    const VectorXd& terminal_variation(int i) const { return AT_.at(i); }

    /// Full density path Z^ν (M x (N+1)) of kernel i, recomputed on demand.
    MatrixXd full_density(int i) const;

private:
    std::vector<KernelProcess> kernels_;
    std::vector<VectorXd> ZT_, AT_;
    const PathGrid* paths_;
    const MarketParams* params_;
};

struct BudgetValue {
    double value = 0.0;
    double se = 0.0;       ///< Monte Carlo SE of the attaining kernel's estimate
    int argmax_kernel = 0;
};

/// Dual budget functional v(c, ξ) = max over the kernel family of
/// E_P[Z^ν_T (ξ + Σ c_t Δ - A_T(ν))]. c may be empty (zero consumption).
BudgetValue budget_value(const MatrixXd& c, const VectorXd& xi, const KernelFamily& family, const PathGrid& paths);

/// Per-kernel budget estimates (value and Monte Carlo SE), one per family member.
std::vector<BudgetValue> budget_value_per_kernel(const MatrixXd& c, const VectorXd& xi, const KernelFamily& family,
                                                 const PathGrid& paths);

struct OptimalControls {
    MatrixXd c;  ///< M x N, empty when α = 0
    VectorXd xi; ///< M, empty when ᾱ = 0
};

/// Candidate controls from the maximum principle at shadow price λ:
/// c*_t = I₁(λ S^δ_t Z̃_t / (α Z*_t)), ξ* = I₂(λ S^δ_T Z̃_T / (ᾱ Z*_T)).
OptimalControls optimal_controls(double lambda, const MatrixXd& Zstar, const MatrixXd& Ztilde,
                                 const VectorXd& Sdelta, const RewardSpec& spec, const MarketParams& params);

struct DualState {
    double lambda = 0.0;
    int kernel_index = 0;   ///< budget-binding kernel ν* within the family
    double budget_gap = 0.0; ///< |v(c*, ξ*) - x| / max(x, 1)
};

/// λ* from budget equality v(c*(λ), ξ*(λ)) = x by bisection on log λ. The
/// controls are formed against the fixed dual density Z̃ (the budget-binding
/// kernel); the budget itself is re-maximized over the whole family.
DualState calibrate_lambda(double x, const MatrixXd& Zstar, const MatrixXd& Ztilde, int kernel_index,
                           const VectorXd& Sdelta, const RewardSpec& spec, const MarketParams& params,
                           const KernelFamily& family, const PathGrid& paths, double tol_budget);

struct ReplicationResult {
    std::vector<MatrixXd> H;  ///< N entries, M x d, projected onto K
    MatrixXd X;               ///< M x (N+1) estimated wealth E_{P̃*}[ξ* + remaining consumption | F_t]
    double pre_projection_violation = 0.0; ///< RMS distance of raw H to K
};

/// Hedge extraction: regression of the increments of the P̃*-martingale
/// E_{P̃*}[ξ + Σ c Δ | F_t] on the ν-compensated asset-return increments,
/// followed by Euclidean projection onto K. When the caller already knows the
/// martingale pathwise (log utilities admit the exact density-ratio form
/// through the maximum principle), passing it skips the inner conditional
/// regressions and their estimation noise.
ReplicationResult replicating_portfolio(const VectorXd& xi, const MatrixXd& c, const MatrixXd& Ztilde,
                                        const KernelProcess& nu, const PathGrid& paths, const MarketParams& params,
                                        const ConstraintSet& K, const BsdeConfig& config = {},
                                        const MatrixXd* exact_martingale = nullptr);

struct RobustSolution {
    DualState dual;
    MatrixXd c_star;           ///< M x N (empty when α = 0)
    VectorXd xi_star;          ///< M
    std::vector<MatrixXd> H_star;
    MatrixXd X_star;           ///< M x (N+1)
    MatrixXd Zstar;            ///< worst-case density, M x (N+1)
    MatrixXd Ztilde;           ///< budget-binding density, M x (N+1)
    double Y0 = 0.0;
    double Y0_se = 0.0;
    double pre_projection_violation = 0.0;
    int outer_iters = 0;
    std::vector<double> y0_trace;
};

/// Coupled forward-backward fixed point: alternate the entropic BSDE solve
/// (worst-case density), the dual kernel search, the λ* calibration and the
/// control update, with damping, until |ΔY_0| < tol_fp. The returned controls
/// are the last maximum-principle image (undamped), so the maximum-principle
/// identities hold exactly at the returned state.
RobustSolution solve_robust_problem(double x, const PathGrid& paths, const MarketParams& params,
                                    const ConstraintSet& K, const RewardSpec& spec,
                                    const std::vector<KernelProcess>& kernel_family, const DualConfig& dual_config,
                                    const BsdeConfig& bsde_config = {});

struct AdmissibilityEntry {
    double gamma = 0.0;
    double terminal_moment = 0.0; ///< E[exp(γ|Ū(ξ)|)]
    double terminal_top_share = 0.0;
    double running_moment = 0.0;  ///< E[∫ exp(γ|U(c_s)|) ds] (0 when no consumption)
    double running_top_share = 0.0;
    bool flagged = false;
};

/// Finite-sample admissibility diagnostics: exponential moments per γ, with a
/// heavy-tail flag when an estimate is non-finite or dominated by the top
/// 0.1% of paths.
std::vector<AdmissibilityEntry> admissibility_check(const MatrixXd& c, const VectorXd& xi,
                                                    const std::vector<double>& gammas, const RewardSpec& spec,
                                                    const PathGrid& paths);

} // namespace rfolio
