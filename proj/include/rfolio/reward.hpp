#pragma once

#include <functional>
#include <variant>

#include "rfolio/market_model.hpp"

namespace rfolio {

/// Utility function on (0, ∞), strictly increasing and strictly concave with
/// Inada endpoints. Built-ins: Log and Power (z^η/η, η in (0,1)); Custom takes
/// the value, the derivative and the inverse of the derivative.
class Utility {
public:
    enum class Kind { Log, Power, Custom };
    using Fn = std::function<double(double)>;

    static Utility log_utility();
    static Utility power(double exponent);
    static Utility custom(Fn value, Fn deriv, Fn inv_deriv);

    Kind kind() const { return kind_; }
    double exponent() const { return exponent_; }

    double value(double z) const;
    double deriv(double z) const;
    /// Inverse marginal I = (U')^{-1}, mapping shadow prices to quantities.
    double inv_deriv(double y) const;

    /// Numerical spot check of monotonicity, strict concavity and the Inada
    /// endpoints on a log-spaced grid; throws on violation.
    void check_shape() const;

private:
    explicit Utility(Kind kind) : kind_(kind) {}
    Kind kind_;
    double exponent_ = 0.5;
    Fn value_, deriv_, inv_deriv_;
};

/// Consumption specification: identically zero, deterministic constant rate,
/// or a per-path M x N rate matrix.
struct ConsumptionSpec {
    static ConsumptionSpec zero() { return {}; }
    static ConsumptionSpec constant_rate(double c);
    static ConsumptionSpec per_path(MatrixXd rates);

    bool is_zero() const { return kind == 0; }
    /// Materialize as an M x N matrix on the given grid (empty when zero).
    MatrixXd evaluate(const PathGrid& g) const;

    int kind = 0; // 0 zero, 1 constant, 2 per-path
    double c = 0.0;
    MatrixXd rates;
};

/// Terminal payoff ξ >= 0 as a function of the terminal path state.
struct TerminalSpec {
    static TerminalSpec constant(double k);
    /// ξ = S^i_T
    static TerminalSpec asset_price(int index);
    /// ξ = exp(m + s W^1_T / sqrt(T)); log ξ ~ N(m, s²).
    static TerminalSpec exp_gaussian(double m, double s);
    static TerminalSpec per_path(VectorXd values);

    VectorXd evaluate(const PathGrid& g) const;

    int kind = 0; // 0 constant, 1 asset price, 2 exp-gaussian, 3 per-path
    double a = 1.0, b = 0.0;
    int index = 0;
    VectorXd values;
};

/// Running utility U applied to consumption, terminal utility Ū applied to the
/// terminal payoff. Weights α, ᾱ live in MarketParams.
struct RewardSpec {
    Utility U = Utility::log_utility();
    Utility Ubar = Utility::log_utility();
    ConsumptionSpec consumption = ConsumptionSpec::zero();
    TerminalSpec terminal = TerminalSpec::constant(1.0);
};

} // namespace rfolio
