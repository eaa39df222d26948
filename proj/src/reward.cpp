#include "rfolio/reward.hpp"

#include <cmath>

namespace rfolio {

Utility Utility::log_utility() { return Utility(Kind::Log); }

Utility Utility::power(double exponent) {
    if (!(exponent > 0.0) || !(exponent < 1.0)) {
        throw std::invalid_argument("Utility::power: exponent must lie in (0,1)");
    }
    Utility u(Kind::Power);
    u.exponent_ = exponent;
    return u;
}

Utility Utility::custom(Fn value, Fn deriv, Fn inv_deriv) {
    Utility u(Kind::Custom);
    u.value_ = std::move(value);
    u.deriv_ = std::move(deriv);
    u.inv_deriv_ = std::move(inv_deriv);
    return u;
}

double Utility::value(double z) const {
    switch (kind_) {
        case Kind::Log: return std::log(z);
        case Kind::Power: return std::pow(z, exponent_) / exponent_;
        case Kind::Custom: return value_(z);
    }
    throw std::logic_error("Utility::value");
}

double Utility::deriv(double z) const {
    switch (kind_) {
        case Kind::Log: return 1.0 / z;
        case Kind::Power: return std::pow(z, exponent_ - 1.0);
        case Kind::Custom: return deriv_(z);
    }
    throw std::logic_error("Utility::deriv");
}

double Utility::inv_deriv(double y) const {
    switch (kind_) {
        case Kind::Log: return 1.0 / y;
        case Kind::Power: return std::pow(y, 1.0 / (exponent_ - 1.0));
        case Kind::Custom: return inv_deriv_(y);
    }
    throw std::logic_error("Utility::inv_deriv");
}

void Utility::check_shape() const {
    double prev_v = -std::numeric_limits<double>::infinity();
    double prev_d = std::numeric_limits<double>::infinity();
    for (double z = 1e-6; z < 1e6; z *= 4.0) {
        double v = value(z), d = deriv(z);
        if (!(v > prev_v)) throw std::invalid_argument("Utility::check_shape: not strictly increasing");
        if (!(d < prev_d) || !(d > 0.0)) throw std::invalid_argument("Utility::check_shape: marginal not strictly decreasing");
        prev_v = v;
        prev_d = d;
    }
    if (!(deriv(1e-9) > 1e3) || !(deriv(1e9) < 1e-3)) {
        throw std::invalid_argument("Utility::check_shape: Inada endpoints violated");
    }
}

ConsumptionSpec ConsumptionSpec::constant_rate(double c) {
    if (c < 0.0) throw std::invalid_argument("ConsumptionSpec: rate must be >= 0");
    ConsumptionSpec s;
    s.kind = 1;
    s.c = c;
    return s;
}

ConsumptionSpec ConsumptionSpec::per_path(MatrixXd rates) {
    if ((rates.array() < 0.0).any()) throw std::invalid_argument("ConsumptionSpec: rates must be >= 0");
    ConsumptionSpec s;
    s.kind = 2;
    s.rates = std::move(rates);
    return s;
}

MatrixXd ConsumptionSpec::evaluate(const PathGrid& g) const {
    switch (kind) {
        case 0: return MatrixXd();
        case 1: return MatrixXd::Constant(g.paths, g.steps, c);
        case 2:
            if (rates.rows() != g.paths || rates.cols() != g.steps) {
                throw std::invalid_argument("ConsumptionSpec: per-path rates must be M x N");
            }
            return rates;
    }
    throw std::logic_error("ConsumptionSpec::evaluate");
}

TerminalSpec TerminalSpec::constant(double k) {
    if (k < 0.0) throw std::invalid_argument("TerminalSpec: payoff must be >= 0");
    TerminalSpec t;
    t.kind = 0;
    t.a = k;
    return t;
}

TerminalSpec TerminalSpec::asset_price(int index) {
    TerminalSpec t;
    t.kind = 1;
    t.index = index;
    return t;
}

TerminalSpec TerminalSpec::exp_gaussian(double m, double s) {
    TerminalSpec t;
    t.kind = 2;
    t.a = m;
    t.b = s;
    return t;
}

TerminalSpec TerminalSpec::per_path(VectorXd values) {
    if ((values.array() < 0.0).any()) throw std::invalid_argument("TerminalSpec: payoff must be >= 0");
    TerminalSpec t;
    t.kind = 3;
    t.values = std::move(values);
    return t;
}

VectorXd TerminalSpec::evaluate(const PathGrid& g) const {
    switch (kind) {
        case 0: return VectorXd::Constant(g.paths, a);
        case 1: {
            if (index < 0 || index >= g.dim()) throw std::invalid_argument("TerminalSpec: asset index out of range");
            return g.S.back().col(index);
        }
        case 2: {
            VectorXd WT = g.brownian_at(g.steps).col(0);
            return (a + (b / std::sqrt(g.horizon)) * WT.array()).exp().matrix();
        }
        case 3:
            if (values.size() != g.paths) throw std::invalid_argument("TerminalSpec: per-path values must have M entries");
            return values;
    }
    throw std::logic_error("TerminalSpec::evaluate");
}

} // namespace rfolio
