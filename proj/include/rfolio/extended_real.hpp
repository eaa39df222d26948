#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace rfolio {

/// Value in [finite reals] ∪ {+∞}, the range of a support function of a set
/// containing the origin. Addition and nonnegative scaling propagate +∞.
class ExtReal {
public:
    ExtReal() : value_(0.0), finite_(true) {}
    explicit ExtReal(double v) : value_(v), finite_(true) {
        if (!std::isfinite(v)) throw std::invalid_argument("ExtReal: finite constructor got non-finite value");
    }

    static ExtReal infinity() {
        ExtReal r;
        r.finite_ = false;
        r.value_ = std::numeric_limits<double>::infinity();
        return r;
    }

    bool is_finite() const { return finite_; }

    /// Finite value; throws when called on +∞.
    double value() const {
        if (!finite_) throw std::domain_error("ExtReal: value() on +infinity");
        return value_;
    }

    /// Plain double, +∞ mapped to IEEE infinity.
    double as_double() const { return finite_ ? value_ : std::numeric_limits<double>::infinity(); }

    ExtReal operator+(const ExtReal& o) const {
        if (!finite_ || !o.finite_) return infinity();
        return ExtReal(value_ + o.value_);
    }
    ExtReal& operator+=(const ExtReal& o) { return *this = *this + o; }

    /// Scaling by t >= 0; 0 * ∞ is taken as 0 (positive homogeneity at the origin).
    ExtReal scaled(double t) const {
        if (t < 0.0) throw std::invalid_argument("ExtReal::scaled: negative factor");
        if (t == 0.0) return ExtReal(0.0);
        if (!finite_) return infinity();
        return ExtReal(t * value_);
    }

    friend bool operator==(const ExtReal& a, const ExtReal& b) {
        if (a.finite_ != b.finite_) return false;
        return !a.finite_ || a.value_ == b.value_;
    }
    friend bool operator<(const ExtReal& a, const ExtReal& b) {
        if (!a.finite_) return false;
        if (!b.finite_) return true;
        return a.value_ < b.value_;
    }
    friend bool operator<=(const ExtReal& a, const ExtReal& b) { return a < b || a == b; }

    friend std::ostream& operator<<(std::ostream& os, const ExtReal& x) {
        if (x.finite_) return os << x.value_;
        return os << "+inf";
    }

private:
    double value_;
    bool finite_;
};

} // namespace rfolio
