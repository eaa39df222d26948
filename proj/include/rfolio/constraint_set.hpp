#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rfolio/extended_real.hpp"
#include "rfolio/numerics.hpp"

namespace rfolio {

/// Closed convex portfolio constraint set K ⊂ R^d with 0 ∈ K. Supported
/// families: the full space, the nonnegative orthant cone, coordinate boxes
/// (bounds may be infinite), and convex hulls of finite vertex lists.
///
/// The set carries its support function of -K,
///     support_value(x) = sup_{y in K} (-y'x),
/// the barrier cone test (finiteness of the support function) and the
/// Euclidean projection onto K. Instances are immutable after construction.
class ConstraintSet {
public:
    enum class Kind { FullSpace, NonNegOrthantCone, Box, PolytopeHull };

    static ConstraintSet full_space(int dim);
    static ConstraintSet nonneg_orthant_cone(int dim);
    /// Box prod_i [lower_i, upper_i] with lower_i in [-inf, 0], upper_i in [0, +inf].
    static ConstraintSet box(const VectorXd& lower, const VectorXd& upper);
    /// Convex hull of the given vertices (one per column); must contain the origin.
    static ConstraintSet polytope_hull(const MatrixXd& vertices);

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }
    const VectorXd& lower() const { return lower_; }
    const VectorXd& upper() const { return upper_; }
    const MatrixXd& vertices() const { return vertices_; }

    bool contains(const VectorXd& y, double tol = 1e-9) const;

    std::string describe() const;

private:
    ConstraintSet(Kind kind, int dim) : kind_(kind), dim_(dim) {}

    Kind kind_;
    int dim_;
    VectorXd lower_, upper_; // Box only
    MatrixXd vertices_;      // PolytopeHull only, d x n_vertices
};

/// sup_{y in K} (-y'x). Exact for every supported family (vertex maximum for
/// polytopes); +∞ signalled through ExtReal.
ExtReal support_value(const ConstraintSet& K, const VectorXd& x);

/// x in K~ = {x : support_value(x) < ∞}, the barrier cone of -K.
bool in_barrier_cone(const ConstraintSet& K, const VectorXd& x);

/// Euclidean projection argmin_{k in K} |k - y|_2. Closed form for
/// FullSpace/Cone/Box; a simplex-weight QP solved by projected gradient for
/// PolytopeHull (accurate to ~1e-10 on well-scaled vertex lists).
VectorXd project(const ConstraintSet& K, const VectorXd& y);

/// Grid maximum of -y'x over sampled y in K: a lower bound on support_value
/// that converges as the resolution grows. Unbounded sets require a
/// truncation radius (the grid spans K ∩ [-R, R]^d).
double support_value_bruteforce(const ConstraintSet& K, const VectorXd& x, int grid_resolution,
                                std::optional<double> truncation_radius = std::nullopt);

} // namespace rfolio
