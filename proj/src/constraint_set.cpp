#include "rfolio/constraint_set.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rfolio {

ConstraintSet ConstraintSet::full_space(int dim) {
    if (dim < 1) throw std::invalid_argument("ConstraintSet: dim must be positive");
    return ConstraintSet(Kind::FullSpace, dim);
}

ConstraintSet ConstraintSet::nonneg_orthant_cone(int dim) {
    if (dim < 1) throw std::invalid_argument("ConstraintSet: dim must be positive");
    return ConstraintSet(Kind::NonNegOrthantCone, dim);
}

ConstraintSet ConstraintSet::box(const VectorXd& lower, const VectorXd& upper) {
    if (lower.size() != upper.size() || lower.size() < 1) {
        throw std::invalid_argument("ConstraintSet::box: lower/upper size mismatch");
    }
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
        if (std::isnan(lower(i)) || std::isnan(upper(i))) {
            throw std::invalid_argument("ConstraintSet::box: NaN bound");
        }
        if (lower(i) > 0.0 || upper(i) < 0.0) {
            throw std::invalid_argument("ConstraintSet::box: bounds must satisfy lower <= 0 <= upper (component " +
                                        std::to_string(i) + ")");
        }
    }
    ConstraintSet K(Kind::Box, static_cast<int>(lower.size()));
    K.lower_ = lower;
    K.upper_ = upper;
    return K;
}

ConstraintSet ConstraintSet::polytope_hull(const MatrixXd& vertices) {
    if (vertices.cols() < 1 || vertices.rows() < 1) {
        throw std::invalid_argument("ConstraintSet::polytope_hull: need at least one vertex");
    }
    if (!vertices.allFinite()) throw std::invalid_argument("ConstraintSet::polytope_hull: non-finite vertex");
    ConstraintSet K(Kind::PolytopeHull, static_cast<int>(vertices.rows()));
    K.vertices_ = vertices;
    // 0 in K is an invariant of every supported family; for a hull it must be
    // checked explicitly (distance of the projection of 0 onto the hull).
    VectorXd p0 = project(K, VectorXd::Zero(K.dim_));
    if (p0.norm() > 1e-7) {
        throw std::invalid_argument("ConstraintSet::polytope_hull: hull does not contain the origin");
    }
    return K;
}

bool ConstraintSet::contains(const VectorXd& y, double tol) const {
    require_dim(y.size(), dim_, "ConstraintSet::contains");
    switch (kind_) {
        case Kind::FullSpace:
            return true;
        case Kind::NonNegOrthantCone:
            return (y.array() >= -tol).all();
        case Kind::Box:
            return (y.array() >= lower_.array() - tol).all() && (y.array() <= upper_.array() + tol).all();
        case Kind::PolytopeHull:
            return (project(*this, y) - y).norm() <= tol;
    }
    return false;
}

std::string ConstraintSet::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::FullSpace: os << "FullSpace(" << dim_ << ")"; break;
        case Kind::NonNegOrthantCone: os << "NonNegOrthantCone(" << dim_ << ")"; break;
        case Kind::Box:
            os << "Box(lower=[" << lower_.transpose() << "], upper=[" << upper_.transpose() << "])";
            break;
        case Kind::PolytopeHull: os << "PolytopeHull(" << vertices_.cols() << " vertices, dim " << dim_ << ")"; break;
    }
    return os.str();
}

ExtReal support_value(const ConstraintSet& K, const VectorXd& x) {
    require_dim(x.size(), K.dim(), "support_value");
    switch (K.kind()) {
        case ConstraintSet::Kind::FullSpace: {
            if ((x.array() == 0.0).all()) return ExtReal(0.0);
            return ExtReal::infinity();
        }
        case ConstraintSet::Kind::NonNegOrthantCone: {
            // sup over y >= 0 of -y'x: 0 when x lies in the cone, +inf otherwise.
            if ((x.array() >= 0.0).all()) return ExtReal(0.0);
            return ExtReal::infinity();
        }
        case ConstraintSet::Kind::Box: {
            // sum_i upper_i x_i^- - sum_i lower_i x_i^+, short-circuiting to
            // +inf when an infinite bound meets a nonzero component on its side.
            double s = 0.0;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                double xi = x(i);
                if (xi > 0.0) {
                    if (std::isinf(K.lower()(i))) return ExtReal::infinity();
                    s += -K.lower()(i) * xi;
                } else if (xi < 0.0) {
                    if (std::isinf(K.upper()(i))) return ExtReal::infinity();
                    s += K.upper()(i) * (-xi);
                }
            }
            return ExtReal(s);
        }
        case ConstraintSet::Kind::PolytopeHull: {
            // Linear objective over a hull attains its maximum at a vertex.
            return ExtReal((-(K.vertices().transpose() * x)).maxCoeff());
        }
    }
    throw std::logic_error("support_value: unhandled kind");
}

bool in_barrier_cone(const ConstraintSet& K, const VectorXd& x) {
    return support_value(K, x).is_finite();
}

namespace {

// Projection of w onto the probability simplex {w >= 0, sum w = 1}
// (Held-Wolfe-Crowder thresholding).
VectorXd project_simplex(const VectorXd& w) {
    const Eigen::Index n = w.size();
    std::vector<double> u(w.data(), w.data() + n);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, tau = 0.0;
    int k = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        css += u[i];
        double t = (css - 1.0) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0) {
            tau = t;
            k = static_cast<int>(i) + 1;
        }
    }
    (void)k;
    return (w.array() - tau).cwiseMax(0.0).matrix();
}

VectorXd project_hull(const MatrixXd& V, const VectorXd& y) {
    // min_w 0.5 |V w - y|^2 over the weight simplex, by projected gradient
    // with the Lipschitz step 1/|V'V|_2.
    const Eigen::Index n = V.cols();
    VectorXd w = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    MatrixXd G = V.transpose() * V;
    VectorXd b = V.transpose() * y;
    double L = G.operatorNorm();
    if (L <= 0.0) return V.col(0); // all vertices at the origin
    double step = 1.0 / L;
    for (int it = 0; it < 20000; ++it) {
        VectorXd g = G * w - b;
        VectorXd w_next = project_simplex(w - step * g);
        double delta = (w_next - w).norm();
        w = w_next;
        if (delta < 1e-13) break;
    }
    return V * w;
}

} // namespace

VectorXd project(const ConstraintSet& K, const VectorXd& y) {
    require_dim(y.size(), K.dim(), "project");
    switch (K.kind()) {
        case ConstraintSet::Kind::FullSpace:
            return y;
        case ConstraintSet::Kind::NonNegOrthantCone:
            return y.cwiseMax(0.0);
        case ConstraintSet::Kind::Box:
            return y.cwiseMax(K.lower()).cwiseMin(K.upper());
        case ConstraintSet::Kind::PolytopeHull:
            return project_hull(K.vertices(), y);
    }
    throw std::logic_error("project: unhandled kind");
}

double support_value_bruteforce(const ConstraintSet& K, const VectorXd& x, int grid_resolution,
                                std::optional<double> truncation_radius) {
    require_dim(x.size(), K.dim(), "support_value_bruteforce");
    if (grid_resolution < 2) throw std::invalid_argument("support_value_bruteforce: resolution must be >= 2");
    const int d = K.dim();

    // Per-axis sampling ranges for K ∩ [-R, R]^d.
    VectorXd lo(d), hi(d);
    switch (K.kind()) {
        case ConstraintSet::Kind::FullSpace: {
            if (!truncation_radius) throw std::invalid_argument("support_value_bruteforce: FullSpace needs a truncation radius");
            lo.setConstant(-*truncation_radius);
            hi.setConstant(*truncation_radius);
            break;
        }
        case ConstraintSet::Kind::NonNegOrthantCone: {
            if (!truncation_radius) throw std::invalid_argument("support_value_bruteforce: cone needs a truncation radius");
            lo.setZero();
            hi.setConstant(*truncation_radius);
            break;
        }
        case ConstraintSet::Kind::Box: {
            lo = K.lower();
            hi = K.upper();
            for (int i = 0; i < d; ++i) {
                if (std::isinf(lo(i)) || std::isinf(hi(i))) {
                    if (!truncation_radius) {
                        throw std::invalid_argument("support_value_bruteforce: unbounded box needs a truncation radius");
                    }
                    lo(i) = std::max(lo(i), -*truncation_radius);
                    hi(i) = std::min(hi(i), *truncation_radius);
                }
            }
            break;
        }
        case ConstraintSet::Kind::PolytopeHull: {
            // Vertices plus a grid of pairwise convex combinations; the vertex
            // sweep alone is already exact for the linear objective.
            const MatrixXd& V = K.vertices();
            double best = (-(V.transpose() * x)).maxCoeff();
            for (Eigen::Index a = 0; a < V.cols(); ++a) {
                for (Eigen::Index b2 = a + 1; b2 < V.cols(); ++b2) {
                    for (int k = 1; k < grid_resolution; ++k) {
                        double t = static_cast<double>(k) / grid_resolution;
                        VectorXd y = (1.0 - t) * V.col(a) + t * V.col(b2);
                        best = std::max(best, -y.dot(x));
                    }
                }
            }
            return best;
        }
    }

    if (d > 3) throw std::invalid_argument("support_value_bruteforce: tensor grid limited to d <= 3");
    std::vector<Eigen::Index> idx(d, 0);
    double best = -std::numeric_limits<double>::infinity();
    VectorXd y(d);
    while (true) {
        for (int i = 0; i < d; ++i) {
            double t = static_cast<double>(idx[i]) / (grid_resolution - 1);
            y(i) = lo(i) + t * (hi(i) - lo(i));
        }
        best = std::max(best, -y.dot(x));
        int axis = 0;
        while (axis < d && ++idx[axis] == grid_resolution) {
            idx[axis] = 0;
            ++axis;
        }
        if (axis == d) break;
    }
    return best;
}

} // namespace rfolio
