#include "rfolio/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace rfolio {

HjbGrid HjbGrid::log_spaced(double z_min, double z_max, int nz, int nt, double T) {
    if (!(z_min > 0.0) || !(z_max > z_min)) throw std::invalid_argument("HjbGrid: need 0 < z_min < z_max");
    if (nz < 3 || nt < 1) throw std::invalid_argument("HjbGrid: need nz >= 3 and nt >= 1");
    if (!(T > 0.0)) throw std::invalid_argument("HjbGrid: horizon must be positive");
    HjbGrid g;
    g.nt = nt;
    g.T = T;
    g.z = VectorXd(nz);
    double x0 = std::log(z_min), x1 = std::log(z_max);
    for (int j = 0; j < nz; ++j) g.z(j) = std::exp(x0 + (x1 - x0) * j / (nz - 1));
    return g;
}

double fenchel_legendre_log(double beta, double y) {
    if (!(beta > 0.0)) throw std::invalid_argument("fenchel_legendre_log: beta must be positive");
    if (!(y > 0.0)) throw std::invalid_argument("fenchel_legendre_log: transform is infinite for y <= 0");
    return -((1.0 + beta) / beta) * std::pow(beta * y, 1.0 / (1.0 + beta));
}

VectorXd fenchel_legendre_transform(double beta, const VectorXd& y_grid) {
    VectorXd out(y_grid.size());
    for (Eigen::Index j = 0; j < y_grid.size(); ++j) out(j) = fenchel_legendre_log(beta, y_grid(j));
    return out;
}

double fenchel_legendre_gridsearch(double beta, double y, int n_grid, double z_lo, double z_hi) {
    if (!(y > 0.0)) throw std::invalid_argument("fenchel_legendre_gridsearch: y must be positive");
    double best = -std::numeric_limits<double>::infinity();
    double lx = std::log(z_lo), hx = std::log(z_hi);
    for (int i = 0; i < n_grid; ++i) {
        double z = std::exp(lx + (hx - lx) * i / (n_grid - 1));
        best = std::max(best, -std::pow(z, -1.0 / beta) - z * y);
    }
    return best;
}

namespace {

// Support penalty of the box [a_lo, a_hi]: a_hi a^- - a_lo a^+, with the
// convention that an infinite bound makes the matching side infeasible.
inline double box_penalty(double a, double a_lo, double a_hi) {
    if (a > 0.0) return std::isinf(a_lo) ? std::numeric_limits<double>::infinity() : -a_lo * a;
    if (a < 0.0) return std::isinf(a_hi) ? std::numeric_limits<double>::infinity() : a_hi * (-a);
    return 0.0;
}

struct ControlSearch {
    double a = 0.0;
    double diffusion = 0.0; // 1/2 z^2 ((b+a)/sigma)^2
    double penalty = 0.0;   // z * box penalty
};

// Maximize -1/2 z^2 ((b+a)/sigma)^2 kappa - z pen(a) over the truncated
// candidate set; kappa is the (frozen) curvature at the node.
ControlSearch best_control(double z, double kappa, const HjbProblem& p, const std::vector<double>& base_grid) {
    std::vector<double> cand(base_grid);
    cand.push_back(0.0);
    if (std::isfinite(p.a_lo)) cand.push_back(p.a_lo);
    if (std::isfinite(p.a_hi)) cand.push_back(p.a_hi);
    // Unpenalized maximizer and the per-branch quadratic vertices.
    double lo = std::isinf(p.a_hi) ? 0.0 : (std::isfinite(p.a_lo) ? p.a_lo - 2.0 * std::abs(p.b) : 0.0);
    double hi = std::isinf(p.a_lo) ? 0.0 : (std::isfinite(p.a_hi) ? p.a_hi + 2.0 * std::abs(p.b) : 0.0);
    cand.push_back(std::clamp(-p.b, lo, hi));
    if (kappa > 0.0) {
        double s2 = p.sigma * p.sigma;
        if (std::isfinite(p.a_lo)) cand.push_back(std::clamp(-p.b + s2 * p.a_lo / (z * kappa), std::max(lo, 0.0), hi));
        if (std::isfinite(p.a_hi)) cand.push_back(std::clamp(-p.b + s2 * p.a_hi / (z * kappa), lo, std::min(hi, 0.0)));
    }

    ControlSearch best;
    double best_q = -std::numeric_limits<double>::infinity();
    for (double a : cand) {
        double pen = box_penalty(a, p.a_lo, p.a_hi);
        if (std::isinf(pen)) continue;
        double phi = (p.b + a) / p.sigma;
        double diff = 0.5 * z * z * phi * phi;
        double q = -diff * kappa - z * pen;
        if (q > best_q) {
            best_q = q;
            best = {a, diff, z * pen};
        }
    }
    return best;
}

// Tridiagonal solve (Thomas); diagonals overwritten.
void thomas_solve(VectorXd& sub, VectorXd& diag, VectorXd& sup, VectorXd& rhs) {
    const Eigen::Index n = diag.size();
    for (Eigen::Index i = 1; i < n; ++i) {
        double w = sub(i) / diag(i - 1);
        diag(i) -= w * sup(i - 1);
        rhs(i) -= w * rhs(i - 1);
    }
    rhs(n - 1) /= diag(n - 1);
    for (Eigen::Index i = n - 2; i >= 0; --i) {
        rhs(i) = (rhs(i) - sup(i) * rhs(i + 1)) / diag(i);
    }
}

} // namespace

DualValueSurface solve_hjb(const HjbGrid& grid, const HjbProblem& prob, const HjbOptions& opts) {
    if (!(prob.sigma > 0.0) || !(prob.beta > 0.0)) throw std::invalid_argument("solve_hjb: need sigma > 0, beta > 0");
    if (prob.a_lo > 0.0 || prob.a_hi < 0.0) throw std::invalid_argument("solve_hjb: box bounds must satisfy a_lo <= 0 <= a_hi");
    const int nz = static_cast<int>(grid.z.size());
    const int nt = grid.nt;
    const double dt = grid.T / nt;

    DualValueSurface surf;
    surf.z = grid.z;
    surf.t = VectorXd::LinSpaced(nt + 1, 0.0, grid.T);
    surf.v = MatrixXd::Zero(nt + 1, nz);
    surf.a_star = MatrixXd::Zero(nt + 1, nz);
    surf.v.row(nt) = fenchel_legendre_transform(prob.beta, grid.z).transpose();

    // Truncated uniform control candidates shared by all nodes.
    std::vector<double> base_grid;
    {
        double lo = std::isinf(prob.a_hi) ? 0.0 : (std::isfinite(prob.a_lo) ? prob.a_lo - 2.0 * std::abs(prob.b) : 0.0);
        double hi = std::isinf(prob.a_lo) ? 0.0 : (std::isfinite(prob.a_hi) ? prob.a_hi + 2.0 * std::abs(prob.b) : 0.0);
        if (hi > lo) {
            for (int i = 0; i < opts.control_points; ++i) {
                base_grid.push_back(lo + (hi - lo) * i / (opts.control_points - 1));
            }
        }
    }

    VectorXd curvature(nz);
    auto slice_curvature = [&](const Eigen::RowVectorXd& v) {
        curvature.setZero(); // one-sided ends: v_zz -> 0 (log-linear tails)
        for (int j = 1; j + 1 < nz; ++j) {
            double hm = grid.z(j) - grid.z(j - 1);
            double hp = grid.z(j + 1) - grid.z(j);
            curvature(j) = 2.0 * (hp * v(j - 1) - (hm + hp) * v(j) + hm * v(j + 1)) / (hm * hp * (hm + hp));
        }
    };

    VectorXd sub(nz), diag(nz), sup(nz), rhs(nz);
    for (int n = nt - 1; n >= 0; --n) {
        const Eigen::RowVectorXd v_next = surf.v.row(n + 1);
        slice_curvature(v_next);

        sub.setZero();
        sup.setZero();
        diag.setOnes();
        rhs = v_next.transpose();
        double cfl_max = 0.0;

        for (int j = 0; j < nz; ++j) {
            ControlSearch ctl = best_control(grid.z(j), curvature(j), prob, base_grid);
            surf.a_star(n, j) = ctl.a;
            if (j == 0 || j == nz - 1) continue; // frozen curvature at the ends
            double hm = grid.z(j) - grid.z(j - 1);
            double hp = grid.z(j + 1) - grid.z(j);
            double wm = 2.0 * ctl.diffusion / (hm * (hm + hp));
            double wp = 2.0 * ctl.diffusion / (hp * (hm + hp));
            rhs(j) += dt * ctl.penalty;
            if (opts.explicit_scheme) {
                cfl_max = std::max(cfl_max, dt * (wm + wp));
                rhs(j) += dt * (wm * v_next(j - 1) - (wm + wp) * v_next(j) + wp * v_next(j + 1));
            } else {
                sub(j) = -dt * wm;
                sup(j) = -dt * wp;
                diag(j) = 1.0 + dt * (wm + wp);
            }
        }

        if (opts.explicit_scheme) {
            if (cfl_max > 1.0) {
                throw SolverError("solve_hjb: explicit scheme violates the CFL condition (max ratio " +
                                  std::to_string(cfl_max) + "); refine dt or use the implicit scheme");
            }
            surf.v.row(n) = rhs.transpose();
        } else {
            thomas_solve(sub, diag, sup, rhs);
            surf.v.row(n) = rhs.transpose();
        }

        slice_curvature(surf.v.row(n));
        double min_curv = nz > 2 ? curvature.segment(1, nz - 2).minCoeff() : 0.0;
        if (min_curv < -opts.convexity_tol) {
            ++surf.non_convex_slices;
            surf.worst_non_convexity = std::min(surf.worst_non_convexity, min_curv);
        }

        if (!surf.v.row(n).allFinite()) {
            throw SolverError("solve_hjb: non-finite value slice at time index " + std::to_string(n));
        }
    }
    return surf;
}

double hjb_zero_kernel_oracle(const HjbProblem& prob, double t, double z, double T, int quad_nodes) {
    double tau = T - t;
    if (tau < 0.0) throw std::invalid_argument("hjb_zero_kernel_oracle: t beyond horizon");
    double theta = prob.b / prob.sigma;
    if (tau == 0.0) return fenchel_legendre_log(prob.beta, z);
    return normal_expectation(
        [&](double g) {
            double y = z * std::exp(-theta * std::sqrt(tau) * g - 0.5 * theta * theta * tau);
            return fenchel_legendre_log(prob.beta, y);
        },
        quad_nodes);
}

std::vector<ConvergenceRow> hjb_convergence_study(const std::vector<RefinementLevel>& levels, double z_min,
                                                  double z_max, double T, const HjbProblem& prob,
                                                  const HjbOptions& opts) {
    if (levels.size() < 3) throw std::invalid_argument("hjb_convergence_study: need at least 3 refinement levels");

    std::vector<VectorXd> slices;
    std::vector<VectorXd> zs;
    for (const RefinementLevel& lv : levels) {
        HjbGrid g = HjbGrid::log_spaced(z_min, z_max, lv.nz, lv.nt, T);
        DualValueSurface s = solve_hjb(g, prob, opts);
        slices.push_back(s.v.row(0).transpose());
        zs.push_back(g.z);
    }

    auto interp_log = [](const VectorXd& z, const VectorXd& v, double zq) {
        double xq = std::log(zq);
        int j = 0;
        while (j + 2 < z.size() && std::log(z(j + 1)) < xq) ++j;
        double x0 = std::log(z(j)), x1 = std::log(z(j + 1));
        double w = (xq - x0) / (x1 - x0);
        return (1.0 - w) * v(j) + w * v(j + 1);
    };

    std::vector<ConvergenceRow> table;
    for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
        ConvergenceRow row;
        row.coarse = levels[k];
        row.fine = levels[k + 1];
        double sup = 0.0;
        // interior coarse nodes only; the frozen boundary rows are excluded
        for (Eigen::Index j = 1; j + 1 < zs[k].size(); ++j) {
            double fine_val = interp_log(zs[k + 1], slices[k + 1], zs[k](j));
            sup = std::max(sup, std::abs(slices[k](j) - fine_val));
        }
        row.sup_diff = sup;
        if (!table.empty() && sup > 0.0 && table.back().sup_diff > 0.0) {
            double hr = static_cast<double>(levels[k + 1].nt) / levels[k].nt;
            row.order = std::log(table.back().sup_diff / sup) / std::log(hr);
        }
        table.push_back(row);
    }
    return table;
}

} // namespace rfolio
