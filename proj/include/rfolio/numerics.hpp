#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rfolio {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Error in a scenario/config file. The CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure inside a solver (non-convergence, singular system, ...).
/// The CLI maps it to exit code 3.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
    if (got != want) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch, got " +
                                    std::to_string(got) + ", expected " + std::to_string(want));
    }
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Normal sampler with a stream per (seed, path index) pair, so enlarging the
/// path count never reshuffles draws of earlier paths. Uniforms come from
/// mt19937_64 bit patterns (not std distributions), which keeps the stream
/// identical across standard libraries.
class PathNormalSampler {
public:
    PathNormalSampler(std::uint64_t seed, std::uint64_t path_index) {
        std::uint64_t s = seed ^ (0xD1B54A32D192ED03ULL * (path_index + 1));
        engine_.seed(detail::splitmix64(s));
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // Box-Muller on uniforms in (0,1].
        double u1 = uniform_pos();
        double u2 = uniform_pos();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    double uniform_pos() {
        // 53-bit mantissa in (0,1]; never returns 0 so log() is safe.
        return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Pairwise (cascade) summation: deterministic result independent of any
/// chunking of the input, used for all Monte Carlo sample means.
inline double pairwise_sum(const double* x, Eigen::Index n) {
    if (n <= 8) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) s += x[i];
        return s;
    }
    Eigen::Index h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline double pairwise_mean(const VectorXd& x) {
    if (x.size() == 0) throw std::invalid_argument("pairwise_mean: empty sample");
    return pairwise_sum(x.data(), x.size()) / static_cast<double>(x.size());
}

struct SampleStats {
    double mean = 0.0;
    double sd = 0.0;
    double se = 0.0; ///< standard error of the mean
    Eigen::Index n = 0;
};

inline SampleStats sample_stats(const VectorXd& x) {
    SampleStats s;
    s.n = x.size();
    s.mean = pairwise_mean(x);
    if (s.n > 1) {
        VectorXd d = (x.array() - s.mean).square().matrix();
        s.sd = std::sqrt(pairwise_sum(d.data(), d.size()) / static_cast<double>(s.n - 1));
        s.se = s.sd / std::sqrt(static_cast<double>(s.n));
    }
    return s;
}

/// Mean of exp(a_i) computed with a max shift: returns (shift, mean of exp(a-shift)).
/// mean(exp(a)) = exp(shift) * shifted_mean, robust for large |a|.
struct ShiftedExpMean {
    double shift = 0.0;
    double mean = 0.0; ///< mean of exp(a - shift), in (0, 1]
};

inline ShiftedExpMean shifted_exp_mean(const VectorXd& a) {
    ShiftedExpMean r;
    r.shift = a.maxCoeff();
    VectorXd w = (a.array() - r.shift).exp().matrix();
    r.mean = pairwise_mean(w);
    return r;
}

/// Gauss-Hermite nodes/weights for integrals against exp(-x^2), computed by
/// the Golub-Welsch eigendecomposition of the Jacobi matrix.
struct GaussHermite {
    VectorXd nodes;
    VectorXd weights;
};

inline GaussHermite gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: need n >= 1");
    MatrixXd J = MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        double off = std::sqrt(i / 2.0);
        J(i, i - 1) = off;
        J(i - 1, i) = off;
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(J);
    GaussHermite gh;
    gh.nodes = es.eigenvalues();
    gh.weights = VectorXd(n);
    double mu0 = std::sqrt(M_PI);
    for (int i = 0; i < n; ++i) {
        double v = es.eigenvectors()(0, i);
        gh.weights(i) = mu0 * v * v;
    }
    return gh;
}

/// E[f(G)] for standard normal G, by Gauss-Hermite quadrature.
template <typename F>
double normal_expectation(const F& f, int n_nodes = 64) {
    GaussHermite gh = gauss_hermite(n_nodes);
    double s = 0.0;
    for (int i = 0; i < gh.nodes.size(); ++i) {
        s += gh.weights(i) * f(std::sqrt(2.0) * gh.nodes(i));
    }
    return s / std::sqrt(M_PI);
}

} // namespace rfolio
