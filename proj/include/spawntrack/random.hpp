#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace spawntrack {

/// Pseudo-random stream used by every sampler. Each chain or simulation owns one.
using Rng = std::mt19937_64;

/// Seeds an Rng from a base seed and a stream index so that independent runs
/// (Monte-Carlo replicates, simulator vs. tracker) never share a stream.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double standard_normal(Rng& rng) {
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

/// Gamma draw parameterized by shape and rate (mean shape / rate).
inline double sample_gamma(double shape, double rate, Rng& rng) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

inline double sample_beta(double a, double b, Rng& rng) {
    const double x = sample_gamma(a, 1.0, rng);
    const double y = sample_gamma(b, 1.0, rng);
    return x / (x + y);
}

/// Poisson draw that accepts a zero mean (std::poisson_distribution does not).
inline int sample_poisson(double mean, Rng& rng) {
    if (mean < 0.0) throw std::invalid_argument("sample_poisson: negative mean");
    if (mean == 0.0) return 0;
    return std::poisson_distribution<int>(mean)(rng);
}

inline double poisson_logpmf(int k, double mean) {
    if (mean == 0.0) return k == 0 ? 0.0 : -INFINITY;
    return k * std::log(mean) - mean - std::lgamma(k + 1.0);
}

/// Draws an index with probability proportional to weights (must not all be zero).
inline std::size_t sample_categorical(std::span<const double> weights, Rng& rng) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw std::invalid_argument("sample_categorical: no positive weight");
    double u = uniform01(rng) * total;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        last_positive = i;
        if (u < weights[i]) return i;
        u -= weights[i];
    }
    return last_positive;
}

/// H_n = 1 + 1/2 + ... + 1/n, with H_0 = 0.
inline double harmonic_number(int n) {
    double h = 0.0;
    for (int j = 1; j <= n; ++j) h += 1.0 / j;
    return h;
}

/// Sample from N(mean, cov). The covariance may be positive semi-definite.
template <int D>
Eigen::Matrix<double, D, 1> sample_gaussian(const Eigen::Matrix<double, D, 1>& mean,
                                            const Eigen::Matrix<double, D, D>& cov, Rng& rng) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, D, D>> eig(cov);
    Eigen::Matrix<double, D, 1> z;
    for (int i = 0; i < mean.size(); ++i) z(i) = standard_normal(rng);
    const auto sqrt_vals = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return mean + eig.eigenvectors() * sqrt_vals.asDiagonal() * z;
}

}  // namespace spawntrack
