#pragma once

#include "spawntrack/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace spawntrack {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;
using Mat24 = Eigen::Matrix<double, 2, 4>;

/// Kinematic state [x, y, vx, vy] in meters and meters per second.
using ObjectState = Vec4;

inline Vec2 position_of(const ObjectState& s) { return s.head<2>(); }
inline Vec2 velocity_of(const ObjectState& s) { return s.tail<2>(); }

inline void check_finite(const ObjectState& s) {
    if (!s.allFinite()) throw std::invalid_argument("ObjectState: non-finite component");
}

/// Log density of N(x; mean, cov) for a symmetric positive-definite covariance.
template <int D>
double gaussian_logpdf(const Eigen::Matrix<double, D, 1>& x, const Eigen::Matrix<double, D, 1>& mean,
                       const Eigen::Matrix<double, D, D>& cov) {
    const Eigen::LLT<Eigen::Matrix<double, D, D>> llt(cov);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("gaussian_logpdf: covariance not positive definite");
    const Eigen::Matrix<double, D, 1> z = llt.matrixL().solve(x - mean);
    const auto& l = llt.matrixL();
    double logdet = 0.0;
    for (int i = 0; i < x.size(); ++i) logdet += 2.0 * std::log(l(i, i));
    return -0.5 * (x.size() * std::log(2.0 * std::numbers::pi) + logdet + z.squaredNorm());
}

/// Nearly-constant-velocity motion with piecewise-constant acceleration noise.
///
/// The noise covariance sigma_s^2 [[dt^4/4 I, dt^3/2 I], [dt^3/2 I, dt^2 I]] has
/// rank 2. Densities use it plus `regularization` * I; sampling uses it exactly.
struct MotionModel {
    double dt = 1.0;
    double sigma_s = 1.0;
    double survival_prob = 0.99;
    double regularization = 1e-6;

    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("MotionModel: dt must be positive");
        if (!(sigma_s > 0.0)) throw std::invalid_argument("MotionModel: sigma_s must be positive");
        if (!(survival_prob >= 0.0 && survival_prob <= 1.0))
            throw std::invalid_argument("MotionModel: survival_prob outside [0, 1]");
        if (!(regularization >= 0.0)) throw std::invalid_argument("MotionModel: negative regularization");
    }

    Mat4 transition() const {
        Mat4 a = Mat4::Identity();
        a(0, 2) = dt;
        a(1, 3) = dt;
        return a;
    }

    /// Exact (singular) process-noise covariance.
    Mat4 noise_cov() const {
        const double q = sigma_s * sigma_s;
        const double d2 = dt * dt, d3 = d2 * dt, d4 = d3 * dt;
        Mat4 s = Mat4::Zero();
        for (int axis = 0; axis < 2; ++axis) {
            s(axis, axis) = q * d4 / 4.0;
            s(axis, axis + 2) = s(axis + 2, axis) = q * d3 / 2.0;
            s(axis + 2, axis + 2) = q * d2;
        }
        return s;
    }

    /// Noise covariance used wherever a density is evaluated.
    Mat4 density_cov() const { return noise_cov() + regularization * Mat4::Identity(); }
};

/// Linear-Gaussian position sensor, y = B x + eta with eta ~ N(0, sigma_o^2 I).
struct MeasurementModel {
    double sigma_o_sq = 10.0;

    void validate() const {
        if (!(sigma_o_sq > 0.0)) throw std::invalid_argument("MeasurementModel: sigma_o_sq must be positive");
    }

    static Mat24 projection() {
        Mat24 b = Mat24::Zero();
        b(0, 0) = 1.0;
        b(1, 1) = 1.0;
        return b;
    }

    Mat2 noise_cov() const { return sigma_o_sq * Mat2::Identity(); }
};

/// Normal-inverse-Wishart hyperparameters over a 4-dimensional Gaussian.
struct NiwParams {
    Vec4 mean = Vec4::Constant(0.001);
    double kappa = 1e-3;
    double dof = 50.0;
    Mat4 scatter = Mat4::Identity();

    void validate() const {
        if (!(kappa > 0.0)) throw std::invalid_argument("NiwParams: kappa must be positive");
        if (!(dof > 5.0)) throw std::invalid_argument("NiwParams: dof must exceed dimension + 1");
        if (!scatter.isApprox(scatter.transpose(), 1e-12))
            throw std::invalid_argument("NiwParams: scatter not symmetric");
        if (Eigen::LLT<Mat4>(scatter).info() != Eigen::Success)
            throw std::invalid_argument("NiwParams: scatter not positive definite");
    }
};

inline ObjectState transition_sample(const ObjectState& state, const MotionModel& model, Rng& rng) {
    const double q = model.sigma_s;
    const double dt = model.dt;
    const Vec4 mean = model.transition() * state;
    // noise = G a with a ~ N(0, sigma_s^2 I2), G = [dt^2/2 I; dt I]
    const double ax = q * standard_normal(rng);
    const double ay = q * standard_normal(rng);
    Vec4 noise;
    noise << 0.5 * dt * dt * ax, 0.5 * dt * dt * ay, dt * ax, dt * ay;
    return mean + noise;
}

inline double transition_logpdf(const ObjectState& next, const ObjectState& prev, const MotionModel& model) {
    return gaussian_logpdf<4>(next, model.transition() * prev, model.density_cov());
}

/// Mean of the projected positions of every object a measurement originates from.
inline Vec2 measurement_mean(std::span<const ObjectState> states, const MeasurementModel& model) {
    if (states.empty()) throw std::invalid_argument("measurement_mean: no associated objects");
    Vec2 sum = Vec2::Zero();
    const Mat24 b = model.projection();
    for (const auto& s : states) sum += b * s;
    return sum / static_cast<double>(states.size());
}

inline double measurement_loglik(const Vec2& y, std::span<const ObjectState> states, const MeasurementModel& model) {
    const Vec2 r = y - measurement_mean(states, model);
    return -std::log(2.0 * std::numbers::pi * model.sigma_o_sq) - 0.5 * r.squaredNorm() / model.sigma_o_sq;
}

/// Conjugate NIW update with the data's count, mean and scatter.
inline NiwParams niw_posterior(const NiwParams& prior, std::span<const Vec4> data) {
    if (data.empty()) return prior;
    const double n = static_cast<double>(data.size());
    Vec4 mean = Vec4::Zero();
    for (const auto& d : data) mean += d;
    mean /= n;
    Mat4 scatter = Mat4::Zero();
    for (const auto& d : data) scatter += (d - mean) * (d - mean).transpose();

    NiwParams post;
    post.kappa = prior.kappa + n;
    post.dof = prior.dof + n;
    post.mean = (prior.kappa * prior.mean + n * mean) / post.kappa;
    const Vec4 diff = mean - prior.mean;
    post.scatter = prior.scatter + scatter + (prior.kappa * n / post.kappa) * diff * diff.transpose();
    post.scatter = 0.5 * (post.scatter + post.scatter.transpose());
    return post;
}

/// Multivariate Student-t predictive of an NIW: location, scale matrix and dof.
struct StudentT4 {
    Vec4 location;
    Mat4 scale;
    double dof;

    Mat4 covariance() const { return scale * (dof / (dof - 2.0)); }
};

inline StudentT4 niw_predictive(const NiwParams& params) {
    const double d = 4.0;
    const double dof = params.dof - d + 1.0;
    return {params.mean, params.scatter * ((params.kappa + 1.0) / (params.kappa * dof)), dof};
}

inline double niw_posterior_predictive_logpdf(const NiwParams& params, const Vec4& x) {
    const StudentT4 t = niw_predictive(params);
    const Eigen::LLT<Mat4> llt(t.scale);
    const Vec4 z = llt.matrixL().solve(x - t.location);
    double logdet = 0.0;
    for (int i = 0; i < 4; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    const double d = 4.0;
    return std::lgamma(0.5 * (t.dof + d)) - std::lgamma(0.5 * t.dof) - 0.5 * d * std::log(t.dof * std::numbers::pi) -
           0.5 * logdet - 0.5 * (t.dof + d) * std::log1p(z.squaredNorm() / t.dof);
}

}  // namespace spawntrack
