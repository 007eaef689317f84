#include "spawntrack/dynamics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

using namespace spawntrack;

namespace {

/// Determinant of sigma^2 G G^T + eps I in closed form: each axis block
/// [[a + eps, b], [b, c + eps]] has ac = b^2, so its determinant is eps (a + c) + eps^2.
double regularized_noise_det(double dt, double sigma, double eps) {
    const double q = sigma * sigma;
    const double a = q * std::pow(dt, 4) / 4.0, c = q * dt * dt;
    const double block = eps * (a + c) + eps * eps;
    return block * block;
}

double gauss2_oracle(const Vec2& y, const Vec2& mean, double var) {
    const double dx = y(0) - mean(0), dy = y(1) - mean(1);
    return std::log(1.0 / (2.0 * std::numbers::pi * var)) - (dx * dx + dy * dy) / (2.0 * var);
}

}  // namespace

TEST(Motion, TransitionMatrixAndNoise) {
    MotionModel m;
    m.dt = 2.0;
    m.sigma_s = 0.5;
    Mat4 a = Mat4::Identity();
    a(0, 2) = a(1, 3) = 2.0;
    EXPECT_EQ(m.transition(), a);
    const Mat4 s = m.noise_cov();
    EXPECT_DOUBLE_EQ(s(0, 0), 0.25 * 16.0 / 4.0);
    EXPECT_DOUBLE_EQ(s(0, 2), 0.25 * 8.0 / 2.0);
    EXPECT_DOUBLE_EQ(s(3, 3), 0.25 * 4.0);
    EXPECT_DOUBLE_EQ(s(0, 1), 0.0);
}

TEST(Motion, ZeroNoiseKinematics) {
    MotionModel m;
    const Mat4 a = m.transition();
    EXPECT_EQ(a * Vec4(0, 0, 1, 1), Vec4(1, 1, 1, 1));
    EXPECT_EQ(a * Vec4(5, -3, 0, 0), Vec4(5, -3, 0, 0));
}

TEST(Motion, InvalidModelsRejected) {
    MotionModel m;
    m.dt = 0.0;
    EXPECT_THROW(m.validate(), std::invalid_argument);
    m = MotionModel{};
    m.survival_prob = 1.5;
    EXPECT_THROW(m.validate(), std::invalid_argument);
}

TEST(Motion, SampleCovarianceMatchesNoise) {
    MotionModel m;
    Rng rng = make_rng(17);
    const int n = 100000;
    std::vector<Vec4> draws;
    draws.reserve(n);
    Vec4 mean = Vec4::Zero();
    for (int i = 0; i < n; ++i) {
        draws.push_back(transition_sample(Vec4::Zero(), m, rng));
        mean += draws.back();
    }
    mean /= n;
    const Mat4 target = m.noise_cov();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            double s = 0, s2 = 0;
            for (const auto& d : draws) {
                const double v = (d(r) - mean(r)) * (d(c) - mean(c));
                s += v;
                s2 += v * v;
            }
            const double est = s / n;
            const double se = std::sqrt(std::max(s2 / n - est * est, 1e-30) / n);
            EXPECT_NEAR(est, target(r, c), 5 * se + 1e-12) << r << "," << c;
        }
    EXPECT_NEAR(target(0, 0), 0.25, 1e-15);
}

TEST(Motion, LogpdfAtModeMatchesNormalizer) {
    MotionModel m;
    const Vec4 prev(1, 2, 3, 4);
    const double expected = -0.5 * std::log(std::pow(2.0 * std::numbers::pi, 4) * regularized_noise_det(m.dt, m.sigma_s, m.regularization));
    EXPECT_NEAR(transition_logpdf(m.transition() * prev, prev, m), expected, 1e-6);
}

TEST(Motion, LogpdfDecreasesAwayFromMode) {
    MotionModel m;
    const Vec4 prev(0, 0, 1, -1);
    const Vec4 dir = Vec4(0.3, -0.2, 0.5, 0.1).normalized();
    double last = transition_logpdf(m.transition() * prev, prev, m);
    for (int i = 1; i < 20; ++i) {
        const double v = transition_logpdf(m.transition() * prev + 0.1 * i * dir, prev, m);
        EXPECT_LT(v, last);
        last = v;
    }
}

TEST(Motion, LargerNoiseLowersModeDensity) {
    MotionModel m, wide;
    wide.sigma_s = 2.0;
    const Vec4 prev(0, 0, 1, 1);
    EXPECT_LT(transition_logpdf(wide.transition() * prev, prev, wide), transition_logpdf(m.transition() * prev, prev, m));
}

TEST(Motion, LogpdfGradientMatchesFiniteDifference) {
    MotionModel m;
    m.regularization = 1e-2;
    const Mat4 inv = m.density_cov().inverse();
    Rng rng = make_rng(23);
    for (int t = 0; t < 100; ++t) {
        Vec4 prev, next;
        for (int i = 0; i < 4; ++i) {
            prev(i) = 3.0 * standard_normal(rng);
            next(i) = 0.2 * standard_normal(rng);
        }
        next += m.transition() * prev;
        const Vec4 analytic = -inv * (next - m.transition() * prev);
        for (int i = 0; i < 4; ++i) {
            const double h = 1e-5;
            Vec4 up = next, dn = next;
            up(i) += h;
            dn(i) -= h;
            const double fd = (transition_logpdf(up, prev, m) - transition_logpdf(dn, prev, m)) / (2 * h);
            EXPECT_NEAR(fd, analytic(i), 1e-4 * std::max(1.0, std::abs(analytic(i))));
        }
    }
}

TEST(Motion, LogpdfIntegratesToOne) {
    // the density factorizes into identical (x, vx) and (y, vy) blocks
    MotionModel m;
    m.regularization = 1e-2;
    const Vec4 prev = Vec4::Zero();
    const double at_origin = std::exp(transition_logpdf(Vec4::Zero(), prev, m));
    const double h = 0.01;
    double mass = 0.0;
    for (double x = -3.0; x <= 3.0; x += h)
        for (double v = -5.0; v <= 5.0; v += h) mass += std::exp(transition_logpdf(Vec4(x, 0, v, 0), prev, m));
    mass *= h * h;
    EXPECT_NEAR(mass / std::sqrt(at_origin), 1.0, 1e-3);
}

TEST(Measurement, MeanOfProjectedPositions) {
    MeasurementModel mm;
    const std::vector<ObjectState> one = {Vec4(3, 4, 1, 2)};
    EXPECT_EQ(measurement_mean(one, mm), Vec2(3, 4));
    const std::vector<ObjectState> two = {Vec4(0, 0, 5, 5), Vec4(2, 2, -1, 0)};
    EXPECT_EQ(measurement_mean(two, mm), Vec2(1, 1));
    const std::vector<ObjectState> three = {Vec4(0, 0, 0, 0), Vec4(3, 0, 0, 0), Vec4(0, 3, 0, 0)};
    EXPECT_TRUE(measurement_mean(three, mm).isApprox(Vec2(1, 1), 1e-15));
    EXPECT_THROW(measurement_mean(std::vector<ObjectState>{}, mm), std::invalid_argument);
}

TEST(Measurement, LoglikAtModeAndSymmetry) {
    MeasurementModel mm;
    const std::vector<ObjectState> s = {Vec4(0, 0, 0, 0), Vec4(4, 2, 0, 0), Vec4(1, 7, 0, 0)};
    const Vec2 mode = measurement_mean(s, mm);
    EXPECT_NEAR(measurement_loglik(mode, s, mm), -std::log(2.0 * std::numbers::pi * 10.0), 1e-12);
    std::vector<ObjectState> perm = {s[2], s[0], s[1]};
    const Vec2 y(3, -1);
    EXPECT_NEAR(measurement_loglik(y, s, mm), measurement_loglik(y, perm, mm), 1e-12);
    EXPECT_THROW(measurement_loglik(y, std::vector<ObjectState>{}, mm), std::invalid_argument);
}

TEST(Measurement, SingletonMatchesPlainGaussian) {
    MeasurementModel mm;
    Rng rng = make_rng(4);
    for (int t = 0; t < 100; ++t) {
        const Vec4 x(10 * standard_normal(rng), 10 * standard_normal(rng), 0, 0);
        const Vec2 y(10 * standard_normal(rng), 10 * standard_normal(rng));
        const std::vector<ObjectState> s = {x};
        EXPECT_NEAR(measurement_loglik(y, s, mm), gauss2_oracle(y, x.head<2>(), 10.0), 1e-12);
    }
}

TEST(Niw, EmptyDataReturnsPrior) {
    NiwParams p;
    const NiwParams q = niw_posterior(p, std::vector<Vec4>{});
    EXPECT_EQ(q.mean, p.mean);
    EXPECT_EQ(q.kappa, p.kappa);
    EXPECT_EQ(q.dof, p.dof);
    EXPECT_EQ(q.scatter, p.scatter);
}

TEST(Niw, SingleDatumDominatesWeakPrior) {
    NiwParams p;
    p.kappa = 1e-3;
    p.mean = Vec4::Zero();
    Rng rng = make_rng(6);
    for (int t = 0; t < 50; ++t) {
        Vec4 d;
        for (int i = 0; i < 4; ++i) d(i) = 20.0 * uniform01(rng) - 10.0;
        const std::vector<Vec4> data = {d};
        const NiwParams q = niw_posterior(p, data);
        // closed form: (kappa * mu0 + d) / (kappa + 1)
        EXPECT_TRUE(q.mean.isApprox(d / (1.0 + 1e-3), 1e-12));
        EXPECT_LT((q.mean - d).cwiseAbs().maxCoeff(), 1e-2 + 1e-12);
        EXPECT_EQ(q.dof, p.dof + 1.0);
    }
}

TEST(Niw, OrderInvariantAndStreamEquivalent) {
    NiwParams p;
    Rng rng = make_rng(21);
    std::vector<Vec4> data;
    for (int i = 0; i < 9; ++i) data.emplace_back(standard_normal(rng), standard_normal(rng), 3 * standard_normal(rng), 1);
    const NiwParams all = niw_posterior(p, data);
    auto close = [](const NiwParams& a, const NiwParams& b) {
        EXPECT_NEAR(a.kappa, b.kappa, 1e-10);
        EXPECT_NEAR(a.dof, b.dof, 1e-10);
        EXPECT_LT((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT((a.scatter - b.scatter).cwiseAbs().maxCoeff(), 1e-10);
    };
    std::vector<Vec4> shuffled = data;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    close(all, niw_posterior(p, shuffled));
    const std::vector<Vec4> d1(data.begin(), data.begin() + 4), d2(data.begin() + 4, data.end());
    close(all, niw_posterior(niw_posterior(p, d1), d2));
}

TEST(Niw, PredictiveIsSymmetric) {
    NiwParams p;
    p.mean = Vec4(1, -2, 0.5, 3);
    p.scatter(0, 1) = p.scatter(1, 0) = 0.3;
    const Vec4 d(0.7, -1.1, 2.0, 0.4);
    EXPECT_NEAR(niw_posterior_predictive_logpdf(p, p.mean + d), niw_posterior_predictive_logpdf(p, p.mean - d), 1e-10);
}

TEST(Niw, PredictiveApproachesGaussianForLargeDof) {
    NiwParams p;
    p.dof = 1e6;
    p.kappa = 1.0;
    p.scatter = 1e6 * Mat4::Identity();
    const StudentT4 t = niw_predictive(p);
    const double gauss = gaussian_logpdf<4>(p.mean, p.mean, t.scale);
    EXPECT_NEAR(niw_posterior_predictive_logpdf(p, p.mean), gauss, 1e-3);
}

TEST(Niw, PredictiveSliceIntegratesToOne) {
    // conditional slice along x given the other coordinates at the centre:
    // integral of the joint divided by the 3-d t marginal density at its centre
    NiwParams p;
    p.kappa = 1.0;
    p.dof = 8.0;
    const StudentT4 t = niw_predictive(p);
    const double s = t.scale(0, 0);
    const double nu = t.dof;
    const double h = 1e-3;
    double mass = 0.0;
    for (double x = -300.0; x <= 300.0; x += h)
        mass += std::exp(niw_posterior_predictive_logpdf(p, p.mean + Vec4(x, 0, 0, 0)));
    mass *= h;
    const double marginal3 = std::exp(std::lgamma((nu + 3.0) / 2.0) - std::lgamma(nu / 2.0)) /
                             std::pow(nu * std::numbers::pi * s, 1.5);
    EXPECT_NEAR(mass / marginal3, 1.0, 1e-3);
}

TEST(Niw, ValidateRejectsBadParams) {
    NiwParams p;
    p.dof = 4.0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = NiwParams{};
    p.scatter(0, 0) = -1.0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
}
