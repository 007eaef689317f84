#pragma once

/// Independent reference computations used by the unit and acceptance tests.

#include "spawntrack/inference.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

namespace spawntrack::oracle {

/// OSPA by enumerating every injective assignment of the smaller set.
inline double ospa_brute(std::vector<Vec2> x, std::vector<Vec2> y, double p, double c) {
    if (x.size() > y.size()) std::swap(x, y);
    const std::size_t m = x.size(), n = y.size();
    if (n == 0) return 0.0;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    // every permutation of y; the first m entries are the assignment
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double dx = x[i](0) - y[idx[i]](0), dy = x[i](1) - y[idx[i]](1);
            s += std::pow(std::min(std::sqrt(dx * dx + dy * dy), c), p);
        }
        best = std::min(best, s);
    } while (std::next_permutation(idx.begin(), idx.end()));
    return std::pow((best + std::pow(c, p) * static_cast<double>(n - m)) / static_cast<double>(n), 1.0 / p);
}

inline double log_gauss(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
    const Eigen::VectorXd d = x - mean;
    const double k = static_cast<double>(x.size());
    return -0.5 * (k * std::log(2.0 * std::numbers::pi) + std::log(cov.determinant()) + d.dot(cov.inverse() * d));
}

/// Canonical key of a frozen scene configuration: per survivor "-" (dead) or its
/// row pattern, then the sorted row patterns of the newborns.
inline std::string scene_key(const std::vector<int>& survivor_patterns, std::vector<int> newborn_patterns) {
    std::string key;
    for (int p : survivor_patterns) key += (p < 0 ? std::string("-") : std::to_string(p)) + ",";
    std::sort(newborn_patterns.begin(), newborn_patterns.end());
    key += "|";
    for (int p : newborn_patterns) key += std::to_string(p) + ",";
    return key;
}

inline std::string scene_key(const ChainState& chain) {
    std::vector<int> surv, born;
    std::vector<const Track*> survivors;
    for (const auto& t : chain.tracks.tracks())
        if (t.survived_from_prev) survivors.push_back(&t);
    std::sort(survivors.begin(), survivors.end(), [](const Track* a, const Track* b) { return a->label < b->label; });
    auto pattern = [&](Label l) {
        const auto c = chain.alloc.find(l);
        int p = 0;
        for (std::size_t r = 0; r < chain.alloc.rows(); ++r) p |= (c && chain.alloc.get(r, *c)) ? (1 << r) : 0;
        return p;
    };
    for (const Track* t : survivors) surv.push_back(t->alive ? pattern(t->label) : -1);
    for (const auto& t : chain.tracks.tracks())
        if (!t.survived_from_prev && t.alive) born.push_back(pattern(t.label));
    return scene_key(surv, born);
}

/// Posterior over configurations of a one-step scene with fixed survivor
/// states, written from the generative model:
///   survivor dead: 1 - P_s; alive: P_s N(x; predicted) times the detection
///   prior of its column (1 - P_d if empty, else P_d w(m) / H_M);
///   newborns: independent Poisson counts per row pattern h with mean
///   gamma w(h), states from the birth density, integrated out analytically;
///   measurements: Gaussian around the mean position of their origins.
/// Newborn multisets of up to `max_newborns` objects are enumerated.
struct SceneOracle {
    std::vector<Track> survivors;
    std::vector<Vec2> ys;
    SamplerConfig config;
    double gamma = 1.0;
    int max_newborns = 3;

    std::map<std::string, double> posterior() const {
        const int M = static_cast<int>(ys.size());
        const int S = static_cast<int>(survivors.size());
        const int patterns = 1 << M;
        const double pd = config.detection_prob;
        const double ps = config.motion.survival_prob;
        const double var = config.meas.sigma_o_sq;
        const BirthModel birth = config.birth_model();
        auto lfact = [](int n) { return std::lgamma(n + 1.0); };
        double harm = 0.0;
        for (int i = 1; i <= M; ++i) harm += 1.0 / i;
        auto log_w = [&](int m) { return lfact(m - 1) + lfact(M - m) - lfact(M); };
        auto popcount = [](int p) {
            int c = 0;
            for (; p; p >>= 1) c += p & 1;
            return c;
        };

        std::map<std::string, double> logw;
        std::vector<int> surv(static_cast<std::size_t>(S), -1);
        std::vector<int> born;

        std::function<void(int)> newborns;
        auto evaluate = [&] {
            // coverage
            for (int r = 0; r < M; ++r) {
                bool covered = false;
                for (int s = 0; s < S; ++s) covered |= surv[static_cast<std::size_t>(s)] >= 0 && (surv[static_cast<std::size_t>(s)] >> r & 1);
                for (int p : born) covered |= (p >> r & 1) != 0;
                if (!covered) return;
            }
            double lw = 0.0;
            for (int s = 0; s < S; ++s) {
                const int p = surv[static_cast<std::size_t>(s)];
                const Track& t = survivors[static_cast<std::size_t>(s)];
                if (p < 0) {
                    lw += std::log(1.0 - ps);
                    continue;
                }
                lw += std::log(ps) + log_gauss(t.state, t.predicted_mean(config.motion), t.predicted_cov(config.motion));
                const int m = popcount(p);
                lw += m == 0 ? std::log(1.0 - pd) : std::log(pd) + log_w(m) - std::log(harm);
            }
            std::map<int, int> multiplicity;
            for (int p : born) {
                lw += std::log(gamma) + log_w(popcount(p));
                ++multiplicity[p];
            }
            for (const auto& [p, k] : multiplicity) lw -= lfact(k);
            lw -= gamma * harm;

            // measurements: y_r = (S_r + sum of newborn positions in r) / n_r + noise,
            // newborn positions ~ N(mu_b, v_b I), integrated per axis
            const int J = static_cast<int>(born.size());
            Eigen::MatrixXd h = Eigen::MatrixXd::Zero(M, std::max(J, 1));
            std::vector<Vec2> sums(static_cast<std::size_t>(M), Vec2::Zero());
            std::vector<int> counts(static_cast<std::size_t>(M), 0);
            for (int r = 0; r < M; ++r) {
                for (int s = 0; s < S; ++s)
                    if (surv[static_cast<std::size_t>(s)] >= 0 && (surv[static_cast<std::size_t>(s)] >> r & 1)) {
                        sums[static_cast<std::size_t>(r)] += survivors[static_cast<std::size_t>(s)].state.head<2>();
                        ++counts[static_cast<std::size_t>(r)];
                    }
                for (int j = 0; j < J; ++j)
                    if (born[static_cast<std::size_t>(j)] >> r & 1) ++counts[static_cast<std::size_t>(r)];
                for (int j = 0; j < J; ++j)
                    if (born[static_cast<std::size_t>(j)] >> r & 1) h(r, j) = 1.0 / counts[static_cast<std::size_t>(r)];
            }
            const Eigen::MatrixXd cov = var * Eigen::MatrixXd::Identity(M, M) + birth.position_var * h * h.transpose();
            for (int axis = 0; axis < 2; ++axis) {
                Eigen::VectorXd y(M), mean(M);
                for (int r = 0; r < M; ++r) {
                    y(r) = ys[static_cast<std::size_t>(r)](axis);
                    int k = 0;
                    for (int j = 0; j < J; ++j) k += born[static_cast<std::size_t>(j)] >> r & 1;
                    mean(r) = (sums[static_cast<std::size_t>(r)](axis) + k * birth.position_mean(axis)) /
                              counts[static_cast<std::size_t>(r)];
                }
                lw += log_gauss(y, mean, cov);
            }
            logw[scene_key(surv, born)] = lw;
        };
        newborns = [&](int min_pattern) {
            evaluate();
            if (static_cast<int>(born.size()) == max_newborns) return;
            for (int p = min_pattern; p < patterns; ++p) {
                born.push_back(p);
                newborns(p);
                born.pop_back();
            }
        };
        std::function<void(int)> survivors_loop = [&](int s) {
            if (s == S) {
                newborns(1);
                return;
            }
            for (int p = -1; p < patterns; ++p) {
                surv[static_cast<std::size_t>(s)] = p;
                survivors_loop(s + 1);
            }
        };
        survivors_loop(0);

        double mx = -std::numeric_limits<double>::infinity();
        for (const auto& [k, v] : logw) mx = std::max(mx, v);
        std::map<std::string, double> out;
        double z = 0.0;
        for (const auto& [k, v] : logw) z += std::exp(v - mx);
        for (const auto& [k, v] : logw) out[k] = std::exp(v - mx) / z;
        return out;
    }
};

inline double total_variation(const std::map<std::string, double>& p, const std::map<std::string, double>& q) {
    std::map<std::string, int> keys;
    for (const auto& [k, v] : p) keys[k] = 0;
    for (const auto& [k, v] : q) keys[k] = 0;
    double tv = 0.0;
    for (const auto& [k, v] : keys) {
        const double a = p.count(k) ? p.at(k) : 0.0;
        const double b = q.count(k) ? q.at(k) : 0.0;
        tv += std::abs(a - b);
    }
    return 0.5 * tv;
}

/// Moments of a 4-d posterior from a dense grid of its unnormalized log density.
struct GridMoments {
    Vec4 mean = Vec4::Zero();
    Vec4 var = Vec4::Zero();
};

inline GridMoments grid_moments(const std::function<double(const Vec4&)>& logdens, const Vec4& center,
                                const Vec4& half_width, int points) {
    std::vector<double> axis(static_cast<std::size_t>(points));
    const double step = 2.0 / (points - 1);
    for (int i = 0; i < points; ++i) axis[static_cast<std::size_t>(i)] = -1.0 + step * i;
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> lv;
    lv.reserve(static_cast<std::size_t>(points) * points * points * points);
    std::vector<Vec4> xs;
    xs.reserve(lv.capacity());
    for (double a : axis)
        for (double b : axis)
            for (double c : axis)
                for (double d : axis) {
                    const Vec4 x = center + half_width.cwiseProduct(Vec4(a, b, c, d));
                    xs.push_back(x);
                    lv.push_back(logdens(x));
                    mx = std::max(mx, lv.back());
                }
    double z = 0.0;
    Vec4 s1 = Vec4::Zero(), s2 = Vec4::Zero();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double w = std::exp(lv[i] - mx);
        z += w;
        s1 += w * xs[i];
        s2 += w * xs[i].cwiseProduct(xs[i]);
    }
    GridMoments g;
    g.mean = s1 / z;
    g.var = s2 / z - g.mean.cwiseProduct(g.mean);
    return g;
}

}  // namespace spawntrack::oracle
