#pragma once

#include "spawntrack/assignment.hpp"
#include "spawntrack/dynamics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <span>
#include <stdexcept>
#include <vector>

namespace spawntrack {

struct OspaParams {
    double order = 1.0;
    double cutoff = 100.0;

    void validate() const {
        if (!(order >= 1.0)) throw std::invalid_argument("OspaParams: order must be >= 1");
        if (!(cutoff > 0.0)) throw std::invalid_argument("OspaParams: cutoff must be positive");
    }
};

/// OSPA distance with its localization and cardinality components. For p = 1
/// total = loc + card; in general total^p = loc^p + card^p.
struct OspaResult {
    double total = 0.0;
    double loc = 0.0;
    double card = 0.0;
};

/// OSPA distance between two finite sets of positions, with an exact optimal
/// assignment of the smaller set into the larger one.
inline OspaResult ospa(std::span<const Vec2> x, std::span<const Vec2> y, const OspaParams& params = {}) {
    params.validate();
    if (x.size() > y.size()) std::swap(x, y);
    const std::size_t m = x.size();
    const std::size_t n = y.size();
    if (n == 0) return {};

    const double p = params.order;
    const double cp = std::pow(params.cutoff, p);
    double matched = 0.0;
    if (m > 0) {
        Eigen::MatrixXd cost(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    std::pow(std::min((x[i] - y[j]).norm(), params.cutoff), p);
        matched = solve_assignment(cost).cost;
    }
    const double unmatched = cp * static_cast<double>(n - m);
    const double nn = static_cast<double>(n);
    OspaResult r;
    r.total = std::pow((matched + unmatched) / nn, 1.0 / p);
    r.loc = std::pow(matched / nn, 1.0 / p);
    r.card = std::pow(unmatched / nn, 1.0 / p);
    return r;
}

struct CardinalityError {
    std::vector<int> signed_errors;
    double mean_abs = 0.0;
};

/// Per-step estimated-minus-true cardinality and its mean absolute value.
inline CardinalityError cardinality_error(std::span<const int> true_counts, std::span<const int> est_counts) {
    if (true_counts.size() != est_counts.size())
        throw std::invalid_argument("cardinality_error: sequences differ in length");
    CardinalityError e;
    e.signed_errors.reserve(true_counts.size());
    double total = 0.0;
    for (std::size_t k = 0; k < true_counts.size(); ++k) {
        const int d = est_counts[k] - true_counts[k];
        e.signed_errors.push_back(d);
        total += std::abs(d);
    }
    if (!true_counts.empty()) e.mean_abs = total / static_cast<double>(true_counts.size());
    return e;
}

}  // namespace spawntrack
