#pragma once

#include "spawntrack/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace spawntrack {

/// Occupancy of the dependent Dirichlet process restaurant at time k.
///
/// `survived[j]` counts members of cluster j that survived from k-1 and
/// transitioned to k; `current[j]` counts assignments already made to cluster j
/// at time k. A cluster with both counts at zero is dead.
struct DdpCounts {
    std::vector<int> survived;
    std::vector<int> current;
    double alpha = 1.0;

    std::size_t num_clusters() const { return survived.size(); }

    void validate() const {
        if (survived.size() != current.size())
            throw std::invalid_argument("DdpCounts: survived and current differ in length");
        if (!(alpha > 0.0)) throw std::invalid_argument("DdpCounts: alpha must be positive");
        for (std::size_t j = 0; j < survived.size(); ++j)
            if (survived[j] < 0 || current[j] < 0)
                throw std::invalid_argument("DdpCounts: negative count at cluster " + std::to_string(j));
    }
};

/// Predictive assignment probabilities for the next object at time k.
///
/// Returns one entry per existing cluster followed by the new-cluster entry.
/// Clusters already chosen at k get (survived + current) / Z, survived clusters
/// not yet chosen get survived / Z, dead clusters get 0, and a new cluster gets
/// alpha / Z, with Z = alpha + sum(survived + current).
inline std::vector<double> ddp_assignment_probabilities(const DdpCounts& counts) {
    counts.validate();
    long long customers = 0;
    for (std::size_t j = 0; j < counts.num_clusters(); ++j) customers += counts.survived[j] + counts.current[j];
    const double total = counts.alpha + static_cast<double>(customers);

    std::vector<double> probs(counts.num_clusters() + 1, 0.0);
    for (std::size_t j = 0; j < counts.num_clusters(); ++j) {
        if (counts.current[j] > 0)
            probs[j] = (counts.survived[j] + counts.current[j]) / total;
        else if (counts.survived[j] > 0)
            probs[j] = counts.survived[j] / total;
    }
    probs.back() = counts.alpha / total;
    return probs;
}

/// Draws a cluster index; the value `counts.num_clusters()` means "new cluster".
inline std::size_t ddp_sample_assignment(const DdpCounts& counts, Rng& rng) {
    const auto probs = ddp_assignment_probabilities(counts);
    return sample_categorical(probs, rng);
}

/// Binary customer-by-dish matrix (rows = customers, columns = dishes).
using BinaryMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

/// Reorders columns into left-ordered form: columns compared as binary numbers
/// with row 0 most significant, sorted in descending order.
inline BinaryMatrix left_ordered_form(const BinaryMatrix& m) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m.cols()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            if (m(r, a) != m(r, b)) return m(r, a) > m(r, b);
        return false;
    });
    BinaryMatrix out(m.rows(), m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.col(c) = m.col(order[static_cast<std::size_t>(c)]);
    return out;
}

/// Draws a matrix from the Indian buffet process with rate gamma, in left-ordered form.
inline BinaryMatrix ibp_sample_matrix(double gamma, int num_rows, Rng& rng) {
    if (gamma < 0.0) throw std::invalid_argument("ibp_sample_matrix: negative gamma");
    if (num_rows < 0) throw std::invalid_argument("ibp_sample_matrix: negative num_rows");

    std::vector<std::vector<int>> columns;  // one entry vector per dish
    std::vector<int> counts;
    for (int j = 1; j <= num_rows; ++j) {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (uniform01(rng) < static_cast<double>(counts[i]) / j) {
                columns[i][static_cast<std::size_t>(j - 1)] = 1;
                ++counts[i];
            }
        }
        const int fresh = sample_poisson(gamma / j, rng);
        for (int n = 0; n < fresh; ++n) {
            std::vector<int> col(static_cast<std::size_t>(num_rows), 0);
            col[static_cast<std::size_t>(j - 1)] = 1;
            columns.push_back(std::move(col));
            counts.push_back(1);
        }
    }

    BinaryMatrix m(num_rows, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c)
        for (int r = 0; r < num_rows; ++r) m(r, static_cast<Eigen::Index>(c)) = columns[c][static_cast<std::size_t>(r)];
    return left_ordered_form(m);
}

/// Sufficient statistics of an IBP restaurant: per-dish popularity and rows seen.
struct IbpState {
    std::vector<int> column_counts;
    int num_rows = 0;
    double gamma = 1.0;

    /// Column counts of a binary matrix; empty columns are dropped.
    static IbpState from_matrix(const BinaryMatrix& m, double gamma) {
        IbpState s;
        s.num_rows = static_cast<int>(m.rows());
        s.gamma = gamma;
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const int n = m.col(c).sum();
            if (n > 0) s.column_counts.push_back(n);
        }
        return s;
    }

    bool valid() const {
        if (num_rows < 0 || gamma < 0.0) return false;
        return std::all_of(column_counts.begin(), column_counts.end(),
                           [&](int n) { return n >= 1 && n <= num_rows; });
    }
};

/// Prior probability that a row activates an existing dish: n_i / num_rows, where
/// the caller passes counts that already exclude the row being resampled.
inline double ibp_existing_column_prior(const IbpState& state, std::size_t column) {
    if (column >= state.column_counts.size())
        throw std::invalid_argument("ibp_existing_column_prior: column out of range");
    if (state.column_counts[column] <= 0)
        throw std::invalid_argument("ibp_existing_column_prior: empty column must be pruned");
    if (state.num_rows < 1) throw std::invalid_argument("ibp_existing_column_prior: no rows");
    return static_cast<double>(state.column_counts[column]) / state.num_rows;
}

/// Auxiliary-variable update of a Dirichlet-process concentration under a
/// Gamma(shape, rate) prior, given `num_clusters` clusters over `num_items` items.
inline double resample_alpha(int num_clusters, int num_items, double current_alpha, double prior_shape,
                             double prior_rate, Rng& rng) {
    if (!(prior_shape > 0.0) || !(prior_rate > 0.0))
        throw std::invalid_argument("resample_alpha: prior parameters must be positive");
    if (!(current_alpha > 0.0)) throw std::invalid_argument("resample_alpha: alpha must be positive");
    if (num_clusters < 0 || num_items < 0 || num_clusters > num_items)
        throw std::invalid_argument("resample_alpha: need 0 <= num_clusters <= num_items");
    if (num_items == 0) return sample_gamma(prior_shape, prior_rate, rng);

    const double eta = sample_beta(current_alpha + 1.0, num_items, rng);
    const double rate = prior_rate - std::log(eta);
    const double a = prior_shape + num_clusters - 1.0;
    // mixture weight odds: a / (n * rate)
    const double odds = a / (num_items * rate);
    const bool upper = uniform01(rng) < odds / (1.0 + odds);
    const double shape = upper ? prior_shape + num_clusters : std::max(a, 0.0);
    if (shape <= 0.0) return sample_gamma(prior_shape + num_clusters, rate, rng);
    return std::max(sample_gamma(shape, rate, rng), std::numeric_limits<double>::min());
}

/// Conjugate IBP rate update from a total new-dish count and the accumulated
/// harmonic exposure (sum of H_{M_k} over the restaurants observed).
inline double resample_gamma_from_exposure(int num_new_columns, double harmonic_exposure, double prior_shape,
                                           double prior_rate, Rng& rng) {
    if (!(prior_shape > 0.0) || !(prior_rate > 0.0))
        throw std::invalid_argument("resample_gamma: prior parameters must be positive");
    if (num_new_columns < 0 || harmonic_exposure < 0.0)
        throw std::invalid_argument("resample_gamma: negative statistics");
    const double g = sample_gamma(prior_shape + num_new_columns, prior_rate + harmonic_exposure, rng);
    return std::max(g, std::numeric_limits<double>::min());
}

/// Draw from Gamma(prior_shape + num_active_columns, prior_rate + H_{num_rows}).
inline double resample_gamma(int num_active_columns, int num_rows, double prior_shape, double prior_rate,
                             Rng& rng) {
    if (num_rows < 0) throw std::invalid_argument("resample_gamma: negative num_rows");
    return resample_gamma_from_exposure(num_active_columns, harmonic_number(num_rows), prior_shape, prior_rate,
                                        rng);
}

}  // namespace spawntrack
