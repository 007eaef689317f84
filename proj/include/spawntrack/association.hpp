#pragma once

#include "spawntrack/dynamics.hpp"
#include "spawntrack/random.hpp"
#include "spawntrack/tracks.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spawntrack {

/// Binary measurement-to-object matrix at one time step.
///
/// Rows are measurements, columns are live object labels. Stored column-major
/// because the sampler adds and removes objects far more often than rows.
class AllocationMatrix {
public:
    AllocationMatrix() = default;
    explicit AllocationMatrix(std::size_t rows) : rows_(rows) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return columns_.size(); }

    Label label(std::size_t col) const { return columns_.at(col).label; }

    std::optional<std::size_t> find(Label label) const {
        for (std::size_t c = 0; c < columns_.size(); ++c)
            if (columns_[c].label == label) return c;
        return std::nullopt;
    }

    bool get(std::size_t row, std::size_t col) const { return columns_.at(col).entries.at(row) != 0; }

    void set(std::size_t row, std::size_t col, bool value) {
        auto& column = columns_.at(col);
        auto& e = column.entries.at(row);
        if ((e != 0) == value) return;
        e = value ? 1 : 0;
        column.count += value ? 1 : -1;
    }

    std::size_t add_column(Label label) {
        if (find(label)) throw std::invalid_argument("AllocationMatrix: duplicate column label " + std::to_string(label));
        columns_.push_back(Column{label, std::vector<unsigned char>(rows_, 0), 0});
        return columns_.size() - 1;
    }

    void remove_column(std::size_t col) { columns_.erase(columns_.begin() + static_cast<std::ptrdiff_t>(col)); }

    int column_count(std::size_t col) const { return columns_.at(col).count; }

    int row_count(std::size_t row) const {
        int n = 0;
        for (const auto& c : columns_) n += c.entries[row];
        return n;
    }

    std::vector<std::size_t> row_columns(std::size_t row) const {
        std::vector<std::size_t> out;
        for (std::size_t c = 0; c < columns_.size(); ++c)
            if (columns_[c].entries[row]) out.push_back(c);
        return out;
    }

    /// Count recomputed from the entries, for invariant checks.
    int recount(std::size_t col) const {
        int n = 0;
        for (auto e : columns_.at(col).entries) n += e;
        return n;
    }

    bool operator==(const AllocationMatrix&) const = default;

private:
    struct Column {
        Label label;
        std::vector<unsigned char> entries;
        int count;
        bool operator==(const Column&) const = default;
    };

    std::size_t rows_ = 0;
    std::vector<Column> columns_;
};

/// Thrown when a structural invariant that moves must preserve is broken.
struct InvariantError : std::logic_error {
    using std::logic_error::logic_error;
};

/// W_k restricted to one row: the states of the objects a measurement originates from.
inline std::vector<ObjectState> masked_states(const AllocationMatrix& alloc, std::size_t row, const TrackSet& tracks) {
    if (row >= alloc.rows()) throw std::invalid_argument("masked_states: row out of range");
    std::vector<ObjectState> out;
    for (std::size_t c = 0; c < alloc.cols(); ++c)
        if (alloc.get(row, c)) out.push_back(tracks.at(alloc.label(c)).state);
    if (out.empty()) throw InvariantError("masked_states: measurement " + std::to_string(row) + " has no origin");
    return out;
}

/// Hyperparameters that shape the prior over allocation columns.
struct AssociationPrior {
    /// IBP rate for newborn objects (new dishes).
    double gamma = 1.0;
    /// Probability that a surviving object originates at least one measurement.
    double detection_prob = 0.999;
    /// When false, an empty surviving column carries no missed-detection cost.
    bool missed_detection_penalty = true;

    double log_empty_weight() const { return missed_detection_penalty ? std::log1p(-detection_prob) : 0.0; }
};

/// Density of newborn object states: a broad Gaussian over position centred on
/// the surveillance region, Gaussian velocity moment-matched to the NIW predictive.
struct BirthModel {
    Vec2 position_mean = Vec2(500.0, 500.0);
    double position_var = 1e6;
    Vec2 velocity_mean = Vec2::Zero();
    Mat2 velocity_cov = Mat2::Identity();

    /// Position spread is the larger side of the region, so the density varies
    /// by less than a factor 1.3 across the region itself.
    static BirthModel from_niw(const NiwParams& niw, const Vec2& region_center, double region_extent) {
        if (!(region_extent > 0.0)) throw std::invalid_argument("BirthModel: region extent must be positive");
        const StudentT4 t = niw_predictive(niw);
        BirthModel b;
        b.position_mean = region_center;
        b.position_var = region_extent * region_extent;
        b.velocity_mean = t.location.tail<2>();
        b.velocity_cov = t.covariance().bottomRightCorner<2, 2>();
        return b;
    }

    double position_logpdf(const Vec2& p) const {
        return -std::log(2.0 * std::numbers::pi * position_var) - 0.5 * (p - position_mean).squaredNorm() / position_var;
    }

    double logpdf(const ObjectState& x) const {
        return position_logpdf(position_of(x)) + gaussian_logpdf<2>(velocity_of(x), velocity_mean, velocity_cov);
    }
};

namespace detail {

inline double log_factorial(int n) { return std::lgamma(n + 1.0); }

/// log[(m-1)! (M-m)! / M!], the exchangeable IBP weight of one column with m of M rows active.
inline double log_ibp_column_weight(int m, int rows) {
    return log_factorial(m - 1) + log_factorial(rows - m) - log_factorial(rows);
}

inline Vec2 row_position_sum(const AllocationMatrix& alloc, std::size_t row, const TrackSet& tracks,
                             std::optional<std::size_t> skip, int& count) {
    Vec2 sum = Vec2::Zero();
    count = 0;
    for (std::size_t c = 0; c < alloc.cols(); ++c) {
        if (c == skip || !alloc.get(row, c)) continue;
        sum += position_of(tracks.at(alloc.label(c)).state);
        ++count;
    }
    return sum;
}

inline double gaussian2_loglik(const Vec2& y, const Vec2& mean, double var) {
    return -std::log(2.0 * std::numbers::pi * var) - 0.5 * (y - mean).squaredNorm() / var;
}

}  // namespace detail

/// Log prior weight of a surviving object's column with `m` of `rows` entries active.
///
/// Empty columns (missed detections) get the empty weight; otherwise the
/// detection probability is spread over non-empty patterns with the
/// exchangeable IBP column law normalized by H_rows.
inline double surviving_column_logprior(int m, int rows, const AssociationPrior& prior) {
    if (m == 0) return prior.log_empty_weight();
    return std::log(prior.detection_prob) + detail::log_ibp_column_weight(m, rows) - std::log(harmonic_number(rows));
}

/// Per-column data the entry sweep reads repeatedly: projected position and
/// whether the object survived from k-1.
struct ColumnView {
    std::vector<Vec2> positions;
    std::vector<char> survived;

    ColumnView(const AllocationMatrix& alloc, const TrackSet& tracks) {
        positions.reserve(alloc.cols());
        survived.reserve(alloc.cols());
        for (std::size_t c = 0; c < alloc.cols(); ++c) {
            const Track& t = tracks.at(alloc.label(c));
            positions.push_back(position_of(t.state));
            survived.push_back(t.survived_from_prev ? 1 : 0);
        }
    }
};

namespace detail {

inline std::optional<double> entry_logodds(const AllocationMatrix& alloc, const ColumnView& view, std::size_t row,
                                           std::size_t col, const Vec2& y, const MeasurementModel& meas,
                                           const AssociationPrior& prior) {
    const int rows = static_cast<int>(alloc.rows());
    const bool active = alloc.get(row, col);
    const int others = alloc.column_count(col) - (active ? 1 : 0);

    Vec2 sum_without = Vec2::Zero();
    int count_without = 0;
    for (std::size_t c = 0; c < alloc.cols(); ++c) {
        if (c == col || !alloc.get(row, c)) continue;
        sum_without += view.positions[c];
        ++count_without;
    }
    if (count_without == 0) return std::nullopt;

    double log_prior_odds = 0.0;
    if (view.survived[col]) {
        if (others == 0)
            log_prior_odds = std::log(prior.detection_prob) - std::log(rows * harmonic_number(rows)) -
                             prior.log_empty_weight();
        else
            log_prior_odds = std::log(static_cast<double>(others)) - std::log(static_cast<double>(rows - others));
    } else {
        if (others == 0) return std::nullopt;
        log_prior_odds = std::log(static_cast<double>(others)) - std::log(static_cast<double>(rows - others));
    }

    const Vec2 mean_on = (sum_without + view.positions[col]) / (count_without + 1.0);
    const Vec2 mean_off = sum_without / static_cast<double>(count_without);
    return log_prior_odds + gaussian2_loglik(y, mean_on, meas.sigma_o_sq) -
           gaussian2_loglik(y, mean_off, meas.sigma_o_sq);
}

}  // namespace detail

/// log P(a=1 | rest) - log P(a=0 | rest) for an existing column, or nullopt when
/// the move is vetoed (switching the entry off would orphan the row, or the
/// column is a newborn singleton in this row, which only the birth move handles).
///
/// Newborn columns use the IBP odds m / (M - m) over the other rows. Surviving
/// columns use the same odds once they hold another measurement; an empty
/// surviving column competes against the missed-detection weight instead.
inline std::optional<double> gibbs_entry_logodds(const AllocationMatrix& alloc, std::size_t row, std::size_t col,
                                                 const Vec2& y, const TrackSet& tracks, const MeasurementModel& meas,
                                                 const AssociationPrior& prior) {
    if (row >= alloc.rows() || col >= alloc.cols())
        throw std::invalid_argument("gibbs_entry_logodds: index out of range");
    return detail::entry_logodds(alloc, ColumnView(alloc, tracks), row, col, y, meas, prior);
}

/// Outcome of one new-object proposal for a single row.
struct NewColumnResult {
    int proposed = 0;
    bool accepted = false;
    std::vector<Label> born;
    std::vector<Label> removed;
    /// Change of the log joint when accepted (0 otherwise).
    double log_joint_delta = 0.0;
};

struct NewColumnOptions {
    int time = 0;
    /// Accept every structurally valid proposal (used to test the proposal law).
    bool force_accept = false;
};

/// Metropolis-Hastings move over the newborn objects that appear only in `row`.
///
/// Proposes n ~ Poisson(gamma / M) replacement singletons with positions drawn
/// around the measurement and velocities from the birth model; the current
/// singletons of that row are the reverse move.
inline NewColumnResult propose_new_columns(AllocationMatrix& alloc, TrackSet& tracks, std::size_t row, const Vec2& y,
                                           const MeasurementModel& meas, const BirthModel& birth,
                                           const AssociationPrior& prior, Rng& rng,
                                           const NewColumnOptions& options = {}) {
    if (row >= alloc.rows()) throw std::invalid_argument("propose_new_columns: row out of range");
    NewColumnResult result;
    const double rows = static_cast<double>(alloc.rows());
    const double rate = prior.gamma / rows;
    const int n_new = sample_poisson(rate, rng);
    result.proposed = n_new;

    std::vector<std::size_t> old_cols;
    for (std::size_t c = 0; c < alloc.cols(); ++c)
        if (alloc.get(row, c) && alloc.column_count(c) == 1 && !tracks.at(alloc.label(c)).survived_from_prev)
            old_cols.push_back(c);
    if (n_new == 0 && old_cols.empty()) return result;

    int kept = 0;
    const Vec2 kept_sum = detail::row_position_sum(alloc, row, tracks, std::nullopt, kept);
    Vec2 old_sum = Vec2::Zero();
    for (auto c : old_cols) old_sum += position_of(tracks.at(alloc.label(c)).state);
    const int base = kept - static_cast<int>(old_cols.size());
    const Vec2 base_sum = kept_sum - old_sum;
    if (base + n_new == 0) return result;  // would orphan the row

    const Mat2 proposal_cov = meas.noise_cov();
    auto log_proposal = [&](const ObjectState& x) {
        return gaussian_logpdf<2>(position_of(x), y, proposal_cov) +
               gaussian_logpdf<2>(velocity_of(x), birth.velocity_mean, birth.velocity_cov);
    };

    std::vector<ObjectState> fresh;
    fresh.reserve(static_cast<std::size_t>(n_new));
    Vec2 new_sum = Vec2::Zero();
    for (int i = 0; i < n_new; ++i) {
        ObjectState x;
        x.head<2>() = sample_gaussian<2>(y, proposal_cov, rng);
        x.tail<2>() = sample_gaussian<2>(birth.velocity_mean, birth.velocity_cov, rng);
        new_sum += position_of(x);
        fresh.push_back(x);
    }

    const double ll_old = detail::gaussian2_loglik(y, kept_sum / kept, meas.sigma_o_sq);
    const double ll_new = detail::gaussian2_loglik(y, (base_sum + new_sum) / (base + n_new), meas.sigma_o_sq);

    double log_prior_new = 0.0;
    double log_prior_old = 0.0;
    double log_q_new = 0.0, log_q_old = 0.0;
    for (const auto& x : fresh) {
        log_prior_new += birth.logpdf(x);
        log_q_new += log_proposal(x);
    }
    for (auto c : old_cols) {
        const auto& x = tracks.at(alloc.label(c)).state;
        log_prior_old += birth.logpdf(x);
        log_q_old += log_proposal(x);
    }
    // newborns form a Poisson process with intensity gamma / M per row pattern, so
    // the Poisson proposal of the count cancels against the prior
    const double log_target_delta = (ll_new - ll_old) + (n_new - static_cast<double>(old_cols.size())) * std::log(rate) +
                                    (log_prior_new - log_prior_old);
    const double log_accept = (ll_new - ll_old) + (log_prior_new - log_prior_old) - (log_q_new - log_q_old);

    if (!options.force_accept && std::log(uniform01(rng)) >= log_accept) return result;

    result.accepted = true;
    result.log_joint_delta = log_target_delta;
    for (auto it = old_cols.rbegin(); it != old_cols.rend(); ++it) {
        const Label l = alloc.label(*it);
        result.removed.push_back(l);
        alloc.remove_column(*it);
        tracks.erase(l);
    }
    // newborn singletons of one row are exchangeable, so replacements reuse the
    // labels of the columns they replace before drawing fresh ones
    for (std::size_t i = 0; i < fresh.size(); ++i) {
        Label label;
        if (i < result.removed.size()) {
            Track t;
            t.label = result.removed[result.removed.size() - 1 - i];
            t.state = fresh[i];
            t.alive_since = options.time;
            label = tracks.insert(t).label;
        } else {
            label = tracks.add_newborn(fresh[i], options.time).label;
        }
        const std::size_t c = alloc.add_column(label);
        alloc.set(row, c, true);
        result.born.push_back(label);
    }
    return result;
}

/// First broken invariant of an allocation matrix, with coordinates.
struct Violation {
    std::string what;
    std::optional<std::size_t> row;
    std::optional<std::size_t> col;
};

inline std::optional<Violation> validate(const AllocationMatrix& alloc) {
    for (std::size_t c = 0; c < alloc.cols(); ++c) {
        if (alloc.recount(c) != alloc.column_count(c))
            return Violation{"cached column count disagrees with entries", std::nullopt, c};
        for (std::size_t d = c + 1; d < alloc.cols(); ++d)
            if (alloc.label(c) == alloc.label(d)) return Violation{"duplicate column label", std::nullopt, d};
    }
    for (std::size_t r = 0; r < alloc.rows(); ++r)
        if (alloc.row_count(r) == 0) return Violation{"measurement without origin", r, std::nullopt};
    return std::nullopt;
}

/// Also checks agreement with the track set: columns are exactly the alive
/// objects, and only surviving objects may have empty columns.
inline std::optional<Violation> validate(const AllocationMatrix& alloc, const TrackSet& tracks) {
    if (auto v = validate(alloc)) return v;
    for (std::size_t c = 0; c < alloc.cols(); ++c) {
        const Track* t = tracks.find(alloc.label(c));
        if (!t) return Violation{"column label without track", std::nullopt, c};
        if (!t->alive) return Violation{"column for a dead track", std::nullopt, c};
        if (alloc.column_count(c) == 0 && !t->survived_from_prev)
            return Violation{"empty newborn column not pruned", std::nullopt, c};
    }
    for (const auto& t : tracks.tracks())
        if (t.alive && !alloc.find(t.label)) return Violation{"alive track without column", std::nullopt, std::nullopt};
    return std::nullopt;
}

}  // namespace spawntrack
