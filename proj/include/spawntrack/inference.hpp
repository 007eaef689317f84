#pragma once

#include "spawntrack/assignment.hpp"
#include "spawntrack/association.hpp"
#include "spawntrack/dynamics.hpp"
#include "spawntrack/priors.hpp"
#include "spawntrack/random.hpp"
#include "spawntrack/tracks.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spawntrack {

/// Axis-aligned surveillance rectangle in meters.
struct Region {
    double x_min = 0.0, x_max = 1000.0;
    double y_min = 0.0, y_max = 1000.0;

    double area() const { return (x_max - x_min) * (y_max - y_min); }
    Vec2 center() const { return Vec2(0.5 * (x_min + x_max), 0.5 * (y_min + y_max)); }
    double extent() const { return std::max(x_max - x_min, y_max - y_min); }
    void validate() const {
        if (!(x_max > x_min && y_max > y_min)) throw std::invalid_argument("Region: empty rectangle");
    }
};

/// How the configuration at the end of a step is handed to the next step.
enum class CarryPolicy {
    /// Labels alive in at least half of the retained sweeps, carried with the
    /// sample mean and covariance of their states.
    moment_matched,
    /// The last retained sweep, states frozen at their sampled values.
    last_sample,
};

struct SamplerConfig {
    int burn_in = 100;
    int samples = 200;

    MotionModel motion;
    MeasurementModel meas;
    double detection_prob = 0.999;
    bool missed_detection_penalty = true;

    double alpha_shape = 1.0, alpha_rate = 0.1;
    double gamma_shape = 1.0, gamma_rate = 1.0;
    NiwParams niw;
    Region region;

    CarryPolicy carry = CarryPolicy::moment_matched;
    /// Gate (squared normalized distance) for the initial association of a step.
    double init_gate = 13.8;

    // Move switches, for diagnostics and frozen-scene tests.
    bool enable_survival = true;
    bool enable_entries = true;
    bool enable_births = true;
    bool enable_split_merge = true;
    bool enable_states = true;
    bool enable_hyper = true;
    /// Validate structural invariants after every sweep.
    bool check_invariants = false;

    void validate() const {
        if (burn_in < 0 || samples < 1) throw std::invalid_argument("SamplerConfig: need burn_in >= 0 and samples >= 1");
        motion.validate();
        meas.validate();
        niw.validate();
        region.validate();
        if (!(detection_prob > 0.0 && detection_prob < 1.0))
            throw std::invalid_argument("SamplerConfig: detection_prob must lie in (0, 1)");
        if (!(alpha_shape > 0.0 && alpha_rate > 0.0 && gamma_shape > 0.0 && gamma_rate > 0.0))
            throw std::invalid_argument("SamplerConfig: hyperprior parameters must be positive");
    }

    BirthModel birth_model() const { return BirthModel::from_niw(niw, region.center(), region.extent()); }
};

/// One Gibbs-chain configuration at time `time`.
struct ChainState {
    TrackSet tracks;
    AllocationMatrix alloc;
    double alpha = 10.0;
    double gamma = 1.0;
    /// Hyperparameters of the NIW over newborn-object state parameters.
    NiwParams niw;
    /// -1 before the first step.
    int time = -1;
    /// Accumulated statistics for the IBP rate: committed newborns and sum of H_{M_k}.
    int committed_births = 0;
    double committed_exposure = 0.0;

    static ChainState initial(const SamplerConfig& config) {
        ChainState c;
        c.alpha = config.alpha_shape / config.alpha_rate;
        c.gamma = config.gamma_shape / config.gamma_rate;
        c.niw = config.niw;
        return c;
    }

    AssociationPrior association_prior(const SamplerConfig& config) const {
        return {gamma, config.detection_prob, config.missed_detection_penalty};
    }
};

/// Restaurant occupancy at time k: a surviving object contributes one survived
/// customer, and every measurement it originates is a current customer.
inline DdpCounts ddp_counts(const ChainState& chain) {
    DdpCounts counts;
    counts.alpha = chain.alpha;
    for (const auto& t : chain.tracks.tracks()) {
        if (!t.alive) continue;
        const auto col = chain.alloc.find(t.label);
        counts.survived.push_back(t.survived_from_prev ? 1 : 0);
        counts.current.push_back(col ? chain.alloc.column_count(*col) : 0);
    }
    return counts;
}

struct GaussianState {
    Vec4 mean;
    Mat4 cov;
};

/// Exact Gaussian conditional of one object's state given everything else.
///
/// Prior: the predicted Gaussian for survivors, or the birth model for newborns. Each measurement row containing the object adds a
/// linear-Gaussian term y - mean(others)/n ~ N(B x / n, sigma_o^2 I).
inline GaussianState state_conditional(Label label, const ChainState& chain, std::span<const Vec2> measurements,
                                       const SamplerConfig& config) {
    const Track& track = chain.tracks.at(label);
    Mat4 precision = Mat4::Zero();
    Vec4 info = Vec4::Zero();
    if (track.survived_from_prev) {
        const Mat4 pred_cov = track.predicted_cov(config.motion);
        const Eigen::LLT<Mat4> llt(pred_cov);
        precision = llt.solve(Mat4::Identity());
        info = precision * track.predicted_mean(config.motion);
    } else {
        const BirthModel birth = config.birth_model();
        const Mat2 vel_precision = birth.velocity_cov.inverse();
        precision.topLeftCorner<2, 2>() = Mat2::Identity() / birth.position_var;
        info.head<2>() = birth.position_mean / birth.position_var;
        precision.bottomRightCorner<2, 2>() = vel_precision;
        info.tail<2>() = vel_precision * birth.velocity_mean;
    }

    if (const auto col = chain.alloc.find(label)) {
        const Mat24 b = MeasurementModel::projection();
        const double inv_var = 1.0 / config.meas.sigma_o_sq;
        for (std::size_t r = 0; r < chain.alloc.rows(); ++r) {
            if (!chain.alloc.get(r, *col)) continue;
            int n = 0;
            const Vec2 others = detail::row_position_sum(chain.alloc, r, chain.tracks, col, n);
            const double size = n + 1.0;
            const Mat24 h = b / size;
            precision += inv_var * h.transpose() * h;
            info += inv_var * h.transpose() * (measurements[r] - others / size);
        }
    }

    precision = 0.5 * (precision + precision.transpose());
    const Eigen::LDLT<Mat4> ldlt(precision);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all())
        throw InvariantError("state_conditional: improper conditional for label " + std::to_string(label));
    GaussianState g;
    g.cov = ldlt.solve(Mat4::Identity());
    g.cov = 0.5 * (g.cov + g.cov.transpose());
    g.mean = g.cov * info;
    return g;
}

/// Unnormalized log joint of the time-k configuration given the frozen past and
/// the hyperparameters alpha, gamma.
inline double log_joint(const ChainState& chain, std::span<const Vec2> measurements, const SamplerConfig& config) {
    const int rows = static_cast<int>(chain.alloc.rows());
    const AssociationPrior prior = chain.association_prior(config);
    const BirthModel birth = config.birth_model();
    const double ps = config.motion.survival_prob;

    double total = 0.0;
    for (const auto& t : chain.tracks.tracks()) {
        if (t.survived_from_prev && !t.alive) {
            total += std::log1p(-ps);
            continue;
        }
        const auto col = chain.alloc.find(t.label);
        const int m = col ? chain.alloc.column_count(*col) : 0;
        if (t.survived_from_prev) {
            total += std::log(ps) + gaussian_logpdf<4>(t.state, t.predicted_mean(config.motion), t.predicted_cov(config.motion)) +
                     surviving_column_logprior(m, rows, prior);
        } else {
            total += std::log(chain.gamma) + detail::log_ibp_column_weight(m, rows) + birth.logpdf(t.state);
        }
    }
    if (rows > 0) {
        total -= chain.gamma * harmonic_number(rows);
        for (std::size_t r = 0; r < chain.alloc.rows(); ++r) {
            total += measurement_loglik(measurements[r], masked_states(chain.alloc, r, chain.tracks), config.meas);
        }
    }
    return total;
}

namespace detail {

inline double log_sigmoid_draw(double logodds, Rng& rng) {
    // returns 1 with probability sigmoid(logodds)
    const double p = logodds >= 0 ? 1.0 / (1.0 + std::exp(-logodds)) : std::exp(logodds) / (1.0 + std::exp(logodds));
    return uniform01(rng) < p ? 1.0 : 0.0;
}

}  // namespace detail

/// Switches surviving objects with empty columns between alive and dead.
/// Returns the change of the log joint.
inline double survival_move(ChainState& chain, const SamplerConfig& config, Rng& rng) {
    const double ps = config.motion.survival_prob;
    const AssociationPrior prior = chain.association_prior(config);
    double delta = 0.0;
    for (auto& t : chain.tracks.tracks()) {
        if (!t.survived_from_prev) continue;
        std::optional<std::size_t> col = chain.alloc.find(t.label);
        if (t.alive && col && chain.alloc.column_count(*col) > 0) continue;

        const Vec4 pred_mean = t.predicted_mean(config.motion);
        const Mat4 pred_cov = t.predicted_cov(config.motion);
        const double log_dead = std::log1p(-ps);
        const double log_alive_base = std::log(ps) + prior.log_empty_weight();
        // with state moves enabled the state is integrated out and redrawn on revival
        const double log_alive =
            config.enable_states ? log_alive_base : log_alive_base + gaussian_logpdf<4>(t.state, pred_mean, pred_cov);
        const bool alive = detail::log_sigmoid_draw(log_alive - log_dead, rng) > 0.5;
        if (alive == t.alive) continue;

        const double before =
            t.alive ? log_alive_base + gaussian_logpdf<4>(t.state, pred_mean, pred_cov) : log_dead;
        if (alive) {
            if (config.enable_states) t.state = sample_gaussian<4>(pred_mean, pred_cov, rng);
            t.alive = true;
            chain.alloc.add_column(t.label);
            delta += log_alive_base + gaussian_logpdf<4>(t.state, pred_mean, pred_cov) - before;
        } else {
            t.alive = false;
            chain.alloc.remove_column(*col);
            delta += log_dead - before;
        }
    }
    return delta;
}

/// One Gibbs pass over every (measurement, object) entry. Returns the log-joint change.
inline double entry_pass(ChainState& chain, std::span<const Vec2> measurements, const SamplerConfig& config, Rng& rng) {
    const AssociationPrior prior = chain.association_prior(config);
    const ColumnView view(chain.alloc, chain.tracks);
    double delta = 0.0;
    for (std::size_t r = 0; r < chain.alloc.rows(); ++r) {
        for (std::size_t c = 0; c < chain.alloc.cols(); ++c) {
            const auto logodds = detail::entry_logodds(chain.alloc, view, r, c, measurements[r], config.meas, prior);
            if (!logodds) continue;
            const bool was = chain.alloc.get(r, c);
            const bool now = detail::log_sigmoid_draw(*logodds, rng) > 0.5;
            if (was == now) continue;
            chain.alloc.set(r, c, now);
            delta += now ? *logodds : -*logodds;
        }
    }
    return delta;
}

/// New-object proposals for every measurement row. Returns the log-joint change.
inline double birth_pass(ChainState& chain, std::span<const Vec2> measurements, const SamplerConfig& config, Rng& rng) {
    const AssociationPrior prior = chain.association_prior(config);
    const BirthModel birth = config.birth_model();
    double delta = 0.0;
    for (std::size_t r = 0; r < chain.alloc.rows(); ++r) {
        const auto res = propose_new_columns(chain.alloc, chain.tracks, r, measurements[r], config.meas, birth, prior,
                                             rng, {chain.time, false});
        delta += res.log_joint_delta;
    }
    return delta;
}

namespace detail {

/// Rows a surviving object shares with at least one other of its rows.
inline std::vector<std::pair<std::size_t, Label>> split_candidates(const ChainState& chain) {
    std::vector<std::pair<std::size_t, Label>> out;
    for (std::size_t c = 0; c < chain.alloc.cols(); ++c) {
        if (!chain.tracks.at(chain.alloc.label(c)).survived_from_prev || chain.alloc.column_count(c) < 2) continue;
        for (std::size_t r = 0; r < chain.alloc.rows(); ++r)
            if (chain.alloc.get(r, c)) out.emplace_back(r, chain.alloc.label(c));
    }
    return out;
}

struct MergeCandidate {
    std::size_t row;
    Label newborn;
    Label survivor;
};

/// Newborn singletons paired with every detected surviving object outside their row.
inline std::vector<MergeCandidate> merge_candidates(const ChainState& chain) {
    std::vector<MergeCandidate> out;
    for (std::size_t n = 0; n < chain.alloc.cols(); ++n) {
        if (chain.tracks.at(chain.alloc.label(n)).survived_from_prev || chain.alloc.column_count(n) != 1) continue;
        std::size_t row = 0;
        while (!chain.alloc.get(row, n)) ++row;
        for (std::size_t c = 0; c < chain.alloc.cols(); ++c) {
            if (!chain.tracks.at(chain.alloc.label(c)).survived_from_prev || chain.alloc.column_count(c) < 1 ||
                chain.alloc.get(row, c))
                continue;
            out.push_back({row, chain.alloc.label(n), chain.alloc.label(c)});
        }
    }
    return out;
}

}  // namespace detail

/// Metropolis-Hastings move that hands one row of a multi-row surviving object
/// to a new singleton object (split), or the reverse (merge). Newborn states
/// are proposed as in the birth move. Returns the log-joint change.
inline double split_merge_move(ChainState& chain, std::span<const Vec2> measurements, const SamplerConfig& config,
                               Rng& rng) {
    const BirthModel birth = config.birth_model();
    const Mat2 proposal_cov = config.meas.noise_cov();
    auto log_proposal = [&](const ObjectState& x, const Vec2& y) {
        return gaussian_logpdf<2>(position_of(x), y, proposal_cov) +
               gaussian_logpdf<2>(velocity_of(x), birth.velocity_mean, birth.velocity_cov);
    };

    ChainState next = chain;
    double log_hastings = 0.0;
    if (uniform01(rng) < 0.5) {
        const auto splits = detail::split_candidates(chain);
        if (splits.empty()) return 0.0;
        const auto [row, survivor] = splits[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(splits.size()))];
        ObjectState x;
        x.head<2>() = sample_gaussian<2>(measurements[row], proposal_cov, rng);
        x.tail<2>() = sample_gaussian<2>(birth.velocity_mean, birth.velocity_cov, rng);
        next.alloc.set(row, *next.alloc.find(survivor), false);
        const Label born = next.tracks.add_newborn(x, chain.time).label;
        next.alloc.set(row, next.alloc.add_column(born), true);
        log_hastings = std::log(static_cast<double>(splits.size())) -
                       std::log(static_cast<double>(detail::merge_candidates(next).size())) -
                       log_proposal(x, measurements[row]);
    } else {
        const auto merges = detail::merge_candidates(chain);
        if (merges.empty()) return 0.0;
        const auto m = merges[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(merges.size()))];
        const ObjectState x = chain.tracks.at(m.newborn).state;
        next.alloc.set(m.row, *next.alloc.find(m.survivor), true);
        next.alloc.remove_column(*next.alloc.find(m.newborn));
        next.tracks.erase(m.newborn);
        log_hastings = std::log(static_cast<double>(merges.size())) -
                       std::log(static_cast<double>(detail::split_candidates(next).size())) +
                       log_proposal(x, measurements[m.row]);
    }
    const double delta = log_joint(next, measurements, config) - log_joint(chain, measurements, config);
    if (std::log(uniform01(rng)) >= delta + log_hastings) return 0.0;
    chain = std::move(next);
    return delta;
}

/// Redraws every alive object's state from its exact conditional. Returns the log-joint change.
inline double state_pass(ChainState& chain, std::span<const Vec2> measurements, const SamplerConfig& config, Rng& rng) {
    double delta = 0.0;
    for (auto& t : chain.tracks.tracks()) {
        if (!t.alive) continue;
        const GaussianState g = state_conditional(t.label, chain, measurements, config);
        const Vec4 next = sample_gaussian<4>(g.mean, g.cov, rng);
        delta += gaussian_logpdf<4>(next, g.mean, g.cov) - gaussian_logpdf<4>(t.state, g.mean, g.cov);
        t.state = next;
    }
    return delta;
}

/// Resamples alpha from the restaurant occupancy and gamma from the newborn counts.
inline void hyper_update(ChainState& chain, const SamplerConfig& config, Rng& rng) {
    const DdpCounts counts = ddp_counts(chain);
    int items = 0;
    int newborns = 0;
    for (std::size_t j = 0; j < counts.num_clusters(); ++j) {
        items += counts.survived[j] + counts.current[j];
        if (counts.survived[j] == 0) ++newborns;
    }
    chain.alpha = resample_alpha(static_cast<int>(counts.num_clusters()), items, chain.alpha, config.alpha_shape,
                                 config.alpha_rate, rng);
    const double exposure = chain.committed_exposure + harmonic_number(static_cast<int>(chain.alloc.rows()));
    chain.gamma = resample_gamma_from_exposure(chain.committed_births + newborns, exposure, config.gamma_shape,
                                               config.gamma_rate, rng);
}

/// Posterior moments of one label over the retained sweeps where it was alive.
struct LabelPosterior {
    int count = 0;
    Vec4 mean = Vec4::Zero();
    Mat4 cov = Mat4::Zero();
};

struct PosteriorSummary {
    int time = 0;
    std::map<int, int> cardinality_histogram;
    int cardinality_mode = 0;
    int sample_count = 0;
    std::map<Label, LabelPosterior> labels;
};

/// One retained sweep.
struct SweepSample {
    AllocationMatrix alloc;
    std::vector<std::pair<Label, ObjectState>> states;
};

struct StepResult {
    ChainState chain;
    PosteriorSummary summary;
    std::vector<SweepSample> samples;
};

namespace detail {

/// Moves the chain to time k: survivors predicted forward, measurements
/// matched one-to-one to predictions within the gate, the rest seeded as newborns.
inline ChainState begin_step(const ChainState& prev, std::span<const Vec2> measurements, const SamplerConfig& config) {
    ChainState next;
    next.alpha = prev.alpha;
    next.gamma = prev.gamma;
    next.niw = prev.niw;
    next.time = prev.time + 1;
    next.committed_births = prev.committed_births;
    next.committed_exposure = prev.committed_exposure;
    next.tracks.reserve_labels_below(prev.tracks.next_label());
    next.alloc = AllocationMatrix(measurements.size());

    for (const auto& t : prev.tracks.tracks()) {
        if (!t.alive) continue;
        Track s;
        s.label = t.label;
        s.alive_since = t.alive_since;
        s.prev_mean = t.prev_mean;
        s.prev_cov = t.prev_cov;
        s.state = s.predicted_mean(config.motion);
        next.tracks.add_survivor(s);
        next.alloc.add_column(s.label);
    }

    const std::size_t n = next.alloc.cols();
    const std::size_t m = measurements.size();
    std::vector<int> row_to_col(m, -1);
    if (n > 0 && m > 0) {
        Eigen::MatrixXd cost(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
        for (std::size_t c = 0; c < n; ++c) {
            const Track& t = next.tracks.at(next.alloc.label(c));
            const Mat4 pc = t.predicted_cov(config.motion);
            const double var = config.meas.sigma_o_sq + 0.5 * (pc(0, 0) + pc(1, 1));
            for (std::size_t r = 0; r < m; ++r)
                cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    std::min((measurements[r] - position_of(t.state)).squaredNorm() / var, 2.0 * config.init_gate);
        }
        const Assignment a = solve_assignment(cost);
        for (std::size_t r = 0; r < m; ++r) {
            const int c = a.row_to_col[r];
            if (c >= 0 && cost(static_cast<Eigen::Index>(r), c) <= config.init_gate) row_to_col[r] = c;
        }
    }

    const BirthModel birth = config.birth_model();
    for (std::size_t r = 0; r < m; ++r) {
        if (row_to_col[r] >= 0) {
            next.alloc.set(r, static_cast<std::size_t>(row_to_col[r]), true);
            continue;
        }
        ObjectState x;
        x << measurements[r], birth.velocity_mean;
        Track& t = next.tracks.add_newborn(x, next.time);
        next.alloc.set(r, next.alloc.add_column(t.label), true);
    }
    return next;
}

inline PosteriorSummary summarize(int time, const std::vector<SweepSample>& samples) {
    PosteriorSummary s;
    s.time = time;
    s.sample_count = static_cast<int>(samples.size());
    std::map<Label, std::vector<Vec4>> draws;
    for (const auto& sample : samples) {
        ++s.cardinality_histogram[static_cast<int>(sample.states.size())];
        for (const auto& [label, x] : sample.states) draws[label].push_back(x);
    }
    int best = -1;
    for (const auto& [n, count] : s.cardinality_histogram)
        if (count > best) {
            best = count;
            s.cardinality_mode = n;
        }
    for (const auto& [label, xs] : draws) {
        LabelPosterior lp;
        lp.count = static_cast<int>(xs.size());
        for (const auto& x : xs) lp.mean += x;
        lp.mean /= lp.count;
        for (const auto& x : xs) lp.cov += (x - lp.mean) * (x - lp.mean).transpose();
        if (lp.count > 1) lp.cov /= (lp.count - 1);
        s.labels.emplace(label, lp);
    }
    return s;
}

/// The configuration handed to the next step.
inline ChainState commit(const ChainState& last, const PosteriorSummary& summary, const SweepSample& last_sample,
                         const SamplerConfig& config) {
    ChainState out;
    out.alpha = last.alpha;
    out.gamma = last.gamma;
    out.niw = last.niw;
    out.time = last.time;
    out.tracks.reserve_labels_below(last.tracks.next_label());
    out.committed_births = last.committed_births;
    out.committed_exposure = last.committed_exposure + harmonic_number(static_cast<int>(last.alloc.rows()));

    std::vector<Track> carried;
    if (config.carry == CarryPolicy::last_sample) {
        for (const auto& [label, x] : last_sample.states) {
            Track t = last.tracks.at(label);
            t.state = x;
            t.prev_mean = x;
            t.prev_cov = Mat4::Zero();
            carried.push_back(t);
        }
    } else {
        for (const auto& [label, lp] : summary.labels) {
            if (2 * lp.count < summary.sample_count) continue;
            Track t;
            t.label = label;
            const Track* cur = last.tracks.find(label);
            t.alive_since = cur ? cur->alive_since : last.time;
            t.survived_from_prev = cur ? cur->survived_from_prev : false;
            t.state = lp.mean;
            t.prev_mean = lp.mean;
            t.prev_cov = lp.cov;
            carried.push_back(t);
        }
    }

    AllocationMatrix alloc(last_sample.alloc.rows());
    for (auto& t : carried) {
        if (t.alive_since == last.time) ++out.committed_births;
        t.alive = true;
        // stored as survivors of this step: the next step reads prev_mean/prev_cov
        Track& added = out.tracks.add_survivor(t);
        added.survived_from_prev = t.alive_since < last.time;
        const auto src = last_sample.alloc.find(t.label);
        const std::size_t c = alloc.add_column(t.label);
        if (src)
            for (std::size_t r = 0; r < alloc.rows(); ++r) alloc.set(r, c, last_sample.alloc.get(r, *src));
    }
    out.alloc = std::move(alloc);
    return out;
}

inline SweepSample snapshot(const ChainState& chain) {
    SweepSample s;
    s.alloc = chain.alloc;
    for (const auto& t : chain.tracks.tracks())
        if (t.alive) s.states.emplace_back(t.label, t.state);
    return s;
}

}  // namespace detail

/// One full sweep of the schedule: survival, entries, births, split/merge, states, hyperparameters.
inline void sweep(ChainState& chain, std::span<const Vec2> measurements, const SamplerConfig& config, Rng& rng) {
    if (config.enable_survival) survival_move(chain, config, rng);
    if (config.enable_entries) entry_pass(chain, measurements, config, rng);
    if (config.enable_births) birth_pass(chain, measurements, config, rng);
    if (config.enable_split_merge) split_merge_move(chain, measurements, config, rng);
    if (config.enable_states) state_pass(chain, measurements, config, rng);
    if (config.enable_hyper) hyper_update(chain, config, rng);
    if (config.check_invariants) {
        if (auto v = validate(chain.alloc, chain.tracks))
            throw InvariantError("sweep at time " + std::to_string(chain.time) + ": " + v->what);
    }
}

/// Runs the sampler at one already-initialized time step and returns the
/// retained sweeps; the chain is left at the last sweep's configuration.
inline std::vector<SweepSample> run_sweeps(ChainState& chain, std::span<const Vec2> measurements,
                                           const SamplerConfig& config, Rng& rng) {
    std::vector<SweepSample> retained;
    retained.reserve(static_cast<std::size_t>(config.samples));
    for (int i = 0; i < config.burn_in + config.samples; ++i) {
        sweep(chain, measurements, config, rng);
        if (i >= config.burn_in) retained.push_back(detail::snapshot(chain));
    }
    return retained;
}

/// Advances the chain from k-1 to k given the measurements at k.
inline StepResult step(const ChainState& chain, std::span<const Vec2> measurements, const SamplerConfig& config,
                       Rng& rng) {
    config.validate();
    ChainState current = detail::begin_step(chain, measurements, config);
    StepResult result;
    result.samples = run_sweeps(current, measurements, config, rng);
    result.summary = detail::summarize(current.time, result.samples);
    result.chain = detail::commit(current, result.summary, result.samples.back(), config);
    return result;
}

/// Filters a whole measurement sequence; one summary per time step.
inline std::vector<PosteriorSummary> run(const std::vector<std::vector<Vec2>>& measurements,
                                         const SamplerConfig& config, Rng& rng) {
    config.validate();
    std::vector<PosteriorSummary> out;
    out.reserve(measurements.size());
    ChainState chain = ChainState::initial(config);
    for (const auto& ys : measurements) {
        StepResult r = step(chain, ys, config, rng);
        out.push_back(std::move(r.summary));
        chain = std::move(r.chain);
    }
    return out;
}

struct StepEstimate {
    int time = 0;
    int cardinality = 0;
    std::vector<std::pair<Label, ObjectState>> states;
};

/// Point estimates: the modal cardinality (ties go to the smaller count) and
/// the posterior means of that many most frequently alive labels.
inline std::vector<StepEstimate> estimate(const std::vector<PosteriorSummary>& summaries) {
    std::vector<StepEstimate> out;
    out.reserve(summaries.size());
    for (const auto& s : summaries) {
        if (s.sample_count <= 0 || s.cardinality_histogram.empty())
            throw std::invalid_argument("estimate: step " + std::to_string(s.time) + " has no samples");
        StepEstimate e;
        e.time = s.time;
        int best = -1;
        for (const auto& [n, count] : s.cardinality_histogram)
            if (count > best) {
                best = count;
                e.cardinality = n;
            }
        std::vector<std::pair<Label, const LabelPosterior*>> ranked;
        for (const auto& [label, lp] : s.labels) ranked.emplace_back(label, &lp);
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.second->count > b.second->count; });
        const std::size_t keep = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(e.cardinality));
        for (std::size_t i = 0; i < keep; ++i) e.states.emplace_back(ranked[i].first, ranked[i].second->mean);
        std::sort(e.states.begin(), e.states.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace spawntrack
