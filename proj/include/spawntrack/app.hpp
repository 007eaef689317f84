#pragma once

#include "spawntrack/inference.hpp"
#include "spawntrack/io.hpp"
#include "spawntrack/metrics.hpp"
#include "spawntrack/simulator.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace spawntrack::app {

/// Random stream used by the tracker; the simulator uses its own stream of the same seed.
inline constexpr std::uint64_t tracker_stream = 0x7au;

/// Per-step evaluation of one tracker output against the truth.
struct StepMetrics {
    int time = 0;
    OspaResult ospa;
    OspaResult baseline;
    int true_n = 0;
    int est_n = 0;
};

inline std::vector<Vec2> truth_positions(const Scenario& sc, int k) {
    std::vector<Vec2> out;
    for (const auto& t : sc.truth[static_cast<std::size_t>(k)]) out.push_back(position_of(t.state));
    return out;
}

/// Scores estimates against a scenario; the baseline uses the raw measurements.
inline std::vector<StepMetrics> evaluate(const Scenario& sc, const std::vector<StepEstimate>& est,
                                         const OspaParams& params) {
    if (static_cast<int>(est.size()) != sc.num_steps())
        throw std::invalid_argument("evaluate: " + std::to_string(est.size()) + " estimate steps for a scenario of " +
                                    std::to_string(sc.num_steps()));
    const auto all_meas = sc.measurement_values();
    std::vector<StepMetrics> out;
    out.reserve(est.size());
    for (int k = 0; k < sc.num_steps(); ++k) {
        const auto& e = est[static_cast<std::size_t>(k)];
        if (e.time != k) throw std::invalid_argument("evaluate: estimate step " + std::to_string(e.time) + " misaligned");
        const auto truth = truth_positions(sc, k);
        std::vector<Vec2> pos;
        for (const auto& [label, x] : e.states) pos.push_back(position_of(x));
        const auto& meas = all_meas[static_cast<std::size_t>(k)];
        StepMetrics m;
        m.time = k;
        m.ospa = ospa(truth, pos, params);
        m.baseline = ospa(truth, meas, params);
        m.true_n = static_cast<int>(truth.size());
        m.est_n = static_cast<int>(pos.size());
        out.push_back(m);
    }
    return out;
}

/// Runs the tracker over a whole scenario.
inline std::vector<StepEstimate> track(const Scenario& sc, const SamplerConfig& config, std::uint64_t seed) {
    Rng rng = make_rng(seed, tracker_stream);
    return estimate(run(sc.measurement_values(), config, rng));
}

/// Rebuilds per-step estimates from estimate rows; times must lie in [0, num_steps).
inline std::vector<StepEstimate> group_estimates(const std::vector<io::EstimateRow>& rows, int num_steps) {
    std::vector<StepEstimate> est(static_cast<std::size_t>(num_steps));
    for (int k = 0; k < num_steps; ++k) est[static_cast<std::size_t>(k)].time = k;
    for (const auto& r : rows) {
        if (r.time < 0 || r.time >= num_steps)
            throw std::invalid_argument("estimates: time " + std::to_string(r.time) + " outside the scenario's " +
                                        std::to_string(num_steps) + " steps");
        auto& e = est[static_cast<std::size_t>(r.time)];
        e.states.emplace_back(r.label, r.state);
        e.cardinality = static_cast<int>(e.states.size());
    }
    return est;
}

inline std::string format_metrics(const std::vector<StepMetrics>& metrics) {
    std::ostringstream out;
    out << "time,ospa_total,ospa_loc,ospa_card,card_error\n";
    for (const auto& m : metrics)
        out << m.time << ',' << io::fmt(m.ospa.total) << ',' << io::fmt(m.ospa.loc) << ',' << io::fmt(m.ospa.card) << ','
            << (m.est_n - m.true_n) << '\n';
    return out.str();
}

inline std::string format_truth(const Scenario& sc) {
    std::ostringstream out;
    out << "time,label,x,y,vx,vy\n";
    for (int k = 0; k < sc.num_steps(); ++k)
        for (const auto& t : sc.truth[static_cast<std::size_t>(k)])
            out << k << ',' << t.label << ',' << io::fmt(t.state(0)) << ',' << io::fmt(t.state(1)) << ','
                << io::fmt(t.state(2)) << ',' << io::fmt(t.state(3)) << '\n';
    return out.str();
}

// ---- commands ----

inline Scenario cmd_simulate(const io::ExperimentConfig& config, const std::filesystem::path& out_path,
                             std::ostream& log) {
    const ScenarioConfig sc_config = config.scenario_for(config.base_seed);
    Scenario sc = generate(sc_config);
    sc.header = io::echo_scenario_config(sc_config);
    sc.header.insert(sc.header.begin(), "scenario=" + config.scenario);
    io::write_atomic(out_path, io::format_scenario(sc));
    log << "steps " << sc.num_steps() << "\n"
        << "peak_cardinality " << sc.peak_cardinality() << "\n"
        << "spawn_events " << sc.spawn_events() << "\n";
    return sc;
}

struct TrackOutputs {
    std::filesystem::path estimates;
    std::filesystem::path cardinality;
};

inline TrackOutputs cmd_track(const std::filesystem::path& scenario_path, const io::ExperimentConfig& config,
                              const std::filesystem::path& out_dir, std::ostream& log) {
    const Scenario sc = io::load_scenario(scenario_path);
    const auto est = track(sc, config.sampler, config.base_seed);
    TrackOutputs out{out_dir / "estimates.csv", out_dir / "cardinality.csv"};
    io::write_atomic(out.estimates, io::format_estimates(est));
    io::write_atomic(out.cardinality, io::format_cardinality(sc.true_counts(), est));
    log << "tracked " << est.size() << " steps\n";
    return out;
}

inline std::vector<StepMetrics> cmd_evaluate(const std::filesystem::path& scenario_path,
                                             const std::filesystem::path& estimates_path, const OspaParams& params,
                                             const std::filesystem::path& out_path, std::ostream& log) {
    const Scenario sc = io::load_scenario(scenario_path);
    const auto rows = io::parse_estimates(io::read_file(estimates_path));
    const auto metrics = evaluate(sc, group_estimates(rows, sc.num_steps()), params);
    io::write_atomic(out_path, format_metrics(metrics));
    double total = 0.0;
    for (const auto& m : metrics) total += m.ospa.total;
    log << "mean_ospa " << io::fmt(metrics.empty() ? 0.0 : total / static_cast<double>(metrics.size())) << "\n";
    return metrics;
}

/// Result of one Monte-Carlo run.
struct RunResult {
    std::uint64_t seed = 0;
    Scenario scenario;
    std::vector<StepEstimate> estimates;
    std::vector<StepMetrics> metrics;

    double mean_ospa() const { return mean_of([](const StepMetrics& m) { return m.ospa.total; }); }
    double mean_baseline() const { return mean_of([](const StepMetrics& m) { return m.baseline.total; }); }
    double cardinality_accuracy() const {
        return mean_of([](const StepMetrics& m) { return m.est_n == m.true_n ? 1.0 : 0.0; });
    }

private:
    template <class F>
    double mean_of(F f) const {
        if (metrics.empty()) return 0.0;
        double s = 0.0;
        for (const auto& m : metrics) s += f(m);
        return s / static_cast<double>(metrics.size());
    }
};

/// Mean and standard error accumulated in run order.
struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
    int n = 0;

    void add(double v) {
        sum += v;
        sum_sq += v * v;
        ++n;
    }
    double mean() const { return n ? sum / n : 0.0; }
    double standard_error() const {
        if (n < 2) return 0.0;
        const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1));
        return std::sqrt(var / n);
    }
};

struct ExperimentResult {
    std::vector<RunResult> runs;
    std::filesystem::path aggregate;
};

inline RunResult run_once(const io::ExperimentConfig& config, std::uint64_t seed) {
    RunResult r;
    r.seed = seed;
    r.scenario = generate(config.scenario_for(seed));
    r.estimates = track(r.scenario, config.sampler, seed);
    r.metrics = evaluate(r.scenario, r.estimates, config.metric);
    return r;
}

/// Runs all Monte-Carlo seeds, possibly in parallel, and reduces them in run order.
inline std::vector<RunResult> run_experiment(const io::ExperimentConfig& config) {
    config.validate();
    const auto n = static_cast<std::size_t>(config.mc_runs);
    std::vector<RunResult> results(n);
    std::vector<std::exception_ptr> errors(n);
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min<std::size_t>(n, config.threads > 0 ? static_cast<std::size_t>(config.threads) : hw);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                results[i] = run_once(config, config.base_seed + i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const std::exception& e) {
            throw std::runtime_error("run " + std::to_string(i) + " (seed " + std::to_string(config.base_seed + i) +
                                     "): " + e.what());
        }
    }
    return results;
}

/// Per-step mean and standard error of every metric across runs.
inline std::string format_aggregate(const std::vector<RunResult>& runs) {
    std::ostringstream out;
    out << "time,runs,ospa_total_mean,ospa_total_se,ospa_loc_mean,ospa_loc_se,ospa_card_mean,ospa_card_se,"
           "card_error_mean,card_error_se,true_n_mean,est_n_mean,est_n_se,baseline_ospa_mean,baseline_ospa_se\n";
    std::size_t steps = 0;
    for (const auto& r : runs) steps = std::max(steps, r.metrics.size());
    for (std::size_t k = 0; k < steps; ++k) {
        Moments total, loc, card, err, true_n, est_n, base;
        for (const auto& r : runs) {
            if (k >= r.metrics.size()) continue;
            const auto& m = r.metrics[k];
            total.add(m.ospa.total);
            loc.add(m.ospa.loc);
            card.add(m.ospa.card);
            err.add(m.est_n - m.true_n);
            true_n.add(m.true_n);
            est_n.add(m.est_n);
            base.add(m.baseline.total);
        }
        out << k << ',' << total.n;
        for (const Moments* mo : {&total, &loc, &card, &err}) out << ',' << io::fmt(mo->mean()) << ',' << io::fmt(mo->standard_error());
        out << ',' << io::fmt(true_n.mean()) << ',' << io::fmt(est_n.mean()) << ',' << io::fmt(est_n.standard_error());
        out << ',' << io::fmt(base.mean()) << ',' << io::fmt(base.standard_error()) << '\n';
    }
    return out.str();
}

inline std::string format_runs(const std::vector<RunResult>& runs) {
    std::ostringstream out;
    out << "run,seed,mean_ospa,baseline_mean_ospa,cardinality_accuracy\n";
    for (std::size_t i = 0; i < runs.size(); ++i)
        out << i << ',' << runs[i].seed << ',' << io::fmt(runs[i].mean_ospa()) << ',' << io::fmt(runs[i].mean_baseline())
            << ',' << io::fmt(runs[i].cardinality_accuracy()) << '\n';
    return out.str();
}

/// Writes experiment.csv (per-step aggregate), experiment_runs.csv (per-run
/// summary) and, for the first run, truth.csv, estimates.csv and
/// cardinality.csv for trajectory plots.
inline ExperimentResult cmd_experiment(const io::ExperimentConfig& config, std::ostream& log) {
    ExperimentResult res;
    res.runs = run_experiment(config);
    const std::filesystem::path dir = config.output_dir;
    res.aggregate = dir / "experiment.csv";
    io::write_atomic(res.aggregate, format_aggregate(res.runs));
    io::write_atomic(dir / "experiment_runs.csv", format_runs(res.runs));
    const RunResult& first = res.runs.front();
    io::write_atomic(dir / "truth.csv", format_truth(first.scenario));
    io::write_atomic(dir / "estimates.csv", io::format_estimates(first.estimates));
    io::write_atomic(dir / "cardinality.csv", io::format_cardinality(first.scenario.true_counts(), first.estimates));
    io::write_atomic(dir / "metrics.csv", format_metrics(first.metrics));

    Moments ospa_m, base_m, acc_m;
    for (const auto& r : res.runs) {
        ospa_m.add(r.mean_ospa());
        base_m.add(r.mean_baseline());
        acc_m.add(r.cardinality_accuracy());
    }
    log << "runs " << res.runs.size() << "\n"
        << "mean_ospa " << io::fmt(ospa_m.mean()) << "\n"
        << "baseline_mean_ospa " << io::fmt(base_m.mean()) << "\n"
        << "cardinality_accuracy " << io::fmt(acc_m.mean()) << "\n";
    return res;
}

}  // namespace spawntrack::app
