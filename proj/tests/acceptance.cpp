#include "oracles.hpp"

#include "spawntrack/spawntrack.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace spawntrack;

namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double time_limit_s, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < time_limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s criterion %d (%s): %s; %.2f s (limit %.0f s)%s\n", pass ? "PASS" : "FAIL", id, name,
                o.detail.c_str(), secs, time_limit_s, in_time ? "" : " TIMEOUT");
    std::fflush(stdout);
}

std::string num(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

std::vector<Vec2> random_set(Rng& rng) {
    const auto n = static_cast<std::size_t>(uniform01(rng) * 6);
    std::vector<Vec2> s;
    for (std::size_t i = 0; i < n; ++i) s.emplace_back(150 * uniform01(rng), 150 * uniform01(rng));
    return s;
}

Outcome ospa_oracle() {
    Rng rng = make_rng(1001);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const auto x = random_set(rng), y = random_set(rng);
        worst = std::max(worst, std::abs(ospa(x, y, {1.0, 100.0}).total - oracle::ospa_brute(x, y, 1.0, 100.0)));
    }
    return {worst <= 1e-9, "max |ospa - brute| = " + num(worst)};
}

Outcome ddp_sanity() {
    Rng rng = make_rng(1002);
    std::uniform_int_distribution<int> len(0, 12), cnt(0, 9);
    double worst_sum = 0.0;
    int crp_mismatch = 0;
    for (int t = 0; t < 10000; ++t) {
        DdpCounts c;
        const int k = len(rng);
        for (int j = 0; j < k; ++j) {
            c.survived.push_back(cnt(rng));
            c.current.push_back(cnt(rng));
        }
        c.alpha = 0.01 + 20.0 * uniform01(rng);
        double s = 0.0;
        for (double v : ddp_assignment_probabilities(c)) s += v;
        worst_sum = std::max(worst_sum, std::abs(s - 1.0));

        std::fill(c.survived.begin(), c.survived.end(), 0);
        const auto p = ddp_assignment_probabilities(c);
        double n = 0.0;
        for (int v : c.current) n += v;
        std::vector<double> q;
        for (int v : c.current) q.push_back(v / (c.alpha + n));
        q.push_back(c.alpha / (c.alpha + n));
        if (p != q) ++crp_mismatch;
    }
    return {worst_sum <= 1e-12 && crp_mismatch == 0,
            "max |sum - 1| = " + num(worst_sum) + ", CRP mismatches = " + std::to_string(crp_mismatch)};
}

Outcome ibp_statistics() {
    Rng rng = make_rng(1003);
    const int n = 100000;
    double sk = 0, skk = 0, so = 0, soo = 0;
    for (int i = 0; i < n; ++i) {
        const BinaryMatrix m = ibp_sample_matrix(1.0, 3, rng);
        const double k = static_cast<double>(m.cols()), o = m.sum() / 3.0;
        sk += k;
        skk += k * k;
        so += o;
        soo += o * o;
    }
    const double mk = sk / n, mo = so / n;
    const double sek = std::sqrt((skk / n - mk * mk) / n), seo = std::sqrt((soo / n - mo * mo) / n);
    const double h3 = 1.0 + 1.0 / 2.0 + 1.0 / 3.0;
    const double zk = (mk - h3) / sek, zo = (mo - 1.0) / seo;
    return {std::abs(zk) <= 3.0 && std::abs(zo) <= 3.0,
            "columns " + num(mk) + " (z=" + num(zk, 2) + "), ones/row " + num(mo) + " (z=" + num(zo, 2) + ")"};
}

Outcome frozen_scene() {
    SamplerConfig config;
    config.enable_states = false;
    config.enable_hyper = false;
    const std::vector<Vec2> ys = {Vec2(101, 101), Vec2(112, 99)};
    ChainState prev = ChainState::initial(config);
    prev.time = 0;
    Track a;
    a.label = 0;
    a.prev_mean = Vec4(100, 100, 0, 0);
    a.prev_cov = Mat4::Identity();
    Track b = a;
    b.label = 1;
    b.prev_mean = Vec4(120, 100, 0, 0);
    prev.tracks.add_survivor(a);
    prev.tracks.add_survivor(b);
    ChainState c = detail::begin_step(prev, ys, config);
    c.gamma = 1.0;

    oracle::SceneOracle o;
    for (const auto& t : c.tracks.tracks()) o.survivors.push_back(t);
    o.ys = ys;
    o.config = config;
    o.gamma = c.gamma;
    const auto exact = o.posterior();

    Rng rng = make_rng(1004);
    std::map<std::string, double> freq;
    const int sweeps = 100000;
    for (int i = 0; i < 1000; ++i) sweep(c, ys, config, rng);
    for (int i = 0; i < sweeps; ++i) {
        sweep(c, ys, config, rng);
        freq[oracle::scene_key(c)] += 1.0 / sweeps;
    }
    const double tv = oracle::total_variation(freq, exact);
    return {tv <= 0.05, "TV = " + num(tv) + " over " + std::to_string(exact.size()) + " configurations"};
}

Outcome exact_conditional() {
    SamplerConfig config;
    Track t;
    t.label = 0;
    t.survived_from_prev = true;
    t.prev_mean = Vec4(50, 60, 2, -1);
    t.prev_cov << 4, 0, 1, 0,
                  0, 3, 0, 0.5,
                  1, 0, 2, 0,
                  0, 0.5, 0, 1;
    t.state = t.predicted_mean(config.motion);
    ChainState c;
    c.time = 1;
    c.tracks.insert(t);
    c.alloc = AllocationMatrix(1);
    c.alloc.set(0, c.alloc.add_column(0), true);
    const std::vector<Vec2> ys = {Vec2(54, 57)};
    const GaussianState g = state_conditional(0, c, ys, config);

    const Vec4 pm = t.predicted_mean(config.motion);
    const Mat4 pc = t.predicted_cov(config.motion);
    auto logpost = [&](const Vec4& x) {
        const double dx = ys[0](0) - x(0), dy = ys[0](1) - x(1);
        return oracle::log_gauss(x, pm, pc) - (dx * dx + dy * dy) / (2 * config.meas.sigma_o_sq);
    };
    const auto grid = oracle::grid_moments(logpost, pm, 6.0 * pc.diagonal().cwiseSqrt(), 41);
    double worst_mean = 0.0, worst_var = 0.0;
    for (int i = 0; i < 4; ++i) {
        worst_mean = std::max(worst_mean, std::abs(g.mean(i) - grid.mean(i)) / std::sqrt(grid.var(i)));
        worst_var = std::max(worst_var, std::abs(g.cov(i, i) - grid.var(i)) / grid.var(i));
    }
    return {worst_mean <= 0.02 && worst_var <= 0.02,
            "max mean error " + num(100 * worst_mean, 3) + "% of sd, max variance error " + num(100 * worst_var, 3) +
                "%"};
}

Outcome end_to_end() {
    io::ExperimentConfig config;
    config.scenario = "paper4";
    config.mc_runs = 50;
    const auto runs = app::run_experiment(config);
    double ospa_sum = 0.0, base_sum = 0.0;
    long steps = 0, correct = 0;
    for (const auto& r : runs) {
        ospa_sum += r.mean_ospa();
        base_sum += r.mean_baseline();
        for (const auto& m : r.metrics) {
            ++steps;
            correct += m.est_n == m.true_n;
        }
    }
    const double ratio = ospa_sum / base_sum;
    const double accuracy = static_cast<double>(correct) / static_cast<double>(steps);
    const bool a = ratio <= 0.5, b = accuracy >= 0.8;
    return {a && b, std::string("(a) ") + (a ? "pass" : "fail") + " mean OSPA " + num(ospa_sum / runs.size()) +
                        " vs baseline " + num(base_sum / runs.size()) + " (ratio " + num(ratio, 3) +
                        ", need <= 0.5); (b) " + (b ? "pass" : "fail") + " cardinality accuracy " +
                        num(100 * accuracy, 3) + "% (need >= 80%)"};
}

Outcome scale_check() {
    io::ExperimentConfig config;
    config.scenario = "paper10";
    config.mc_runs = 10;
    config.sampler.check_invariants = true;
    const auto runs = app::run_experiment(config);
    double sum = 0.0;
    for (const auto& r : runs) sum += r.mean_ospa();
    const double mean = sum / runs.size();
    return {mean < config.metric.cutoff, "mean OSPA " + num(mean) + " over " + std::to_string(runs.size()) +
                                             " runs, invariants checked every sweep"};
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "spawntrack_acceptance_determinism";
    fs::remove_all(root);
    io::ExperimentConfig config;
    config.scenario = "paper4";
    config.mc_runs = 4;
    config.threads = 2;
    std::ostringstream log;
    config.output_dir = (root / "a").string();
    app::cmd_experiment(config, log);
    config.output_dir = (root / "b").string();
    app::cmd_experiment(config, log);
    int files = 0, differing = 0;
    for (const auto& entry : fs::directory_iterator(root / "a")) {
        ++files;
        const fs::path other = root / "b" / entry.path().filename();
        if (!fs::exists(other) || io::read_file(entry.path()) != io::read_file(other)) ++differing;
    }
    fs::remove_all(root);
    return {files == 6 && differing == 0,
            std::to_string(files) + " CSV files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
    criterion(1, "OSPA oracle equivalence", 10, ospa_oracle);
    criterion(2, "DDP predictive sanity", 5, ddp_sanity);
    criterion(3, "IBP statistics", 30, ibp_statistics);
    criterion(4, "sampler vs enumeration", 120, frozen_scene);
    criterion(5, "exact state conditional", 60, exact_conditional);
    criterion(6, "end-to-end tracking, 4 objects", 600, end_to_end);
    criterion(7, "scale check, 10 objects", 900, scale_check);
    criterion(8, "determinism", 600, determinism);
    std::printf("%d of 8 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
