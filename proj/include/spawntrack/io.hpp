#pragma once

#include "spawntrack/inference.hpp"
#include "spawntrack/metrics.hpp"
#include "spawntrack/simulator.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spawntrack::io {

/// Malformed input file (config, scenario or CSV).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Fixed formatting for every number written, so identical runs give identical bytes.
inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_double(const std::string& s, std::string_view what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw FormatError("bad number for " + std::string(what) + ": '" + s + "'");
    }
}

inline long long parse_int(const std::string& s, std::string_view what) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw FormatError("bad integer for " + std::string(what) + ": '" + s + "'");
    }
}

/// Writes `content` to `path` through a temporary file and a rename, so a
/// failure never leaves a partial file behind.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) {
            std::filesystem::remove(tmp);
            throw std::runtime_error("failed writing " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- experiment configuration ----

/// Everything a command needs: scenario, sampler, metric and Monte-Carlo settings.
struct ExperimentConfig {
    /// paper4, paper10 or custom
    std::string scenario = "paper4";
    ScenarioConfig scenario_config;
    SamplerConfig sampler;
    OspaParams metric;
    int mc_runs = 50;
    std::uint64_t base_seed = 1;
    std::string output_dir = "out";
    /// Worker threads for Monte-Carlo runs; 0 uses the hardware concurrency.
    int threads = 0;

    void validate() const {
        if (scenario != "paper4" && scenario != "paper10" && scenario != "custom")
            throw std::invalid_argument("scenario must be paper4, paper10 or custom");
        if (mc_runs < 1) throw std::invalid_argument("mc_runs must be >= 1");
        if (threads < 0) throw std::invalid_argument("threads must be >= 0");
        scenario_config.validate();
        sampler.validate();
        metric.validate();
    }

    /// Scenario configuration for one seed.
    ScenarioConfig scenario_for(std::uint64_t seed) const {
        if (scenario == "paper4") return paper_config_4(seed);
        if (scenario == "paper10") return paper_config_10(seed);
        ScenarioConfig c = scenario_config;
        c.seed = seed;
        return c;
    }
};

namespace detail {

inline bool parse_bool(const std::string& v, std::string_view key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw FormatError("bad boolean for " + std::string(key) + ": '" + v + "'");
}

}  // namespace detail

/// Parses the flat `key = value` format. '#' starts a comment; unknown keys
/// and malformed values are errors. `initial_object = x, y, vx, vy` may repeat.
inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig c;
    std::map<std::string, std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key != "initial_object" && seen.count(key))
            throw FormatError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        seen[key] = value;

        auto num = [&] { return parse_double(value, key); };
        auto integer = [&] { return parse_int(value, key); };
        auto& sc = c.scenario_config;
        auto& sm = c.sampler;

        if (key == "scenario") c.scenario = value;
        else if (key == "num_steps") sc.num_steps = static_cast<int>(integer());
        else if (key == "birth_rate") sc.birth_rate = num();
        else if (key == "scenario_survival_prob") sc.survival_prob = num();
        else if (key == "spawn_prob") sc.spawn_prob = num();
        else if (key == "spawn_radius") sc.spawn_radius = num();
        else if (key == "region_x_min") sc.region.x_min = sm.region.x_min = num();
        else if (key == "region_x_max") sc.region.x_max = sm.region.x_max = num();
        else if (key == "region_y_min") sc.region.y_min = sm.region.y_min = num();
        else if (key == "region_y_max") sc.region.y_max = sm.region.y_max = num();
        else if (key == "initial_object") {
            const auto parts = split(value, ',');
            if (parts.size() != 4) throw FormatError("line " + std::to_string(lineno) + ": initial_object needs x, y, vx, vy");
            ObjectState x;
            for (int i = 0; i < 4; ++i) x(i) = parse_double(parts[static_cast<std::size_t>(i)], key);
            sc.initial_objects.push_back(x);
        } else if (key == "dt") sc.motion.dt = sm.motion.dt = num();
        else if (key == "sigma_s") sc.motion.sigma_s = sm.motion.sigma_s = num();
        else if (key == "sigma_o_sq") sc.meas.sigma_o_sq = sm.meas.sigma_o_sq = num();
        else if (key == "survival_prob") sm.motion.survival_prob = num();
        else if (key == "detection_prob") sm.detection_prob = num();
        else if (key == "missed_detection_penalty") sm.missed_detection_penalty = detail::parse_bool(value, key);
        else if (key == "burn_in") sm.burn_in = static_cast<int>(integer());
        else if (key == "samples") sm.samples = static_cast<int>(integer());
        else if (key == "alpha_shape") sm.alpha_shape = num();
        else if (key == "alpha_rate") sm.alpha_rate = num();
        else if (key == "gamma_shape") sm.gamma_shape = num();
        else if (key == "gamma_rate") sm.gamma_rate = num();
        else if (key == "niw_mu0") sm.niw.mean = sc.birth_niw.mean = Vec4::Constant(num());
        else if (key == "niw_kappa0") sm.niw.kappa = sc.birth_niw.kappa = num();
        else if (key == "niw_nu") sm.niw.dof = sc.birth_niw.dof = num();
        else if (key == "niw_psi_scale") sm.niw.scatter = sc.birth_niw.scatter = num() * Mat4::Identity();
        else if (key == "carry") {
            if (value == "moment_matched") sm.carry = CarryPolicy::moment_matched;
            else if (value == "last_sample") sm.carry = CarryPolicy::last_sample;
            else throw FormatError("carry must be moment_matched or last_sample");
        } else if (key == "ospa_p") c.metric.order = num();
        else if (key == "ospa_c") c.metric.cutoff = num();
        else if (key == "mc_runs") c.mc_runs = static_cast<int>(integer());
        else if (key == "base_seed") c.base_seed = static_cast<std::uint64_t>(integer());
        else if (key == "output_dir") c.output_dir = value;
        else if (key == "threads") c.threads = static_cast<int>(integer());
        else throw FormatError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

// ---- scenario file ----

/// `key=value` lines describing a scenario configuration, for file headers.
inline std::vector<std::string> echo_scenario_config(const ScenarioConfig& c) {
    std::vector<std::string> out = {
        "dt=" + fmt(c.motion.dt),
        "sigma_s=" + fmt(c.motion.sigma_s),
        "sigma_o_sq=" + fmt(c.meas.sigma_o_sq),
        "birth_rate=" + fmt(c.birth_rate),
        "scenario_survival_prob=" + fmt(c.survival_prob),
        "spawn_prob=" + fmt(c.spawn_prob),
        "spawn_radius=" + fmt(c.spawn_radius),
        "region=" + fmt(c.region.x_min) + "," + fmt(c.region.x_max) + "," + fmt(c.region.y_min) + "," +
            fmt(c.region.y_max),
        "initial_objects=" + std::to_string(c.initial_objects.size()),
        "scheduled_objects=" + std::to_string(c.schedule.size()),
    };
    return out;
}


/// Plain-text scenario: '#' header (format tag, seed, num_steps, config echo),
/// then a TRUTH section (time,label,x,y,vx,vy) and a MEAS section
/// (time,meas_id,y1,y2,origins) with origins joined by ';'.
inline std::string format_scenario(const Scenario& sc) {
    std::ostringstream out;
    out << "# spawntrack scenario v1\n";
    out << "# seed=" << sc.seed << "\n";
    out << "# num_steps=" << sc.num_steps() << "\n";
    for (const auto& h : sc.header) out << "# " << h << "\n";
    out << "TRUTH\n";
    out << "time,label,x,y,vx,vy\n";
    for (int k = 0; k < sc.num_steps(); ++k)
        for (const auto& t : sc.truth[static_cast<std::size_t>(k)])
            out << k << ',' << t.label << ',' << fmt(t.state(0)) << ',' << fmt(t.state(1)) << ',' << fmt(t.state(2))
                << ',' << fmt(t.state(3)) << '\n';
    out << "MEAS\n";
    out << "time,meas_id,y1,y2,origins\n";
    for (int k = 0; k < sc.num_steps(); ++k) {
        const auto& ms = sc.measurements[static_cast<std::size_t>(k)];
        for (std::size_t j = 0; j < ms.size(); ++j) {
            out << k << ',' << j << ',' << fmt(ms[j].value(0)) << ',' << fmt(ms[j].value(1)) << ',';
            for (std::size_t o = 0; o < ms[j].origins.size(); ++o) out << (o ? ";" : "") << ms[j].origins[o];
            out << '\n';
        }
    }
    return out.str();
}

inline Scenario parse_scenario(const std::string& text) {
    Scenario sc;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    long long num_steps = -1;
    enum class Section { header, truth, meas } section = Section::header;
    bool expect_columns = false;
    auto fail = [&](const std::string& msg) { throw FormatError("scenario line " + std::to_string(lineno) + ": " + msg); };
    auto step_index = [&](const std::string& s) {
        const long long k = parse_int(s, "time");
        if (num_steps < 0) fail("num_steps header missing");
        if (k < 0 || k >= num_steps) fail("time " + s + " outside [0, num_steps)");
        return static_cast<std::size_t>(k);
    };

    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string body = trim(std::string_view(line).substr(1));
            if (body.rfind("seed=", 0) == 0) sc.seed = static_cast<std::uint64_t>(parse_int(body.substr(5), "seed"));
            else if (body.rfind("num_steps=", 0) == 0) {
                num_steps = parse_int(body.substr(10), "num_steps");
                if (num_steps < 0) fail("negative num_steps");
                sc.truth.assign(static_cast<std::size_t>(num_steps), {});
                sc.measurements.assign(static_cast<std::size_t>(num_steps), {});
            } else if (body.rfind("spawntrack", 0) != 0 && !body.empty()) sc.header.push_back(body);
            continue;
        }
        if (line == "TRUTH") {
            section = Section::truth;
            expect_columns = true;
            continue;
        }
        if (line == "MEAS") {
            section = Section::meas;
            expect_columns = true;
            continue;
        }
        if (expect_columns) {
            const char* want = section == Section::truth ? "time,label,x,y,vx,vy" : "time,meas_id,y1,y2,origins";
            if (line != want) fail("expected column header '" + std::string(want) + "'");
            expect_columns = false;
            continue;
        }
        const auto f = split(line, ',');
        if (section == Section::truth) {
            if (f.size() != 6) fail("TRUTH rows need 6 fields");
            LabeledState s;
            const auto k = step_index(f[0]);
            s.label = static_cast<Label>(parse_int(f[1], "label"));
            for (int i = 0; i < 4; ++i) s.state(i) = parse_double(f[static_cast<std::size_t>(i + 2)], "state");
            sc.truth[k].push_back(s);
        } else if (section == Section::meas) {
            if (f.size() != 5) fail("MEAS rows need 5 fields");
            const auto k = step_index(f[0]);
            if (static_cast<std::size_t>(parse_int(f[1], "meas_id")) != sc.measurements[k].size())
                fail("meas_id out of sequence");
            Measurement m;
            m.value = Vec2(parse_double(f[2], "y1"), parse_double(f[3], "y2"));
            if (!f[4].empty())
                for (const auto& o : split(f[4], ';')) m.origins.push_back(static_cast<Label>(parse_int(o, "origin")));
            sc.measurements[k].push_back(std::move(m));
        } else {
            fail("data before TRUTH section");
        }
    }
    if (num_steps < 0) throw FormatError("scenario: num_steps header missing");
    return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) { return parse_scenario(read_file(path)); }

// ---- tracker outputs ----

struct EstimateRow {
    int time = 0;
    Label label = 0;
    ObjectState state = ObjectState::Zero();
};

inline std::string format_estimates(const std::vector<StepEstimate>& est) {
    std::ostringstream out;
    out << "time,label,x,y,vx,vy\n";
    for (const auto& e : est)
        for (const auto& [label, x] : e.states)
            out << e.time << ',' << label << ',' << fmt(x(0)) << ',' << fmt(x(1)) << ',' << fmt(x(2)) << ',' << fmt(x(3))
                << '\n';
    return out.str();
}

inline std::vector<EstimateRow> parse_estimates(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "time,label,x,y,vx,vy")
        throw FormatError("estimates: missing header time,label,x,y,vx,vy");
    std::vector<EstimateRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 6) throw FormatError("estimates line " + std::to_string(lineno) + ": need 6 fields");
        EstimateRow r;
        r.time = static_cast<int>(parse_int(f[0], "time"));
        r.label = static_cast<Label>(parse_int(f[1], "label"));
        for (int i = 0; i < 4; ++i) r.state(i) = parse_double(f[static_cast<std::size_t>(i + 2)], "state");
        rows.push_back(r);
    }
    return rows;
}

inline std::string format_cardinality(const std::vector<int>& true_n, const std::vector<StepEstimate>& est) {
    std::ostringstream out;
    out << "time,true_n,est_n\n";
    for (std::size_t k = 0; k < est.size(); ++k) {
        out << est[k].time << ',';
        if (k < true_n.size()) out << true_n[k];
        out << ',' << est[k].cardinality << '\n';
    }
    return out.str();
}

}  // namespace spawntrack::io
