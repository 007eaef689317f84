#pragma once

#include "spawntrack/dynamics.hpp"
#include "spawntrack/inference.hpp"
#include "spawntrack/random.hpp"
#include "spawntrack/tracks.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spawntrack {

/// An object whose birth and death times are fixed in advance. A spawned object
/// starts at its parent's current state plus `initial` as an offset.
struct ScheduledObject {
    int birth_step = 0;
    /// First step at which the object is gone; -1 keeps it to the end.
    int death_step = -1;
    ObjectState initial = ObjectState::Zero();
    /// Index into the schedule of the parent for spawned objects.
    std::optional<std::size_t> spawn_parent;
};

struct ScenarioConfig {
    int num_steps = 100;
    MotionModel motion;
    MeasurementModel meas;
    double birth_rate = 0.2;
    double survival_prob = 0.99;
    double spawn_prob = 0.5;
    double spawn_radius = 10.0;
    std::vector<ObjectState> initial_objects;
    std::vector<ScheduledObject> schedule;
    Region region;
    /// Source of newborn velocities.
    NiwParams birth_niw;
    std::uint64_t seed = 1;

    void validate() const {
        if (num_steps < 0) throw std::invalid_argument("ScenarioConfig: num_steps must be >= 0");
        motion.validate();
        meas.validate();
        region.validate();
        birth_niw.validate();
        if (!(birth_rate >= 0.0)) throw std::invalid_argument("ScenarioConfig: birth_rate must be >= 0");
        if (!(survival_prob >= 0.0 && survival_prob <= 1.0))
            throw std::invalid_argument("ScenarioConfig: survival_prob outside [0, 1]");
        if (!(spawn_prob >= 0.0 && spawn_prob <= 1.0))
            throw std::invalid_argument("ScenarioConfig: spawn_prob outside [0, 1]");
        if (!(spawn_radius > 0.0)) throw std::invalid_argument("ScenarioConfig: spawn_radius must be positive");
        for (std::size_t i = 0; i < schedule.size(); ++i) {
            const auto& s = schedule[i];
            if (s.birth_step < 0 || (s.death_step >= 0 && s.death_step <= s.birth_step))
                throw std::invalid_argument("ScenarioConfig: bad schedule entry " + std::to_string(i));
            if (s.spawn_parent && *s.spawn_parent >= i)
                throw std::invalid_argument("ScenarioConfig: spawn parent must precede entry " + std::to_string(i));
        }
        for (const auto& x : initial_objects) check_finite(x);
    }
};

struct LabeledState {
    Label label = 0;
    ObjectState state = ObjectState::Zero();
};

struct Measurement {
    Vec2 value = Vec2::Zero();
    std::vector<Label> origins;
};

/// Ground truth and measurements per time step.
struct Scenario {
    std::vector<std::vector<LabeledState>> truth;
    std::vector<std::vector<Measurement>> measurements;
    std::uint64_t seed = 0;
    /// Free-form "key=value" lines echoed into the scenario file header.
    std::vector<std::string> header;

    int num_steps() const { return static_cast<int>(truth.size()); }

    std::vector<std::vector<Vec2>> measurement_values() const {
        std::vector<std::vector<Vec2>> out(measurements.size());
        for (std::size_t k = 0; k < measurements.size(); ++k)
            for (const auto& m : measurements[k]) out[k].push_back(m.value);
        return out;
    }

    std::vector<int> true_counts() const {
        std::vector<int> n;
        for (const auto& t : truth) n.push_back(static_cast<int>(t.size()));
        return n;
    }

    int peak_cardinality() const {
        int peak = 0;
        for (const auto& t : truth) peak = std::max(peak, static_cast<int>(t.size()));
        return peak;
    }

    /// Number of measurements with more than one origin.
    int spawn_events() const {
        int n = 0;
        for (const auto& step : measurements)
            for (const auto& m : step)
                if (m.origins.size() > 1) ++n;
        return n;
    }
};

/// Velocity draw from the NIW predictive (Student-t marginal of the velocity block).
inline Vec2 sample_birth_velocity(const NiwParams& niw, Rng& rng) {
    const StudentT4 t = niw_predictive(niw);
    const Mat2 scale = t.scale.bottomRightCorner<2, 2>();
    const Vec2 z = sample_gaussian<2>(Vec2::Zero(), scale, rng);
    const double w = sample_gamma(0.5 * t.dof, 0.5 * t.dof, rng);
    return t.location.tail<2>() + z / std::sqrt(w);
}

namespace detail {

/// Groups objects into measurement origins: proximity components of size > 1
/// merge with probability spawn_prob, everything else is a singleton.
inline std::vector<std::vector<std::size_t>> group_origins(const std::vector<LabeledState>& objects, double radius,
                                                           double spawn_prob, Rng& rng) {
    const std::size_t n = objects.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto root = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if ((position_of(objects[i].state) - position_of(objects[j].state)).norm() <= radius)
                parent[root(i)] = root(j);

    std::map<std::size_t, std::vector<std::size_t>> components;
    for (std::size_t i = 0; i < n; ++i) components[root(i)].push_back(i);
    std::vector<std::vector<std::size_t>> groups;
    for (auto& [r, members] : components) {
        if (members.size() > 1 && uniform01(rng) < spawn_prob) {
            groups.push_back(members);
        } else {
            for (auto i : members) groups.push_back({i});
        }
    }
    std::sort(groups.begin(), groups.end());
    return groups;
}

}  // namespace detail

/// Generates a scenario: survival and transition for every object, Poisson
/// births, one measurement per object except where nearby objects merge into a
/// shared multi-origin measurement.
inline Scenario generate(const ScenarioConfig& config) {
    config.validate();
    Rng rng = make_rng(config.seed, 0x51u);
    Scenario sc;
    sc.seed = config.seed;
    sc.truth.resize(static_cast<std::size_t>(config.num_steps));
    sc.measurements.resize(static_cast<std::size_t>(config.num_steps));

    struct Live {
        Label label;
        ObjectState state;
        std::optional<std::size_t> scheduled;
    };
    std::vector<Live> live;
    std::map<std::size_t, Label> schedule_labels;
    Label next_label = 0;

    for (int k = 0; k < config.num_steps; ++k) {
        const std::size_t prev_count = live.size();
        int deaths = 0, births = 0;
        if (k == 0) {
            for (const auto& x : config.initial_objects) {
                live.push_back({next_label++, x, std::nullopt});
                ++births;
            }
        } else {
            std::vector<Live> next;
            for (const auto& obj : live) {
                bool survives = true;
                if (obj.scheduled) {
                    const auto& s = config.schedule[*obj.scheduled];
                    survives = s.death_step < 0 || k < s.death_step;
                } else {
                    survives = uniform01(rng) < config.survival_prob;
                }
                if (!survives) {
                    ++deaths;
                    continue;
                }
                next.push_back({obj.label, transition_sample(obj.state, config.motion, rng), obj.scheduled});
            }
            live = std::move(next);
            const int fresh = sample_poisson(config.birth_rate, rng);
            for (int i = 0; i < fresh; ++i) {
                ObjectState x;
                x(0) = config.region.x_min + uniform01(rng) * (config.region.x_max - config.region.x_min);
                x(1) = config.region.y_min + uniform01(rng) * (config.region.y_max - config.region.y_min);
                x.tail<2>() = sample_birth_velocity(config.birth_niw, rng);
                live.push_back({next_label++, x, std::nullopt});
                ++births;
            }
        }
        for (std::size_t i = 0; i < config.schedule.size(); ++i) {
            const auto& s = config.schedule[i];
            if (s.birth_step != k) continue;
            ObjectState x = s.initial;
            if (s.spawn_parent) {
                const auto pl = schedule_labels.find(*s.spawn_parent);
                const auto parent = pl == schedule_labels.end()
                                        ? live.end()
                                        : std::find_if(live.begin(), live.end(), [&](const Live& o) { return o.label == pl->second; });
                if (parent == live.end())
                    throw std::invalid_argument("generate: spawn parent of entry " + std::to_string(i) + " is not alive");
                x = parent->state + s.initial;
            }
            schedule_labels[i] = next_label;
            live.push_back({next_label++, x, i});
            ++births;
        }
        if (live.size() != prev_count - static_cast<std::size_t>(deaths) + static_cast<std::size_t>(births))
            throw std::logic_error("generate: cardinality bookkeeping broken at step " + std::to_string(k));

        auto& truth = sc.truth[static_cast<std::size_t>(k)];
        for (const auto& obj : live) truth.push_back({obj.label, obj.state});

        const auto groups = detail::group_origins(truth, config.spawn_radius, config.spawn_prob, rng);
        auto& meas = sc.measurements[static_cast<std::size_t>(k)];
        for (const auto& g : groups) {
            std::vector<ObjectState> states;
            Measurement m;
            for (auto i : g) {
                states.push_back(truth[i].state);
                m.origins.push_back(truth[i].label);
            }
            const double sd = std::sqrt(config.meas.sigma_o_sq);
            m.value = measurement_mean(states, config.meas) + Vec2(sd * standard_normal(rng), sd * standard_normal(rng));
            meas.push_back(std::move(m));
        }
    }
    return sc;
}

/// Canned configuration with four objects at peak over 100 steps, staggered
/// births and deaths, and one object spawned from another.
inline ScenarioConfig paper_config_4(std::uint64_t seed) {
    ScenarioConfig c;
    c.num_steps = 100;
    c.birth_rate = 0.0;
    c.survival_prob = 1.0;
    c.spawn_prob = 1.0;
    c.seed = seed;
    auto obj = [](int birth, int death, double x, double y, double vx, double vy) {
        ScheduledObject s;
        s.birth_step = birth;
        s.death_step = death;
        s.initial << x, y, vx, vy;
        return s;
    };
    c.schedule = {
        obj(0, 70, 200.0, 300.0, 3.0, 1.0),
        obj(0, -1, 700.0, 250.0, -2.0, 3.0),
        obj(15, 85, 400.0, 800.0, 1.0, -3.0),
    };
    ScheduledObject spawn = obj(40, -1, 0.0, 0.0, 2.0, -2.0);
    spawn.spawn_parent = 1;
    c.schedule.push_back(spawn);
    return c;
}

/// Canned configuration with ten objects at peak over 100 steps and two spawn events.
inline ScenarioConfig paper_config_10(std::uint64_t seed) {
    ScenarioConfig c;
    c.num_steps = 100;
    c.birth_rate = 0.0;
    c.survival_prob = 1.0;
    c.spawn_prob = 1.0;
    c.seed = seed;
    auto obj = [](int birth, int death, double x, double y, double vx, double vy) {
        ScheduledObject s;
        s.birth_step = birth;
        s.death_step = death;
        s.initial << x, y, vx, vy;
        return s;
    };
    c.schedule = {
        obj(0, -1, 100.0, 100.0, 3.0, 2.0),   obj(0, 80, 900.0, 150.0, -3.0, 2.0),
        obj(0, -1, 500.0, 900.0, 0.0, -3.0),  obj(5, 90, 150.0, 600.0, 3.0, 0.0),
        obj(10, -1, 850.0, 700.0, -2.0, -2.0), obj(15, 75, 300.0, 400.0, 2.0, 3.0),
        obj(20, -1, 650.0, 450.0, -1.0, 3.0), obj(25, 95, 450.0, 150.0, 1.0, 2.0),
    };
    ScheduledObject a = obj(35, -1, 0.0, 0.0, 2.0, -2.0);
    a.spawn_parent = 2;
    ScheduledObject b = obj(45, 90, 0.0, 0.0, -2.0, 2.0);
    b.spawn_parent = 4;
    c.schedule.push_back(a);
    c.schedule.push_back(b);
    return c;
}

inline Scenario paper_scenario_4(std::uint64_t seed) { return generate(paper_config_4(seed)); }
inline Scenario paper_scenario_10(std::uint64_t seed) { return generate(paper_config_10(seed)); }

}  // namespace spawntrack
