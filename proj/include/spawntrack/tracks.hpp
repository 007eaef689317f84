#pragma once

#include "spawntrack/dynamics.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spawntrack {

/// Opaque object identity; never reused within a run.
using Label = std::uint64_t;

/// One object hypothesis at the current time step.
struct Track {
    Label label = 0;
    ObjectState state = ObjectState::Zero();
    int alive_since = 0;
    /// True iff the label existed at k-1.
    bool survived_from_prev = false;
    /// Surviving objects may be switched off by the survival move within a step.
    bool alive = true;
    /// Posterior moments of the state at k-1 (survivors only).
    Vec4 prev_mean = Vec4::Zero();
    Mat4 prev_cov = Mat4::Zero();

    /// Gaussian prior over the state at k implied by the k-1 posterior.
    Vec4 predicted_mean(const MotionModel& motion) const { return motion.transition() * prev_mean; }
    Mat4 predicted_cov(const MotionModel& motion) const {
        const Mat4 a = motion.transition();
        Mat4 cov = a * prev_cov * a.transpose() + motion.density_cov();
        return 0.5 * (cov + cov.transpose());
    }
};

/// Object hypotheses at time k, dead survivors included until the step ends.
class TrackSet {
public:
    const std::vector<Track>& tracks() const { return tracks_; }
    std::vector<Track>& tracks() { return tracks_; }

    std::size_t size() const { return tracks_.size(); }

    std::size_t num_alive() const {
        return static_cast<std::size_t>(std::count_if(tracks_.begin(), tracks_.end(), [](const Track& t) { return t.alive; }));
    }

    Track* find(Label label) {
        auto it = std::find_if(tracks_.begin(), tracks_.end(), [&](const Track& t) { return t.label == label; });
        return it == tracks_.end() ? nullptr : &*it;
    }
    const Track* find(Label label) const {
        auto it = std::find_if(tracks_.begin(), tracks_.end(), [&](const Track& t) { return t.label == label; });
        return it == tracks_.end() ? nullptr : &*it;
    }

    const Track& at(Label label) const {
        const Track* t = find(label);
        if (!t) throw std::invalid_argument("TrackSet: unknown label " + std::to_string(label));
        return *t;
    }
    Track& at(Label label) {
        Track* t = find(label);
        if (!t) throw std::invalid_argument("TrackSet: unknown label " + std::to_string(label));
        return *t;
    }

    /// Adds a newborn object with a fresh label.
    Track& add_newborn(const ObjectState& state, int time) {
        Track t;
        t.label = next_label_++;
        t.state = state;
        t.alive_since = time;
        tracks_.push_back(t);
        return tracks_.back();
    }

    /// Adds an object under an existing label (labels must be unique).
    Track& insert(Track t) {
        if (find(t.label)) throw std::invalid_argument("TrackSet: duplicate label " + std::to_string(t.label));
        next_label_ = std::max(next_label_, t.label + 1);
        tracks_.push_back(std::move(t));
        return tracks_.back();
    }

    Track& add_survivor(Track t) {
        t.survived_from_prev = true;
        return insert(std::move(t));
    }

    void erase(Label label) {
        std::erase_if(tracks_, [&](const Track& t) { return t.label == label; });
    }

    Label next_label() const { return next_label_; }
    void reserve_labels_below(Label label) { next_label_ = std::max(next_label_, label); }

private:
    std::vector<Track> tracks_;
    Label next_label_ = 0;
};

}  // namespace spawntrack
