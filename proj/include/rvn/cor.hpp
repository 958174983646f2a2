#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "rvn/core.hpp"
#include "rvn/kinematics.hpp"

namespace rvn {

/// Fixed-length sequence of egocentric waypoints (meters).
struct CandidateTrajectory {
    std::vector<Vec2> waypoints;

    std::size_t size() const { return waypoints.size(); }
    friend bool operator==(const CandidateTrajectory&, const CandidateTrajectory&) = default;
};

struct CorConfig {
    double alpha = 1.0;
    std::size_t k = 8;
    // Score each expert against the other experts only.
    bool leave_one_out = false;
    // Pick the highest-scoring expert instead of the lowest.
    bool maximize = false;

    void validate() const {
        if (!(alpha > 0.0)) throw Error(ErrorCode::invalid_argument, "alpha must be > 0");
        if (k < 1) throw Error(ErrorCode::invalid_argument, "k must be >= 1");
    }
};

/// Squared Euclidean distance between two trajectories viewed as 2L-vectors.
inline double squared_trajectory_distance(const CandidateTrajectory& a, const CandidateTrajectory& b) {
    if (a.size() != b.size()) throw Error(ErrorCode::invalid_argument, "trajectories differ in length");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a.waypoints[i] - b.waypoints[i]).squared_norm();
    return sum;
}

/// Root-mean-square distance from `a` to the members of `set`.
inline double set_distance(const CandidateTrajectory& a, std::span<const CandidateTrajectory> set) {
    if (set.empty()) throw Error(ErrorCode::invalid_argument, "set_distance over an empty set");
    double sum = 0.0;
    for (const auto& x : set) sum += squared_trajectory_distance(a, x);
    return std::sqrt(sum / static_cast<double>(set.size()));
}

/// Student-t kernel weight of a set distance.
inline double cor_weight(double d, double alpha) { return std::pow(1.0 + d / alpha, -(alpha + 1.0) / 2.0); }

/// Kernel ratio from the two set distances.
inline double cor_from_distances(double d_expert, double d_negative, double alpha) {
    const double we = cor_weight(d_expert, alpha);
    const double wn = cor_weight(d_negative, alpha);
    return we / (we + wn);
}

inline double cor(const CandidateTrajectory& a, std::span<const CandidateTrajectory> experts,
                  std::span<const CandidateTrajectory> negatives, const CorConfig& config = {}) {
    config.validate();
    return cor_from_distances(set_distance(a, experts), set_distance(a, negatives), config.alpha);
}

struct CorSelection {
    std::size_t index = 0;
    CandidateTrajectory chosen;
    std::vector<double> scores;  // one per expert candidate
};

/// Scores every expert candidate against both sets and keeps the minimum
/// (or maximum, with config.maximize). Ties go to the lowest index.
inline CorSelection select(std::span<const CandidateTrajectory> experts, std::span<const CandidateTrajectory> negatives,
                           const CorConfig& config = {}) {
    config.validate();
    if (experts.empty() || negatives.empty()) throw Error(ErrorCode::invalid_argument, "candidate sets must be nonempty");
    const std::size_t length = experts.front().size();
    for (auto set : {experts, negatives})
        for (const auto& c : set)
            if (c.size() != length) throw Error(ErrorCode::invalid_argument, "candidates differ in length");

    CorSelection out;
    out.scores.reserve(experts.size());
    for (std::size_t i = 0; i < experts.size(); ++i) {
        double d_expert = 0.0;
        if (config.leave_one_out && experts.size() > 1) {
            std::vector<CandidateTrajectory> others;
            for (std::size_t j = 0; j < experts.size(); ++j)
                if (j != i) others.push_back(experts[j]);
            d_expert = set_distance(experts[i], others);
        } else {
            d_expert = set_distance(experts[i], experts);
        }
        out.scores.push_back(cor_from_distances(d_expert, set_distance(experts[i], negatives), config.alpha));
    }
    for (std::size_t i = 1; i < out.scores.size(); ++i) {
        const bool better = config.maximize ? out.scores[i] > out.scores[out.index] : out.scores[i] < out.scores[out.index];
        if (better) out.index = i;
    }
    out.chosen = experts[out.index];
    return out;
}

/// Discrete action that best follows a predicted trajectory.
inline Action trajectory_to_action(const CandidateTrajectory& chosen, const AgentSpec& spec) {
    if (chosen.waypoints.empty()) throw Error(ErrorCode::invalid_argument, "trajectory must be nonempty");
    Vec2 target = chosen.waypoints.back();
    for (const Vec2& w : chosen.waypoints) {
        if (w.norm() >= spec.d_step) {
            target = w;
            break;
        }
    }
    if (target.norm() < 0.05) return Action::stop;
    const double bearing = std::atan2(target.y, target.x);
    if (std::abs(bearing) > spec.theta_step / 2.0) return bearing > 0 ? Action::turn_left : Action::turn_right;
    return Action::move_forward;
}

}  // namespace rvn
