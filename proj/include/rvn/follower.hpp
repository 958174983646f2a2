#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "rvn/core.hpp"
#include "rvn/grid.hpp"
#include "rvn/kinematics.hpp"

namespace rvn {

struct FollowerParams {
    double lookahead = 0.5;      // arc length ahead of the agent's path projection
    double reach_radius = 0.36;  // done once this close to the last waypoint
};

inline FollowerParams default_follower_params(const AgentSpec& spec) {
    return {2.0 * spec.d_step, spec.goal_radius()};
}

/// Lookahead path tracker over the discrete action set: turn while the
/// bearing to the lookahead point is off by more than half a turn step,
/// otherwise step forward.
class PathFollower {
public:
    PathFollower(std::vector<Vec2> path, const AgentSpec& spec, FollowerParams params)
        : path_(std::move(path)), spec_(spec), params_(params) {
        if (path_.empty()) throw Error(ErrorCode::invalid_argument, "path must be nonempty");
        arc_.resize(path_.size(), 0.0);
        for (std::size_t i = 1; i < path_.size(); ++i) arc_[i] = arc_[i - 1] + distance(path_[i - 1], path_[i]);
    }

    bool reached(const Pose& pose) const { return distance(pose.position, path_.back()) <= params_.reach_radius; }

    /// Next action, or nullopt once the final waypoint is reached.
    std::optional<Action> next(const Pose& pose) {
        if (reached(pose)) return std::nullopt;
        advance_progress(pose.position);
        const Vec2 target = lookahead_point();
        const Vec2 d = target - pose.position;
        if (d.norm() < 1e-12) return Action::move_forward;
        const double error = wrap_angle(std::atan2(d.y, d.x) - pose.yaw);
        if (std::abs(error) > spec_.theta_step / 2.0) return error > 0 ? Action::turn_left : Action::turn_right;
        return Action::move_forward;
    }

    double length() const { return arc_.back(); }
    const std::vector<Vec2>& path() const { return path_; }
    std::size_t progress() const { return progress_; }

private:
    void advance_progress(Vec2 p) {
        // Nearest waypoint within a short window ahead; progress never regresses.
        const double window_end = arc_[progress_] + 2.0 * params_.lookahead + spec_.d_step;
        std::size_t best = progress_;
        double best_d = distance(path_[progress_], p);
        for (std::size_t i = progress_ + 1; i < path_.size() && arc_[i] <= window_end; ++i) {
            const double d = distance(path_[i], p);
            if (d < best_d) best_d = d, best = i;
        }
        progress_ = best;
    }

    Vec2 lookahead_point() const {
        for (std::size_t i = progress_; i < path_.size(); ++i)
            if (arc_[i] - arc_[progress_] >= params_.lookahead) return path_[i];
        return path_.back();
    }

    std::vector<Vec2> path_;
    std::vector<double> arc_;
    AgentSpec spec_;
    FollowerParams params_;
    std::size_t progress_ = 0;
};

enum class FollowStatus { reached, collided, stalled };

inline const char* to_string(FollowStatus s) {
    switch (s) {
        case FollowStatus::reached: return "REACHED";
        case FollowStatus::collided: return "COLLIDED";
        case FollowStatus::stalled: return "STALLED";
    }
    return "STALLED";
}

struct FollowResult {
    FollowStatus status = FollowStatus::stalled;
    std::vector<Pose> poses;  // poses[0] is the start; poses[t] follows actions[t-1]
    std::vector<Action> actions;
    std::optional<std::size_t> collision_step;  // t_c: index into poses
    std::size_t step_limit = 0;
};

inline std::size_t follow_step_limit(double path_length, const AgentSpec& spec) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(4.0 * path_length / spec.d_step)));
}

/// Drives the agent along `path` through execute_action on `nav` (obstacles
/// inflated by r_robot), stopping at the first collision.
inline FollowResult follow_path(const Raster& nav, const AgentSpec& spec, const std::vector<Vec2>& path, const Pose& start,
                                FollowerParams params) {
    PathFollower follower(path, spec, params);
    FollowResult out;
    out.step_limit = follow_step_limit(follower.length(), spec);
    out.poses.push_back(start);
    Pose pose = start;
    while (true) {
        const auto action = follower.next(pose);
        if (!action) {
            out.status = FollowStatus::reached;
            return out;
        }
        if (out.actions.size() >= out.step_limit) {
            out.status = FollowStatus::stalled;
            return out;
        }
        const MoveOutcome move = execute_action(pose, *action, spec, nav);
        pose = move.new_pose;
        out.actions.push_back(*action);
        out.poses.push_back(pose);
        if (move.collided) {
            out.status = FollowStatus::collided;
            out.collision_step = out.poses.size() - 1;
            return out;
        }
    }
}

inline FollowResult follow_path(const Raster& nav, const AgentSpec& spec, const std::vector<Vec2>& path, double start_yaw) {
    if (path.empty()) throw Error(ErrorCode::invalid_argument, "path must be nonempty");
    return follow_path(nav, spec, path, Pose{path.front(), wrap_angle(start_yaw)}, default_follower_params(spec));
}

}  // namespace rvn
