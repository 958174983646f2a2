#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "rvn/core.hpp"
#include "rvn/grid.hpp"

namespace rvn {

enum class Action { move_forward, turn_left, turn_right, stop };

inline constexpr std::array<Action, 4> kAllActions{Action::move_forward, Action::turn_left, Action::turn_right, Action::stop};

inline const char* to_string(Action a) {
    switch (a) {
        case Action::move_forward: return "MOVE_FORWARD";
        case Action::turn_left: return "TURN_LEFT";
        case Action::turn_right: return "TURN_RIGHT";
        case Action::stop: return "STOP";
    }
    return "STOP";
}

inline std::optional<Action> parse_action(std::string_view name) {
    for (Action a : kAllActions)
        if (name == to_string(a)) return a;
    return std::nullopt;
}

struct Pose {
    Vec2 position;
    double yaw = 0.0;  // (-pi, pi]

    friend bool operator==(const Pose&, const Pose&) = default;
};

inline Vec2 heading(double yaw) { return {std::cos(yaw), std::sin(yaw)}; }

struct AgentSpec {
    double r_robot = 0.18;
    double d_step = 0.25;
    double theta_step = kPi / 6.0;
    // Carried for metadata only; geometry is planar.
    double h_robot = 1.0;
    double h_camera = 0.6;

    double goal_radius() const noexcept { return 2.0 * r_robot; }

    void validate() const {
        if (!(r_robot > 0.0)) throw Error(ErrorCode::invalid_argument, "r_robot must be > 0");
        if (!(d_step > 0.0)) throw Error(ErrorCode::invalid_argument, "d_step must be > 0");
        if (!(theta_step > 0.0 && theta_step <= kPi)) throw Error(ErrorCode::invalid_argument, "theta_step must be in (0, pi]");
    }
};

struct MoveOutcome {
    Pose new_pose;
    double displacement = 0.0;
    bool collided = false;
};

inline constexpr double kCollisionEpsilon = 1e-9;
// Clamped endpoints stop this far short of the blocking boundary.
inline constexpr double kClampBackoff = 1e-6;

/// Applies one discrete action. Forward motion runs along the heading and
/// clamps at the first blocked cell of `nav` (no sliding); a shortfall
/// against d_step registers a collision.
inline MoveOutcome execute_action(const Pose& pose, Action action, const AgentSpec& spec, const Raster& nav) {
    if (nav.blocked_at(pose.position)) throw Error(ErrorCode::invalid_state, "agent pose lies in a blocked cell");
    switch (action) {
        case Action::turn_left: return {{pose.position, wrap_angle(pose.yaw + spec.theta_step)}, 0.0, false};
        case Action::turn_right: return {{pose.position, wrap_angle(pose.yaw - spec.theta_step)}, 0.0, false};
        case Action::stop: return {pose, 0.0, false};
        case Action::move_forward: break;
    }
    const Vec2 dir = heading(pose.yaw);
    const double hit = first_blocked_distance(nav, pose.position, dir, spec.d_step);
    double travel = spec.d_step;
    if (hit <= spec.d_step) {
        travel = std::max(0.0, hit - kClampBackoff);
        // Guard the rounding of the endpoint itself.
        while (travel > 0.0 && nav.blocked_at(pose.position + travel * dir)) travel = std::max(0.0, travel - kClampBackoff);
    }
    MoveOutcome out;
    out.new_pose = {pose.position + travel * dir, pose.yaw};
    out.displacement = travel;
    out.collided = travel < spec.d_step - kCollisionEpsilon;
    return out;
}

/// Goal in the agent frame: x forward, y to the left.
inline Vec2 relative_goal(const Pose& pose, Vec2 goal) {
    const Vec2 d = goal - pose.position;
    const double c = std::cos(pose.yaw);
    const double s = std::sin(pose.yaw);
    return {c * d.x + s * d.y, -s * d.x + c * d.y};
}

/// Inverse of relative_goal.
inline Vec2 world_from_relative(const Pose& pose, Vec2 ego) {
    const double c = std::cos(pose.yaw);
    const double s = std::sin(pose.yaw);
    return pose.position + Vec2{c * ego.x - s * ego.y, s * ego.x + c * ego.y};
}

}  // namespace rvn
