#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <vector>

#include "rvn/core.hpp"
#include "rvn/grid.hpp"
#include "rvn/kinematics.hpp"

namespace rvn {

/// Egocentric range scan standing in for a camera image.
struct SensorSpec {
    int n_rays = 64;
    double fov = kPi / 2.0;
    double max_range = 5.0;
    int history = 5;  // C: past frames stacked with the current one

    void validate() const {
        if (n_rays < 2) throw Error(ErrorCode::invalid_argument, "n_rays must be >= 2");
        if (!(fov > 0.0 && fov <= 2.0 * kPi)) throw Error(ErrorCode::invalid_argument, "fov must be in (0, 2pi]");
        if (!(max_range > 0.0)) throw Error(ErrorCode::invalid_argument, "max_range must be > 0");
        if (history < 0) throw Error(ErrorCode::invalid_argument, "history must be >= 0");
    }

    /// Ray i points this far (radians) left of the heading; i = 0 is leftmost.
    double ray_offset(int i) const { return fov / 2.0 - fov * static_cast<double>(i) / static_cast<double>(n_rays - 1); }
};

struct ObservationFrame {
    std::vector<float> depths;
    float goal_x = 0.0f;  // forward
    float goal_y = 0.0f;  // left

    Vec2 goal() const { return {goal_x, goal_y}; }
    friend bool operator==(const ObservationFrame&, const ObservationFrame&) = default;
};

inline ObservationFrame render(const Pose& pose, const OccupancyGrid& grid, Vec2 goal, const SensorSpec& spec) {
    ObservationFrame frame;
    frame.depths.resize(static_cast<std::size_t>(spec.n_rays));
    for (int i = 0; i < spec.n_rays; ++i) {
        const double angle = pose.yaw + spec.ray_offset(i);
        const double hit = first_blocked_distance(grid, pose.position, heading(angle), spec.max_range);
        frame.depths[static_cast<std::size_t>(i)] = static_cast<float>(std::min(hit, spec.max_range));
    }
    const Vec2 ego = relative_goal(pose, goal);
    frame.goal_x = static_cast<float>(ego.x);
    frame.goal_y = static_cast<float>(ego.y);
    return frame;
}

/// Ring of recent frames.
class FrameHistory {
public:
    explicit FrameHistory(int context) : context_(std::max(0, context)) {}

    void clear() { frames_.clear(); }
    void push(ObservationFrame frame) {
        frames_.push_back(std::move(frame));
        while (frames_.size() > static_cast<std::size_t>(context_) + 1) frames_.pop_front();
    }
    bool empty() const { return frames_.empty(); }
    int context() const { return context_; }
    const ObservationFrame& latest() const { return frames_.back(); }

    /// The most recent context+1 frames oldest-first; missing history repeats
    /// the earliest frame.
    std::vector<ObservationFrame> stack() const {
        if (frames_.empty()) return {};
        std::vector<ObservationFrame> out;
        out.reserve(static_cast<std::size_t>(context_) + 1);
        for (std::size_t pad = frames_.size(); pad < static_cast<std::size_t>(context_) + 1; ++pad) out.push_back(frames_.front());
        out.insert(out.end(), frames_.begin(), frames_.end());
        return out;
    }

private:
    int context_;
    std::deque<ObservationFrame> frames_;
};

inline std::vector<ObservationFrame> history_stack(std::span<const ObservationFrame> frames, int context) {
    FrameHistory h(context);
    for (const auto& f : frames) h.push(f);
    return h.stack();
}

}  // namespace rvn
