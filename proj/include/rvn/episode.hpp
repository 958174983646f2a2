#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rvn/core.hpp"
#include "rvn/geodesic.hpp"
#include "rvn/grid.hpp"
#include "rvn/kinematics.hpp"
#include "rvn/sensing.hpp"

namespace rvn {

struct EpisodeConfig {
    int n_goal = 32;
    double d_min = 4.0;
    double d_max = 8.0;
    int t_max = 500;  // steps allowed per goal
    double reward_goal = 1.0;
    double reward_collision = -0.1;
    double step_penalty = 0.01;
    double collision_cost = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(d_min > 0.0 && d_min < d_max)) throw Error(ErrorCode::invalid_argument, "need 0 < d_min < d_max");
        if (n_goal < 1) throw Error(ErrorCode::invalid_argument, "n_goal must be >= 1");
        if (t_max < 1) throw Error(ErrorCode::invalid_argument, "t_max must be >= 1");
    }
};

enum class EpisodeStatus { running, success, fail_collision, fail_timeout };

inline const char* to_string(EpisodeStatus s) {
    switch (s) {
        case EpisodeStatus::running: return "RUNNING";
        case EpisodeStatus::success: return "SUCCESS";
        case EpisodeStatus::fail_collision: return "FAIL_COLLISION";
        case EpisodeStatus::fail_timeout: return "FAIL_TIMEOUT";
    }
    return "RUNNING";
}

inline std::optional<EpisodeStatus> parse_status(std::string_view s) {
    for (auto v : {EpisodeStatus::running, EpisodeStatus::success, EpisodeStatus::fail_collision, EpisodeStatus::fail_timeout})
        if (s == to_string(v)) return v;
    return std::nullopt;
}

/// A world plus the derived configuration-space data every episode on it
/// needs. Immutable; share it between episodes.
struct NavScene {
    std::shared_ptr<const OccupancyGrid> grid;
    AgentSpec agent;
    InflatedGrid nav;                 // obstacles grown by r_robot
    std::vector<std::size_t> region;  // largest connected free component of nav

    const std::string& scene_id() const { return grid->scene_id(); }
};

inline std::shared_ptr<const NavScene> make_nav_scene(std::shared_ptr<const OccupancyGrid> grid, const AgentSpec& agent = {}) {
    agent.validate();
    auto scene = std::make_shared<NavScene>();
    scene->grid = std::move(grid);
    scene->agent = agent;
    scene->nav = inflate(*scene->grid, agent.r_robot);
    scene->region = largest_component(scene->nav);
    return scene;
}

inline std::shared_ptr<const NavScene> make_nav_scene(OccupancyGrid grid, const AgentSpec& agent = {}) {
    return make_nav_scene(std::make_shared<const OccupancyGrid>(std::move(grid)), agent);
}

/// Cells whose geodesic distance in `field` lies in [d_min, d_max].
inline std::vector<std::size_t> goal_candidates(const DistanceField& field, double d_min, double d_max) {
    constexpr double kTol = 1e-9;
    std::vector<std::size_t> out;
    const auto costs = field.costs();
    for (std::size_t i = 0; i < costs.size(); ++i) {
        if (costs[i].straight < 0) continue;
        const double d = costs[i].meters(field.resolution());
        if (d >= d_min - kTol && d <= d_max + kTol) out.push_back(i);
    }
    return out;
}

/// Uniform goal among free cells at geodesic distance [d_min, d_max] from `from`.
inline Vec2 sample_goal(const Raster& nav, Vec2 from, double d_min, double d_max, Rng& rng) {
    const DistanceField field = geodesic_field(nav, from);
    const auto candidates = goal_candidates(field, d_min, d_max);
    if (candidates.empty()) throw Error(ErrorCode::goal_exhausted, "no free cell lies within the goal distance range");
    return nav.center(nav.cell_at(candidates[uniform_index(rng, candidates.size())]));
}

/// Shaped reward for a step that neither collides nor reaches a goal.
inline double progress_reward(double dtg_before, double dtg_after, const EpisodeConfig& config) {
    return -(dtg_after - dtg_before) - config.step_penalty;
}

struct EpisodeState {
    std::string scene_id;
    Pose pose;
    Vec2 current_goal;
    int goals_reached = 0;
    int steps_since_goal = 0;
    int total_steps = 0;
    double distance_traveled = 0.0;
    int collisions = 0;
    EpisodeStatus status = EpisodeStatus::running;
    bool goal_exhausted = false;
};

struct StepInfo {
    bool collided = false;
    bool goal_reached = false;
    double dtg = 0.0;
    bool goal_exhausted = false;
};

struct StepResult {
    ObservationFrame observation;
    double reward = 0.0;
    double cost = 0.0;
    bool done = false;
    StepInfo info;
    EpisodeStatus status = EpisodeStatus::running;
};

/// Sequential-goal navigation episode. Single owner; the scene is shared.
class Episode {
public:
    static constexpr int kStartResamples = 128;

    Episode(std::shared_ptr<const NavScene> scene, EpisodeConfig config, SensorSpec sensor = {})
        : scene_(std::move(scene)), config_(config), sensor_(sensor), rng_(make_rng(config.seed)) {
        config_.validate();
        sensor_.validate();
    }

    /// Spawns the agent and draws the first goal. Deterministic in config.seed.
    ObservationFrame reset() {
        rng_ = make_rng(config_.seed);
        const Raster& nav = scene_->nav;
        for (int attempt = 0; attempt < kStartResamples; ++attempt) {
            const Vec2 start = sample_from(nav, scene_->region, rng_);
            const double yaw = wrap_angle(uniform_real(rng_, -kPi, kPi));
            const DistanceField field = geodesic_field(nav, start);
            const auto candidates = goal_candidates(field, config_.d_min, config_.d_max);
            if (candidates.empty()) continue;
            state_ = EpisodeState{};
            state_.scene_id = scene_->scene_id();
            state_.pose = {start, yaw};
            set_goal(nav.center(nav.cell_at(candidates[uniform_index(rng_, candidates.size())])));
            started_ = true;
            return observe();
        }
        throw Error(ErrorCode::scene_unusable, "scene " + scene_->scene_id() + " admits no goal in [d_min, d_max]");
    }

    /// Scripted start: the given pose and first goal instead of sampled ones.
    /// Later goals are still drawn from the seeded stream.
    ObservationFrame reset_at(const Pose& start, Vec2 goal) {
        const Raster& nav = scene_->nav;
        if (nav.blocked_at(start.position)) throw Error(ErrorCode::invalid_state, "start pose lies in a blocked cell");
        if (nav.blocked_at(goal)) throw Error(ErrorCode::invalid_argument, "goal lies in a blocked cell");
        rng_ = make_rng(config_.seed);
        state_ = EpisodeState{};
        state_.scene_id = scene_->scene_id();
        state_.pose = {start.position, wrap_angle(start.yaw)};
        set_goal(goal);
        started_ = true;
        return observe();
    }

    StepResult step(Action action) {
        if (!started_) throw Error(ErrorCode::invalid_state, "step before reset");
        if (state_.status != EpisodeStatus::running) throw Error(ErrorCode::episode_finished, "episode already finished");

        const double dtg_before = dtg();
        const MoveOutcome move = execute_action(state_.pose, action, scene_->agent, scene_->nav);
        state_.pose = move.new_pose;
        state_.distance_traveled += move.displacement;
        ++state_.total_steps;

        StepResult result;
        if (move.collided) {
            ++state_.collisions;
            state_.status = EpisodeStatus::fail_collision;
            result.reward = config_.reward_collision;
            result.cost = config_.collision_cost;
            result.info.collided = true;
        } else if (action == Action::stop && dtg_before <= scene_->agent.goal_radius()) {
            result.reward = config_.reward_goal;
            result.info.goal_reached = true;
            ++state_.goals_reached;
            state_.steps_since_goal = 0;
            if (state_.goals_reached >= config_.n_goal) {
                state_.status = EpisodeStatus::success;
            } else {
                try {
                    set_goal(sample_goal(scene_->nav, state_.pose.position, config_.d_min, config_.d_max, rng_));
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::goal_exhausted) throw;
                    state_.status = EpisodeStatus::fail_timeout;
                    state_.goal_exhausted = true;
                    result.info.goal_exhausted = true;
                }
            }
        } else {
            result.reward = progress_reward(dtg_before, dtg(), config_);
            ++state_.steps_since_goal;
            if (state_.steps_since_goal > config_.t_max) state_.status = EpisodeStatus::fail_timeout;
        }

        result.observation = observe();
        result.info.dtg = dtg();
        result.status = state_.status;
        result.done = state_.status != EpisodeStatus::running;
        return result;
    }

    /// Geodesic distance from the agent to the current goal.
    double dtg() const { return goal_field_ ? goal_field_->distance_at(state_.pose.position) : kInf; }

    ObservationFrame observe() const { return render(state_.pose, *scene_->grid, state_.current_goal, sensor_); }

    bool started() const { return started_; }
    bool done() const { return started_ && state_.status != EpisodeStatus::running; }
    const EpisodeState& state() const { return state_; }
    const EpisodeConfig& config() const { return config_; }
    const SensorSpec& sensor() const { return sensor_; }
    const NavScene& scene() const { return *scene_; }
    std::shared_ptr<const NavScene> scene_ptr() const { return scene_; }
    const DistanceField& goal_field() const { return *goal_field_; }

private:
    void set_goal(Vec2 goal) {
        state_.current_goal = goal;
        goal_field_.emplace(geodesic_field(scene_->nav, goal));
    }

    std::shared_ptr<const NavScene> scene_;
    EpisodeConfig config_;
    SensorSpec sensor_;
    Rng rng_;
    EpisodeState state_;
    std::optional<DistanceField> goal_field_;
    bool started_ = false;
};

}  // namespace rvn
