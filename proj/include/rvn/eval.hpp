#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rvn/core.hpp"
#include "rvn/episode.hpp"
#include "rvn/net.hpp"
#include "rvn/planner.hpp"
#include "rvn/follower.hpp"
#include "rvn/scene.hpp"
#include "rvn/sensing.hpp"

namespace rvn {

using json = nlohmann::json;

enum class Split { train, val, test };

inline const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "test";
}

inline Split parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw Error(ErrorCode::invalid_argument, "unknown split: " + std::string(s));
}

inline int episodes_per_scene(Split s) { return s == Split::train ? 2 : 20; }

struct ScenarioConfig {
    EpisodeConfig episode;
    AgentSpec agent;
    SensorSpec sensor;
    SceneParams scene;
};

struct ScenarioEpisode {
    std::string scene_id;
    std::uint64_t scene_seed = 0;
    std::uint64_t episode_seed = 0;

    friend bool operator==(const ScenarioEpisode&, const ScenarioEpisode&) = default;
};

struct ScenarioSet {
    Split split = Split::test;
    ScenarioConfig config;
    std::vector<std::uint64_t> scene_seeds;
    int episodes_per_scene = 20;
    std::vector<ScenarioEpisode> episodes;
};

inline json to_json(const ScenarioConfig& c) {
    const auto& e = c.episode;
    const auto& a = c.agent;
    const auto& s = c.sensor;
    const auto& p = c.scene;
    return json{
        {"episode",
         {{"n_goal", e.n_goal},
          {"d_min", e.d_min},
          {"d_max", e.d_max},
          {"t_max", e.t_max},
          {"reward_goal", e.reward_goal},
          {"reward_collision", e.reward_collision},
          {"step_penalty", e.step_penalty},
          {"collision_cost", e.collision_cost}}},
        {"agent",
         {{"r_robot", a.r_robot}, {"d_step", a.d_step}, {"theta_step", a.theta_step}, {"h_robot", a.h_robot}, {"h_camera", a.h_camera}}},
        {"sensor", {{"n_rays", s.n_rays}, {"fov", s.fov}, {"max_range", s.max_range}, {"history", s.history}}},
        {"scene",
         {{"width_m", p.width_m},
          {"height_m", p.height_m},
          {"resolution", p.resolution},
          {"min_rooms", p.min_rooms},
          {"max_rooms", p.max_rooms},
          {"room_min_m", p.room_min_m},
          {"room_max_m", p.room_max_m},
          {"corridor_min_m", p.corridor_min_m},
          {"corridor_max_m", p.corridor_max_m},
          {"furniture_density", p.furniture_density},
          {"furniture_min_m", p.furniture_min_m},
          {"furniture_max_m", p.furniture_max_m},
          {"furniture_gap_m", p.furniture_gap_m},
          {"min_passage_m", p.min_passage_m}}},
    };
}

namespace detail {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

/// Missing keys keep their defaults.
inline ScenarioConfig scenario_config_from_json(const json& j) {
    using detail::read_field;
    ScenarioConfig c;
    if (!j.is_object()) throw Error(ErrorCode::parse_error, "config must be an object");
    try {
        if (j.contains("episode")) {
            const json& e = j.at("episode");
            read_field(e, "n_goal", c.episode.n_goal);
            read_field(e, "d_min", c.episode.d_min);
            read_field(e, "d_max", c.episode.d_max);
            read_field(e, "t_max", c.episode.t_max);
            read_field(e, "reward_goal", c.episode.reward_goal);
            read_field(e, "reward_collision", c.episode.reward_collision);
            read_field(e, "step_penalty", c.episode.step_penalty);
            read_field(e, "collision_cost", c.episode.collision_cost);
        }
        if (j.contains("agent")) {
            const json& a = j.at("agent");
            read_field(a, "r_robot", c.agent.r_robot);
            read_field(a, "d_step", c.agent.d_step);
            read_field(a, "theta_step", c.agent.theta_step);
            read_field(a, "h_robot", c.agent.h_robot);
            read_field(a, "h_camera", c.agent.h_camera);
        }
        if (j.contains("sensor")) {
            const json& s = j.at("sensor");
            read_field(s, "n_rays", c.sensor.n_rays);
            read_field(s, "fov", c.sensor.fov);
            read_field(s, "max_range", c.sensor.max_range);
            read_field(s, "history", c.sensor.history);
        }
        if (j.contains("scene")) {
            const json& p = j.at("scene");
            read_field(p, "width_m", c.scene.width_m);
            read_field(p, "height_m", c.scene.height_m);
            read_field(p, "resolution", c.scene.resolution);
            read_field(p, "min_rooms", c.scene.min_rooms);
            read_field(p, "max_rooms", c.scene.max_rooms);
            read_field(p, "room_min_m", c.scene.room_min_m);
            read_field(p, "room_max_m", c.scene.room_max_m);
            read_field(p, "corridor_min_m", c.scene.corridor_min_m);
            read_field(p, "corridor_max_m", c.scene.corridor_max_m);
            read_field(p, "furniture_density", c.scene.furniture_density);
            read_field(p, "furniture_min_m", c.scene.furniture_min_m);
            read_field(p, "furniture_max_m", c.scene.furniture_max_m);
            read_field(p, "furniture_gap_m", c.scene.furniture_gap_m);
            read_field(p, "min_passage_m", c.scene.min_passage_m);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error, std::string("bad config: ") + e.what());
    }
    c.episode.validate();
    c.agent.validate();
    c.sensor.validate();
    detail::validate(c.scene);
    return c;
}

namespace detail {

inline std::uint64_t split_tag(Split s) { return 0x5eed0000ULL + static_cast<std::uint64_t>(s); }

inline std::uint64_t episode_seed(std::uint64_t scene_seed, Split split, std::uint64_t index) {
    const std::uint64_t base = splitmix64(scene_seed ^ splitmix64(split_tag(split)));
    return splitmix64(base + index);
}

}  // namespace detail

/// Episodes for one split: a fixed count per scene with seeds derived from
/// (scene seed, split, index), deduplicated by probing.
inline ScenarioSet build_scenarios(const std::vector<std::uint64_t>& scene_seeds, Split split, const ScenarioConfig& config = {}) {
    config.episode.validate();
    config.agent.validate();
    config.sensor.validate();
    detail::validate(config.scene);
    std::set<std::uint64_t> seen_scenes;
    for (auto s : scene_seeds)
        if (!seen_scenes.insert(s).second)
            throw Error(ErrorCode::configuration_error, "scene seed " + std::to_string(s) + " listed twice");

    ScenarioSet set;
    set.split = split;
    set.config = config;
    set.scene_seeds = scene_seeds;
    set.episodes_per_scene = episodes_per_scene(split);
    std::set<std::uint64_t> used;
    for (auto scene_seed : scene_seeds) {
        for (int i = 0; i < set.episodes_per_scene; ++i) {
            std::uint64_t probe = static_cast<std::uint64_t>(i);
            std::uint64_t seed = detail::episode_seed(scene_seed, split, probe);
            while (used.count(seed)) seed = detail::episode_seed(scene_seed, split, probe += 1u << 20);
            used.insert(seed);
            set.episodes.push_back({generated_scene_id(scene_seed), scene_seed, seed});
        }
    }
    return set;
}

/// Throws configuration_error when any scene seed appears in more than one split.
inline void check_disjoint(const std::vector<const ScenarioSet*>& sets) {
    std::map<std::uint64_t, Split> owner;
    for (const ScenarioSet* s : sets) {
        for (auto seed : s->scene_seeds) {
            auto [it, inserted] = owner.emplace(seed, s->split);
            if (!inserted)
                throw Error(ErrorCode::configuration_error, "scene seed " + std::to_string(seed) + " appears in both " +
                                                                to_string(it->second) + " and " + to_string(s->split));
        }
    }
}

inline std::string to_scenario_file(const ScenarioSet& set) {
    std::string out = json{{"format", "RVNSCN1"}, {"split", to_string(set.split)}, {"config", to_json(set.config)}}.dump();
    out += '\n';
    for (const auto& e : set.episodes) {
        out += json{{"scene_id", e.scene_id}, {"scene_seed", e.scene_seed}, {"episode_seed", e.episode_seed}}.dump();
        out += '\n';
    }
    return out;
}

inline ScenarioSet parse_scenario_file(std::string_view text) {
    std::vector<std::string> lines;
    std::istringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) lines.push_back(line);
    if (lines.empty()) throw ParseError(1, "empty scenario file");

    ScenarioSet set;
    try {
        const json header = json::parse(lines[0]);
        if (!header.is_object() || header.value("format", "") != "RVNSCN1") throw ParseError(1, "missing RVNSCN1 header");
        set.split = parse_split(header.at("split").get<std::string>());
        set.config = scenario_config_from_json(header.at("config"));
    } catch (const json::exception& e) {
        throw ParseError(1, e.what());
    }
    set.episodes_per_scene = episodes_per_scene(set.split);
    std::set<std::uint64_t> seeds;
    std::set<std::uint64_t> scenes;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        ScenarioEpisode e;
        try {
            const json j = json::parse(lines[i]);
            e.scene_id = j.at("scene_id").get<std::string>();
            e.scene_seed = j.at("scene_seed").get<std::uint64_t>();
            e.episode_seed = j.at("episode_seed").get<std::uint64_t>();
        } catch (const json::exception& ex) {
            throw ParseError(i + 1, ex.what());
        }
        if (!seeds.insert(e.episode_seed).second) throw ParseError(i + 1, "duplicate episode seed");
        if (scenes.insert(e.scene_seed).second) set.scene_seeds.push_back(e.scene_seed);
        set.episodes.push_back(std::move(e));
    }
    return set;
}

/// Thread-safe memo of generated scenes keyed by seed.
class SceneCache {
public:
    SceneCache(SceneParams params, AgentSpec agent) : params_(params), agent_(agent) {}

    std::shared_ptr<const NavScene> get(std::uint64_t seed) {
        std::shared_ptr<Slot> slot;
        {
            std::lock_guard lock(mutex_);
            auto& s = slots_[seed];
            if (!s) s = std::make_shared<Slot>();
            slot = s;
        }
        std::call_once(slot->once, [&] { slot->scene = make_nav_scene(generate_scene(seed, params_), agent_); });
        return slot->scene;
    }

private:
    struct Slot {
        std::once_flag once;
        std::shared_ptr<const NavScene> scene;
    };
    SceneParams params_;
    AgentSpec agent_;
    std::mutex mutex_;
    std::map<std::uint64_t, std::shared_ptr<Slot>> slots_;
};

/// Action provider. The harness calls begin() once per episode, then act()
/// until the episode ends; act() sees the stacked history (oldest first) and
/// the egocentric goal. Privileged agents may keep the Episode reference.
class Agent {
public:
    virtual ~Agent() = default;
    virtual void begin(const Episode&) {}
    virtual std::string act(const std::vector<ObservationFrame>& history, Vec2 goal_ego) = 0;
    /// Row annotations collected during the current episode.
    virtual std::vector<std::string> flags() const { return {}; }
};

using AgentFactory = std::function<std::unique_ptr<Agent>()>;

class StopAgent : public Agent {
public:
    std::string act(const std::vector<ObservationFrame>&, Vec2) override { return "STOP"; }
};

/// Non-privileged baseline over the observation interface.
class GreedyAgent : public Agent {
public:
    explicit GreedyAgent(AgentSpec spec = {}) : spec_(spec) {}

    std::string act(const std::vector<ObservationFrame>& history, Vec2 goal_ego) override {
        if (goal_ego.norm() <= kStopRadius) return "STOP";
        const double bearing = std::atan2(goal_ego.y, goal_ego.x);
        if (std::abs(bearing) > spec_.theta_step / 2.0) return bearing > 0 ? "TURN_LEFT" : "TURN_RIGHT";
        const auto& depths = history.back().depths;
        const std::size_t n = depths.size();
        if (n == 0) return "MOVE_FORWARD";
        const double center = n % 2 == 0 ? std::min(depths[n / 2 - 1], depths[n / 2]) : depths[n / 2];
        if (center > spec_.d_step + spec_.r_robot) return "MOVE_FORWARD";
        // Rays run from the left edge (index 0) to the right edge.
        double left = 0.0, right = 0.0;
        for (std::size_t i = 0; i < n / 2; ++i) left += depths[i];
        for (std::size_t i = n - n / 2; i < n; ++i) right += depths[i];
        return left >= right ? "TURN_LEFT" : "TURN_RIGHT";
    }

    static constexpr double kStopRadius = 0.30;

private:
    AgentSpec spec_;
};

/// Free cell of `g` nearest to p whose center p can see in `nav`.
inline std::optional<Vec2> visible_free_point(const Raster& g, const Raster& nav, Vec2 p, double max_radius) {
    const Cell c = g.cell_of(p);
    if (!g.blocked(c)) return g.center(c);
    const int rings = static_cast<int>(std::ceil(max_radius / g.resolution()));
    std::optional<Vec2> best;
    double best_d = kInf;
    for (int ring = 1; ring <= rings; ++ring) {
        if (best && (ring - 1) * g.resolution() > best_d) break;
        for (int dy = -ring; dy <= ring; ++dy) {
            for (int dx = -ring; dx <= ring; ++dx) {
                if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
                const Cell n{c.x + dx, c.y + dy};
                if (g.blocked(n)) continue;
                const Vec2 q = g.center(n);
                const double d = distance(p, q);
                if (d >= best_d) continue;
                if (first_blocked_distance(nav, p, (1.0 / d) * (q - p), d) <= d) continue;
                best_d = d, best = q;
            }
        }
    }
    return best;
}

/// Privileged agent: plans on an over-inflated copy of the scene and tracks the
/// plan with the dataset controller. Start and goal join the plan through
/// straight segments that are clear on the agent's grid.
class OracleAgent : public Agent {
public:
    OracleAgent() = default;
    explicit OracleAgent(double margin) : margin_(margin) {}

    void begin(const Episode& episode) override {
        episode_ = &episode;
        follower_.reset();
        planned_goals_ = -1;
        turns_ = 0;
        unreachable_ = false;
        if (episode.scene_ptr() != grids_scene_) {
            grids_.clear();
            grids_scene_ = episode.scene_ptr();
        }
    }

    std::string act(const std::vector<ObservationFrame>&, Vec2) override {
        if (!episode_) throw Error(ErrorCode::invalid_state, "oracle used without begin()");
        const EpisodeState& st = episode_->state();
        const AgentSpec& spec = episode_->scene().agent;
        if (episode_->dtg() <= spec.goal_radius()) return "STOP";
        if (planned_goals_ != st.goals_reached) replan();
        if (!follower_) return "STOP";
        Action a = follower_->next(st.pose).value_or(aim(st.current_goal));
        const bool blocked = a == Action::move_forward && execute_action(st.pose, a, spec, episode_->scene().nav).collided;
        if (blocked || turns_ >= kMaxTurns) a = descend();
        turns_ = a == Action::move_forward ? 0 : turns_ + 1;
        return to_string(a);
    }

    std::vector<std::string> flags() const override {
        if (unreachable_) return {"unreachable"};
        return {};
    }

private:
    static constexpr int kMaxTurns = 12;

    // Heading on the reachable yaw lattice whose collision-free step lowers
    // the goal distance most; turn toward it, or step when already facing it.
    Action descend() const {
        const EpisodeState& st = episode_->state();
        const AgentSpec& spec = episode_->scene().agent;
        const int n = std::max(1, static_cast<int>(std::lround(2.0 * kPi / spec.theta_step)));
        double best = episode_->dtg();
        int best_k = -1;
        for (int k = 0; k < n; ++k) {
            const Pose p{st.pose.position, wrap_angle(st.pose.yaw + k * spec.theta_step)};
            const MoveOutcome m = execute_action(p, Action::move_forward, spec, episode_->scene().nav);
            if (m.collided) continue;
            const double d = episode_->goal_field().distance_at(m.new_pose.position);
            if (d < best - 1e-9) best = d, best_k = k;
        }
        if (best_k == 0) return Action::move_forward;
        if (best_k < 0) return Action::turn_left;
        return best_k <= n / 2 ? Action::turn_left : Action::turn_right;
    }

    Action aim(Vec2 target) const {
        const Pose& pose = episode_->state().pose;
        const Vec2 d = target - pose.position;
        const double error = wrap_angle(std::atan2(d.y, d.x) - pose.yaw);
        if (std::abs(error) > episode_->scene().agent.theta_step / 2.0) return error > 0 ? Action::turn_left : Action::turn_right;
        return Action::move_forward;
    }

    // Margins tried in order; later entries only when the expert margin closes
    // every route.
    std::vector<double> margins(const AgentSpec& spec) const {
        const double expert = margin_ > 0.0 ? margin_ : spec.r_robot + 0.20;
        return {expert, spec.r_robot + 0.12, spec.r_robot + 0.05};
    }

    const Raster& grid_for(std::size_t i, double margin) {
        while (grids_.size() <= i) grids_.push_back(nullptr);
        if (!grids_[i]) grids_[i] = std::make_unique<InflatedGrid>(inflate(*episode_->scene().grid, margin));
        return *grids_[i];
    }

    void replan() {
        planned_goals_ = episode_->state().goals_reached;
        follower_.reset();
        const EpisodeState& st = episode_->state();
        const AgentSpec& spec = episode_->scene().agent;
        const Raster& nav = episode_->scene().nav;
        const auto ms = margins(spec);
        for (std::size_t i = 0; i <= ms.size(); ++i) {
            const Raster& g = i < ms.size() ? grid_for(i, ms[i]) : nav;
            const double reach = i < ms.size() ? ms[i] + 4.0 * g.resolution() : 0.0;
            const auto s = visible_free_point(g, nav, st.pose.position, reach);
            const auto t = visible_free_point(g, nav, st.current_goal, reach);
            if (!s || !t) continue;
            PlanResult plan = plan_path(g, *s, *t);
            if (!plan.ok()) continue;
            std::vector<Vec2> path;
            if (distance(st.pose.position, *s) > 0.0) path.push_back(st.pose.position);
            path.insert(path.end(), plan.waypoints.begin(), plan.waypoints.end());
            if (distance(st.current_goal, *t) > 0.0) path.push_back(st.current_goal);
            FollowerParams params = default_follower_params(spec);
            params.reach_radius = spec.goal_radius() / 3.0;
            follower_.emplace(std::move(path), spec, params);
            return;
        }
        unreachable_ = true;
    }

    double margin_ = 0.0;
    const Episode* episode_ = nullptr;
    std::shared_ptr<const NavScene> grids_scene_;
    std::vector<std::unique_ptr<InflatedGrid>> grids_;
    std::optional<PathFollower> follower_;
    int planned_goals_ = -1;
    int turns_ = 0;
    bool unreachable_ = false;
};

/// Forwards each decision to an external policy over a line-delimited JSON
/// socket: sends {"cmd":"act","episode":k,"t":n,"obs":[[...]...],"goal":[x,y]}
/// and expects {"action":"..."} back.
class SocketAgent : public Agent {
public:
    explicit SocketAgent(net::Address address) : stream_(net::LineStream::connect(address)) {}

    void begin(const Episode&) override {
        ++episode_;
        t_ = 0;
    }

    std::string act(const std::vector<ObservationFrame>& history, Vec2 goal_ego) override {
        json obs = json::array();
        for (const auto& f : history) obs.push_back(f.depths);
        const json req = {{"cmd", "act"}, {"episode", episode_}, {"t", t_++}, {"obs", obs}, {"goal", {goal_ego.x, goal_ego.y}}};
        stream_.write_line(req.dump());
        const auto line = stream_.read_line();
        if (!line) throw Error(ErrorCode::io_error, "policy closed the connection");
        const json reply = json::parse(*line, nullptr, false);
        if (!reply.is_object() || !reply.contains("action") || !reply["action"].is_string()) return "";
        return reply["action"].get<std::string>();
    }

private:
    net::LineStream stream_;
    long episode_ = -1;
    long t_ = 0;
};

struct EpisodeRow {
    std::string scene_id;
    std::uint64_t episode_seed = 0;
    int goals_reached = 0;
    bool collided = false;
    double distance_m = 0.0;
    int steps = 0;
    std::string status = "RUNNING";
    std::vector<std::string> flags;
};

struct Metrics {
    double sr1 = 0.0;
    double expected_goals = 0.0;
    double cpk = 0.0;
    int collisions = 0;
    double distance_m = 0.0;
};

/// CPK with the zero-distance conventions: 0 without collisions, +inf with.
inline double collisions_per_km(int collisions, double distance_m) {
    if (distance_m <= 0.0) return collisions > 0 ? kInf : 0.0;
    return collisions / (distance_m / 1000.0);
}

inline Metrics compute_metrics(const std::vector<EpisodeRow>& rows) {
    Metrics m;
    if (rows.empty()) return m;
    int first = 0;
    long goals = 0;
    for (const auto& r : rows) {
        first += r.goals_reached >= 1;
        goals += r.goals_reached;
        m.collisions += r.collided;
        m.distance_m += r.distance_m;
    }
    const double n = static_cast<double>(rows.size());
    m.sr1 = first / n;
    m.expected_goals = goals / n;
    m.cpk = collisions_per_km(m.collisions, m.distance_m);
    return m;
}

struct EvalReport {
    std::string agent;
    std::string split;
    Metrics metrics;
    std::vector<EpisodeRow> rows;  // scenario order
};

inline json cpk_json(double cpk) { return std::isinf(cpk) ? json("inf") : json(cpk); }

inline json to_json(const EvalReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"scene_id", row.scene_id},
                        {"episode_seed", row.episode_seed},
                        {"goals_reached", row.goals_reached},
                        {"collided", row.collided},
                        {"distance_m", row.distance_m},
                        {"steps", row.steps},
                        {"status", row.status},
                        {"flags", row.flags}});
    return {{"agent", r.agent},
            {"split", r.split},
            {"episodes", r.rows.size()},
            {"sr1", r.metrics.sr1},
            {"expected_goals", r.metrics.expected_goals},
            {"cpk", cpk_json(r.metrics.cpk)},
            {"collisions", r.metrics.collisions},
            {"distance_m", r.metrics.distance_m},
            {"rows", rows}};
}

inline std::string to_csv(const EvalReport& r) {
    std::string out = "scene_id,episode_seed,goals_reached,collided,distance_m,steps,status\n";
    char buf[64];
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof buf, "%.6f", row.distance_m);
        out += row.scene_id + ',' + std::to_string(row.episode_seed) + ',' + std::to_string(row.goals_reached) + ',' +
               (row.collided ? "1" : "0") + ',' + buf + ',' + std::to_string(row.steps) + ',' + row.status + '\n';
    }
    return out;
}

inline EpisodeConfig episode_config_for(const ScenarioSet& set, const ScenarioEpisode& e) {
    EpisodeConfig c = set.config.episode;
    c.seed = e.episode_seed;
    return c;
}

/// Runs one episode to termination.
inline EpisodeRow run_episode(std::shared_ptr<const NavScene> scene, const EpisodeConfig& config, const SensorSpec& sensor,
                              Agent& agent) {
    EpisodeRow row;
    row.scene_id = scene->scene_id();
    row.episode_seed = config.seed;
    Episode episode(std::move(scene), config, sensor);
    FrameHistory history(sensor.history);
    try {
        history.push(episode.reset());
    } catch (const Error& e) {
        if (e.code() != ErrorCode::scene_unusable) throw;
        row.status = to_string(EpisodeStatus::fail_timeout);
        row.flags.push_back("scene_unusable");
        return row;
    }
    agent.begin(episode);
    bool violation = false;
    while (!episode.done()) {
        const auto stack = history.stack();
        std::optional<Action> action;
        try {
            action = parse_action(agent.act(stack, stack.back().goal()));
        } catch (const Error&) {
            action.reset();
        } catch (const json::exception&) {
            action.reset();
        }
        if (!action) {
            violation = true;
            break;
        }
        history.push(episode.step(*action).observation);
    }
    const EpisodeState& st = episode.state();
    row.goals_reached = st.goals_reached;
    row.collided = st.collisions > 0;
    row.distance_m = st.distance_traveled;
    row.steps = st.total_steps;
    row.status = to_string(st.status);
    row.flags = agent.flags();
    if (st.goal_exhausted) row.flags.push_back("goal_exhausted");
    if (violation) {
        row.goals_reached = 0;
        row.status = to_string(EpisodeStatus::fail_timeout);
        row.flags.push_back("protocol_violation");
    }
    return row;
}

struct EvalOptions {
    unsigned workers = 1;
    std::string agent_name = "agent";
};

/// Every episode in scenario order; workers pull episodes from a shared cursor
/// and each owns its agent instance.
inline EvalReport run_eval(const ScenarioSet& set, const AgentFactory& make_agent, const EvalOptions& options = {}) {
    SceneCache cache(set.config.scene, set.config.agent);
    std::vector<EpisodeRow> rows(set.episodes.size());
    std::atomic<std::size_t> cursor{0};
    std::mutex error_mutex;
    std::exception_ptr error;

    auto work = [&] {
        try {
            auto agent = make_agent();
            while (true) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= set.episodes.size()) return;
                {
                    std::lock_guard lock(error_mutex);
                    if (error) return;
                }
                const auto& e = set.episodes[i];
                rows[i] = run_episode(cache.get(e.scene_seed), episode_config_for(set, e), set.config.sensor, *agent);
            }
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    };

    const unsigned n = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(std::max<std::size_t>(1, set.episodes.size()))));
    if (n == 1) {
        work();
    } else {
        std::vector<std::thread> threads;
        for (unsigned i = 0; i < n; ++i) threads.emplace_back(work);
        for (auto& t : threads) t.join();
    }
    if (error) std::rethrow_exception(error);

    EvalReport report;
    report.agent = options.agent_name;
    report.split = to_string(set.split);
    report.rows = std::move(rows);
    report.metrics = compute_metrics(report.rows);
    return report;
}

/// "oracle", "greedy", "stop" or "socket:host:port".
inline AgentFactory agent_factory(const std::string& name, const AgentSpec& spec) {
    if (name == "oracle") return [] { return std::make_unique<OracleAgent>(); };
    if (name == "greedy") return [spec] { return std::make_unique<GreedyAgent>(spec); };
    if (name == "stop") return [] { return std::make_unique<StopAgent>(); };
    if (name.rfind("socket:", 0) == 0) {
        const net::Address addr = net::parse_address(name.substr(7));
        return [addr] { return std::make_unique<SocketAgent>(addr); };
    }
    throw Error(ErrorCode::invalid_argument, "unknown agent: " + name);
}

}  // namespace rvn
