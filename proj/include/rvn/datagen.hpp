#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rvn/core.hpp"
#include "rvn/episode.hpp"
#include "rvn/follower.hpp"
#include "rvn/geodesic.hpp"
#include "rvn/grid.hpp"
#include "rvn/kinematics.hpp"
#include "rvn/planner.hpp"
#include "rvn/sensing.hpp"

namespace rvn {

struct PlannerConfig {
    double margin_expert = 0.38;    // r_robot + 0.20
    double margin_negative = 0.10;  // r_robot - 0.08
    double d_min = 4.0;
    double d_max = 8.0;
    int k_pre = 8;
    int k_post = 6;
    FollowerParams follower{0.5, 0.36};

    static PlannerConfig for_agent(const AgentSpec& spec) {
        PlannerConfig c;
        c.margin_expert = spec.r_robot + 0.20;
        c.margin_negative = std::max(0.0, spec.r_robot - 0.08);
        c.follower = default_follower_params(spec);
        return c;
    }

    void validate(const AgentSpec& spec) const {
        if (!(margin_expert > spec.r_robot && spec.r_robot > margin_negative && margin_negative >= 0.0))
            throw Error(ErrorCode::invalid_argument, "need margin_expert > r_robot > margin_negative >= 0");
        if (!(d_min >= 0.0 && d_min <= d_max)) throw Error(ErrorCode::invalid_argument, "need 0 <= d_min <= d_max");
        if (k_pre < 0 || k_post < 0) throw Error(ErrorCode::invalid_argument, "k_pre and k_post must be >= 0");
    }
};

enum class TrajectoryKind { expert, negative };

inline const char* to_string(TrajectoryKind k) { return k == TrajectoryKind::expert ? "expert" : "negative"; }

struct TrajectoryFrame {
    Pose pose;
    ObservationFrame observation;
};

/// Window [t_i, t_f] kept around a collision at t_c within a run of T steps.
struct CollisionWindow {
    std::size_t t_i;
    std::size_t t_c;
    std::size_t t_f;
    std::size_t T;  // steps in the full run

    std::size_t frame_count() const { return t_f - t_i + 1; }
    std::size_t collision_index() const { return t_c - t_i; }
};

inline CollisionWindow collision_window(std::size_t t_c, std::size_t T, int k_pre, int k_post) {
    const std::size_t pre = static_cast<std::size_t>(k_pre);
    const std::size_t post = static_cast<std::size_t>(k_post);
    return {t_c > pre ? t_c - pre : 0, t_c, std::max(t_c, std::min(T, t_c + post)), T};
}

struct TrajectoryRecord {
    std::string scene_id;
    TrajectoryKind kind = TrajectoryKind::expert;
    std::vector<TrajectoryFrame> frames;
    std::optional<std::size_t> collision_index;  // negative records only
    std::uint64_t seed = 0;
    double path_length = 0.0;
    int k_pre = 8;
    int k_post = 6;
    std::optional<CollisionWindow> window;  // set by generate_negative, not serialized
};

/// Per-scene planning grids, shared by every record generated on the scene.
struct DatagenScene {
    std::shared_ptr<const NavScene> nav;
    PlannerConfig config;
    InflatedGrid expert_grid;
    InflatedGrid negative_grid;
    std::vector<std::size_t> expert_region;
};

inline std::shared_ptr<const DatagenScene> make_datagen_scene(std::shared_ptr<const NavScene> nav, const PlannerConfig& config) {
    config.validate(nav->agent);
    auto s = std::make_shared<DatagenScene>();
    s->nav = std::move(nav);
    s->config = config;
    s->expert_grid = inflate(*s->nav->grid, config.margin_expert);
    s->negative_grid = inflate(*s->nav->grid, config.margin_negative);
    s->expert_region = largest_component(s->expert_grid);
    return s;
}

namespace detail {

inline TrajectoryFrame make_frame(const Pose& pose, const OccupancyGrid& grid, Vec2 goal, const SensorSpec& sensor) {
    return {pose, render(pose, grid, goal, sensor)};
}

struct Run {
    Vec2 goal;
    PlanResult plan;
    FollowResult follow;
};

// One sampled start/goal pair, planned and followed. nullopt when the pair
// is rejected before following.
inline std::optional<Run> attempt_run(const DatagenScene& scene, const Raster& plan_grid, std::span<const std::size_t> region,
                                      Rng& rng) {
    const PlannerConfig& cfg = scene.config;
    const Raster& nav = scene.nav->nav;
    const Vec2 start = sample_from(plan_grid, region, rng);
    const auto candidates = goal_candidates(geodesic_field(plan_grid, start), cfg.d_min, cfg.d_max);
    if (candidates.empty()) return std::nullopt;
    const Vec2 goal = plan_grid.center(plan_grid.cell_at(candidates[uniform_index(rng, candidates.size())]));
    const double yaw = wrap_angle(uniform_real(rng, -kPi, kPi));
    const LengthRange range{cfg.d_min, cfg.d_max};
    Run run{goal, plan_path(plan_grid, start, goal, range), {}};
    if (!run.plan.ok()) return std::nullopt;
    // The agent-level geodesic must also respect the range.
    if (nav.blocked_at(start) || nav.blocked_at(goal) || !plan_path(nav, start, goal, range).ok()) return std::nullopt;
    run.follow = follow_path(nav, scene.nav->agent, run.plan.waypoints, Pose{start, yaw}, cfg.follower);
    return run;
}

}  // namespace detail

inline constexpr int kMaxGenerationAttempts = 64;

/// Collision-free goal-reaching run planned on the over-inflated map.
inline TrajectoryRecord generate_expert(const DatagenScene& scene, std::uint64_t seed, const SensorSpec& sensor = {}) {
    Rng rng = make_rng(seed);
    for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
        auto run = detail::attempt_run(scene, scene.expert_grid, scene.expert_region, rng);
        if (!run || run->follow.status != FollowStatus::reached) continue;
        TrajectoryRecord rec;
        rec.scene_id = scene.nav->scene_id();
        rec.kind = TrajectoryKind::expert;
        rec.seed = seed;
        rec.path_length = run->plan.length;
        rec.k_pre = scene.config.k_pre;
        rec.k_post = scene.config.k_post;
        for (const Pose& p : run->follow.poses) rec.frames.push_back(detail::make_frame(p, *scene.nav->grid, run->goal, sensor));
        return rec;
    }
    throw Error(ErrorCode::scene_unusable, "no expert trajectory after " + std::to_string(kMaxGenerationAttempts) + " attempts");
}

/// Run planned on the under-inflated map that ends in a collision; keeps
/// k_pre frames before the impact and up to k_post frozen frames after it.
inline TrajectoryRecord generate_negative(const DatagenScene& scene, std::uint64_t seed, const SensorSpec& sensor = {}) {
    Rng rng = make_rng(seed);
    for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
        auto run = detail::attempt_run(scene, scene.negative_grid, scene.nav->region, rng);
        if (!run || run->follow.status != FollowStatus::collided) continue;
        const FollowResult& f = run->follow;
        const CollisionWindow w = collision_window(*f.collision_step, f.step_limit, scene.config.k_pre, scene.config.k_post);
        TrajectoryRecord rec;
        rec.scene_id = scene.nav->scene_id();
        rec.kind = TrajectoryKind::negative;
        rec.seed = seed;
        rec.path_length = run->plan.length;
        rec.k_pre = scene.config.k_pre;
        rec.k_post = scene.config.k_post;
        for (std::size_t t = w.t_i; t <= w.t_c; ++t) rec.frames.push_back(detail::make_frame(f.poses[t], *scene.nav->grid, run->goal, sensor));
        const TrajectoryFrame frozen = rec.frames.back();
        for (std::size_t t = w.t_c + 1; t <= w.t_f; ++t) rec.frames.push_back(frozen);
        rec.collision_index = w.collision_index();
        rec.window = w;
        return rec;
    }
    throw Error(ErrorCode::negative_exhausted, "no colliding run after " + std::to_string(kMaxGenerationAttempts) + " attempts");
}

// Dataset files: <root>/<scene_id>/<seed>/{manifest.json, obs.bin}

inline constexpr char kObsMagic[8] = {'R', 'V', 'N', 'O', 'B', 'S', '1', '\0'};

inline std::string encode_observations(std::span<const TrajectoryFrame> frames) {
    const std::uint32_t n_rays = frames.empty() ? 0 : static_cast<std::uint32_t>(frames.front().observation.depths.size());
    std::string out(kObsMagic, sizeof kObsMagic);
    auto put_u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    };
    auto put_f32 = [&](float v) { put_u32(std::bit_cast<std::uint32_t>(v)); };
    put_u32(static_cast<std::uint32_t>(frames.size()));
    put_u32(n_rays);
    for (const auto& f : frames) {
        if (f.observation.depths.size() != n_rays) throw Error(ErrorCode::invalid_argument, "frames disagree on n_rays");
        for (float d : f.observation.depths) put_f32(d);
        put_f32(f.observation.goal_x);
        put_f32(f.observation.goal_y);
    }
    return out;
}

inline std::vector<ObservationFrame> decode_observations(std::string_view bytes) {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::parse_error, "obs.bin: " + m); };
    if (bytes.size() < 16 || bytes.substr(0, 8) != std::string_view(kObsMagic, 8)) fail("bad magic");
    auto get_u32 = [&](std::size_t off) {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
        return v;
    };
    const std::uint32_t count = get_u32(8);
    const std::uint32_t n_rays = get_u32(12);
    const std::size_t frame_bytes = (static_cast<std::size_t>(n_rays) + 2) * 4;
    if (bytes.size() != 16 + frame_bytes * count) fail("size does not match header");
    std::vector<ObservationFrame> frames(count);
    std::size_t off = 16;
    for (auto& f : frames) {
        f.depths.resize(n_rays);
        for (auto& d : f.depths) d = std::bit_cast<float>(get_u32(off)), off += 4;
        f.goal_x = std::bit_cast<float>(get_u32(off));
        f.goal_y = std::bit_cast<float>(get_u32(off + 4));
        off += 8;
    }
    return frames;
}

inline std::string fixed9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", v);
    return buf;
}

inline std::string encode_manifest(const TrajectoryRecord& rec) {
    std::ostringstream out;
    out << "{\n";
    out << "  \"scene_id\": " << nlohmann::json(rec.scene_id).dump() << ",\n";
    out << "  \"kind\": \"" << to_string(rec.kind) << "\",\n";
    out << "  \"seed\": " << rec.seed << ",\n";
    out << "  \"k_pre\": " << rec.k_pre << ",\n";
    out << "  \"k_post\": " << rec.k_post << ",\n";
    out << "  \"collision_index\": " << (rec.collision_index ? std::to_string(*rec.collision_index) : "null") << ",\n";
    out << "  \"poses\": [";
    for (std::size_t i = 0; i < rec.frames.size(); ++i) {
        const Pose& p = rec.frames[i].pose;
        out << (i ? ",\n    " : "\n    ") << "[" << fixed9(p.position.x) << ", " << fixed9(p.position.y) << ", " << fixed9(p.yaw) << "]";
    }
    out << (rec.frames.empty() ? "],\n" : "\n  ],\n");
    out << "  \"path_length_m\": " << fixed9(rec.path_length) << "\n";
    out << "}\n";
    return out.str();
}

inline TrajectoryRecord decode_record(const std::string& manifest_text, std::string_view obs_bytes) {
    TrajectoryRecord rec;
    std::vector<ObservationFrame> observations = decode_observations(obs_bytes);
    try {
        const auto m = nlohmann::json::parse(manifest_text);
        rec.scene_id = m.at("scene_id").get<std::string>();
        const std::string kind = m.at("kind").get<std::string>();
        if (kind != "expert" && kind != "negative") throw Error(ErrorCode::parse_error, "manifest: unknown kind " + kind);
        rec.kind = kind == "expert" ? TrajectoryKind::expert : TrajectoryKind::negative;
        rec.seed = m.at("seed").get<std::uint64_t>();
        rec.k_pre = m.at("k_pre").get<int>();
        rec.k_post = m.at("k_post").get<int>();
        if (!m.at("collision_index").is_null()) rec.collision_index = m.at("collision_index").get<std::size_t>();
        rec.path_length = m.at("path_length_m").get<double>();
        const auto& poses = m.at("poses");
        if (poses.size() != observations.size()) throw Error(ErrorCode::parse_error, "manifest pose count differs from obs.bin frame count");
        for (std::size_t i = 0; i < poses.size(); ++i) {
            const auto& p = poses[i];
            if (!p.is_array() || p.size() != 3) throw Error(ErrorCode::parse_error, "manifest: pose must be [x, y, yaw]");
            rec.frames.push_back({Pose{{p[0].get<double>(), p[1].get<double>()}, p[2].get<double>()}, std::move(observations[i])});
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse_error, std::string("manifest: ") + e.what());
    }
    return rec;
}

inline std::filesystem::path record_dir(const std::filesystem::path& root, const TrajectoryRecord& rec) {
    return root / rec.scene_id / std::to_string(rec.seed);
}

inline std::filesystem::path write_record(const std::filesystem::path& root, const TrajectoryRecord& rec) {
    const auto dir = record_dir(root, rec);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::io_error, "cannot create " + dir.string() + ": " + ec.message());
    auto write = [](const std::filesystem::path& path, const std::string& bytes) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out || !out.write(bytes.data(), static_cast<std::streamsize>(bytes.size())))
            throw Error(ErrorCode::io_error, "cannot write " + path.string());
    };
    write(dir / "manifest.json", encode_manifest(rec));
    write(dir / "obs.bin", encode_observations(rec.frames));
    return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline TrajectoryRecord read_record(const std::filesystem::path& dir) {
    return decode_record(read_file(dir / "manifest.json"), read_file(dir / "obs.bin"));
}

// Replay validation.

struct ReplayReport {
    bool ok = true;
    std::size_t collisions = 0;
    std::vector<std::string> violations;

    void fail(std::string what) {
        ok = false;
        violations.push_back(std::move(what));
    }
};

/// Checks a record against the simulator: every pose free, every
/// transition produced by one action through execute_action, collision
/// bookkeeping and frozen frames as declared, observations re-rendered.
inline ReplayReport replay_record(const TrajectoryRecord& rec, const NavScene& scene, const SensorSpec& sensor = {}) {
    constexpr double kPosTol = 1e-6;
    constexpr double kYawTol = 1e-6;
    constexpr double kDepthTol = 1e-3;
    ReplayReport report;
    const auto& frames = rec.frames;
    if (frames.empty()) {
        report.fail("record has no frames");
        return report;
    }
    const AgentSpec& spec = scene.agent;
    const Raster& nav = scene.nav;

    for (std::size_t t = 0; t < frames.size(); ++t) {
        if (nav.blocked_at(frames[t].pose.position)) report.fail("frame " + std::to_string(t) + ": pose lies in a blocked cell");
        if (static_cast<int>(frames[t].observation.depths.size()) != sensor.n_rays)
            report.fail("frame " + std::to_string(t) + ": observation has wrong ray count");
    }
    if (!report.ok) return report;

    const Vec2 goal = world_from_relative(frames[0].pose, frames[0].observation.goal());
    auto same_pose = [&](const Pose& a, const Pose& b) {
        return distance(a.position, b.position) <= kPosTol && std::abs(wrap_angle(a.yaw - b.yaw)) <= kYawTol;
    };

    std::optional<std::size_t> ci = rec.collision_index;
    if (rec.kind == TrajectoryKind::expert && ci) report.fail("expert record declares a collision index");
    if (rec.kind == TrajectoryKind::negative) {
        if (!ci) {
            report.fail("negative record lacks a collision index");
            return report;
        }
        if (*ci == 0 || *ci >= frames.size()) {
            report.fail("collision index out of range");
            return report;
        }
        if (*ci > static_cast<std::size_t>(rec.k_pre)) report.fail("more than k_pre frames precede the collision");
        if (frames.size() - 1 - *ci > static_cast<std::size_t>(rec.k_post)) report.fail("more than k_post frames follow the collision");
    }

    for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
        const Pose& from = frames[t].pose;
        const Pose& to = frames[t + 1].pose;
        const std::string where = "transition " + std::to_string(t) + "->" + std::to_string(t + 1);
        if (ci && t >= *ci) {
            if (!same_pose(to, frames[*ci].pose)) report.fail(where + ": pose moved after the collision");
            if (!(frames[t + 1].observation == frames[*ci].observation)) report.fail(where + ": observation not frozen after the collision");
            continue;
        }
        bool matched = false;
        bool collided = false;
        for (Action a : kAllActions) {
            const MoveOutcome m = execute_action(from, a, spec, nav);
            if (same_pose(m.new_pose, to)) {
                matched = true;
                collided = m.collided;
                if (!collided) break;
            }
        }
        if (!matched) {
            report.fail(where + ": no action reproduces this transition");
            continue;
        }
        if (collided) ++report.collisions;
        const bool expect_collision = ci && t + 1 == *ci;
        if (collided != expect_collision)
            report.fail(where + (collided ? ": unexpected collision" : ": declared collision did not happen"));
    }

    for (std::size_t t = 0; t < frames.size(); ++t) {
        if (ci && t > *ci) break;
        const ObservationFrame expected = render(frames[t].pose, *scene.grid, goal, sensor);
        const auto& got = frames[t].observation;
        for (std::size_t i = 0; i < expected.depths.size(); ++i) {
            if (std::abs(expected.depths[i] - got.depths[i]) > kDepthTol) {
                report.fail("frame " + std::to_string(t) + ": depth mismatch on ray " + std::to_string(i));
                break;
            }
        }
        if (distance(expected.goal(), got.goal()) > kDepthTol) report.fail("frame " + std::to_string(t) + ": goal vector mismatch");
    }

    if (rec.kind == TrajectoryKind::expert) {
        if (report.collisions != 0) report.fail("expert record contains a collision");
        if (distance(frames.back().pose.position, goal) > spec.goal_radius() + kPosTol) report.fail("expert record ends outside the goal radius");
    } else if (report.collisions != 1) {
        report.fail("negative record must contain exactly one collision");
    }
    return report;
}

}  // namespace rvn
