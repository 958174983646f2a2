#pragma once

#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "rvn/episode.hpp"
#include "rvn/eval.hpp"
#include "rvn/kinematics.hpp"

namespace rvn::protocol {

inline constexpr const char* kVersion = "RVNP1";

inline std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

/// Seed override from the RVN_SEED environment variable, if set and numeric.
inline std::optional<std::uint64_t> seed_from_env() {
    const char* v = std::getenv("RVN_SEED");
    if (!v || !*v) return std::nullopt;
    char* end = nullptr;
    const unsigned long long s = std::strtoull(v, &end, 10);
    if (*end != '\0') throw Error(ErrorCode::invalid_argument, "RVN_SEED must be an unsigned integer");
    return static_cast<std::uint64_t>(s);
}

/// Immutable state shared by every session of one server.
struct ServerContext {
    std::shared_ptr<const ScenarioSet> scenarios;
    std::shared_ptr<SceneCache> scenes;
    std::optional<std::uint64_t> seed_override;  // episode i uses seed_override + i

    static std::shared_ptr<ServerContext> make(ScenarioSet set, std::optional<std::uint64_t> seed_override = std::nullopt) {
        if (set.episodes.empty()) throw Error(ErrorCode::configuration_error, "scenario set has no episodes");
        auto ctx = std::make_shared<ServerContext>();
        ctx->scenes = std::make_shared<SceneCache>(set.config.scene, set.config.agent);
        ctx->scenarios = std::make_shared<const ScenarioSet>(std::move(set));
        ctx->seed_override = seed_override;
        return ctx;
    }

    EpisodeConfig episode_config(std::size_t index) const {
        EpisodeConfig c = episode_config_for(*scenarios, scenarios->episodes[index]);
        if (seed_override) c.seed = *seed_override + index;
        return c;
    }
};

inline json frame_json(const ObservationFrame& f) { return json(f.depths); }
inline json goal_json(const ObservationFrame& f) { return json::array({f.goal_x, f.goal_y}); }

/// One client's protocol state: a scenario cursor and at most one live episode.
/// Every request line yields exactly one response line.
class Session {
public:
    Session(std::shared_ptr<const ServerContext> ctx, std::string session_id)
        : ctx_(std::move(ctx)), session_id_(std::move(session_id)) {}

    std::string handle(std::string_view line) {
        json id = nullptr;
        try {
            json req = json::parse(line.begin(), line.end(), nullptr, false);
            if (req.is_discarded()) return error(id, "bad_request", "malformed JSON");
            if (!req.is_object()) return error(id, "bad_request", "request must be a JSON object");
            if (req.contains("id")) id = req["id"];
            if (!req.contains("cmd") || !req["cmd"].is_string()) return error(id, "bad_request", "missing string field cmd");
            const std::string cmd = req["cmd"].get<std::string>();
            if (cmd == "hello") return hello(id);
            if (cmd == "reset") return reset(id, req);
            if (cmd == "step") return step(id, req);
            return error(id, "unknown_cmd", "unknown cmd: " + cmd);
        } catch (const Error& e) {
            return error(id, to_string(e.code()), e.what());
        } catch (const std::exception& e) {
            return error(id, "internal", e.what());
        }
    }

    const std::string& id() const { return session_id_; }
    std::size_t cursor() const { return cursor_; }
    const Episode* episode() const { return episode_ ? &*episode_ : nullptr; }

private:
    std::string hello(const json& id) {
        const auto& sensor = ctx_->scenarios->config.sensor;
        return dump({{"id", id},
                     {"ok", true},
                     {"version", kVersion},
                     {"n_rays", sensor.n_rays},
                     {"C", sensor.history},
                     {"session_id", session_id_},
                     {"episodes", ctx_->scenarios->episodes.size()}});
    }

    std::string reset(const json& id, const json& req) {
        const auto& set = *ctx_->scenarios;
        std::size_t index = cursor_;
        if (req.contains("episode") && !req["episode"].is_null()) {
            const json& e = req["episode"];
            if (!e.is_number_integer() || e.get<long long>() < 0) return error(id, "bad_request", "episode must be a non-negative integer");
            index = static_cast<std::size_t>(e.get<long long>());
        }
        if (index >= set.episodes.size())
            return error(id, "bad_request", "episode index " + std::to_string(index) + " out of range (" +
                                                std::to_string(set.episodes.size()) + " episodes)");
        const auto& entry = set.episodes[index];
        episode_.reset();
        episode_.emplace(ctx_->scenes->get(entry.scene_seed), ctx_->episode_config(index), set.config.sensor);
        const ObservationFrame obs = episode_->reset();
        cursor_ = (index + 1) % set.episodes.size();
        return dump({{"id", id},
                     {"ok", true},
                     {"obs", frame_json(obs)},
                     {"goal", goal_json(obs)},
                     {"scene_id", entry.scene_id},
                     {"episode", index},
                     {"episode_seed", episode_->config().seed}});
    }

    std::string step(const json& id, const json& req) {
        if (!req.contains("action") || !req["action"].is_string()) return error(id, "bad_request", "missing string field action");
        const auto action = parse_action(req["action"].get<std::string>());
        if (!action) return error(id, "bad_request", "unknown action: " + req["action"].get<std::string>());
        if (!episode_ || !episode_->started()) return error(id, "no_episode", "step before reset");
        if (episode_->done()) return error(id, "no_episode", "episode finished; reset to continue");
        const StepResult r = episode_->step(*action);
        return dump({{"id", id},
                     {"ok", true},
                     {"obs", frame_json(r.observation)},
                     {"goal", goal_json(r.observation)},
                     {"reward", r.reward},
                     {"cost", r.cost},
                     {"done", r.done},
                     {"info",
                      {{"collided", r.info.collided},
                       {"goal_reached", r.info.goal_reached},
                       {"dtg", r.info.dtg},
                       {"status", to_string(r.status)},
                       {"goals_reached", episode_->state().goals_reached}}}});
    }

    static std::string error(const json& id, std::string_view code, std::string_view message) {
        return dump({{"id", id}, {"ok", false}, {"error", code}, {"message", message}});
    }

    std::shared_ptr<const ServerContext> ctx_;
    std::string session_id_;
    std::size_t cursor_ = 0;
    std::optional<Episode> episode_;
};

}  // namespace rvn::protocol
