#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rvn.hpp"

namespace fs = std::filesystem;
using rvn::json;

namespace {

void print(const json& j) { std::cout << rvn::protocol::dump(j) << std::endl; }

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size())))
        throw rvn::Error(rvn::ErrorCode::io_error, "cannot write " + path.string());
}

std::string read_input(const std::string& path) {
    if (path == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        return ss.str();
    }
    return rvn::read_file(path);
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::uint64_t count) {
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t i = 0; i < count; ++i) seeds.push_back(first + i);
    return seeds;
}

// Scene for a record or scenario: an explicit RVNMAP file, else regenerated from "scene-<seed>".
std::shared_ptr<const rvn::NavScene> resolve_scene(const std::string& scene_id, const std::string& map_path,
                                                   const rvn::SceneParams& params, const rvn::AgentSpec& agent) {
    if (!map_path.empty()) return rvn::make_nav_scene(rvn::load_scene_file(map_path, scene_id), agent);
    std::uint64_t seed = 0;
    if (!rvn::parse_generated_scene_id(scene_id, seed))
        throw rvn::Error(rvn::ErrorCode::invalid_argument, "scene " + scene_id + " is not generated; pass --map");
    return rvn::make_nav_scene(rvn::generate_scene(seed, params), agent);
}

rvn::ScenarioSet load_scenarios(const std::string& path) { return rvn::parse_scenario_file(rvn::read_file(path)); }

struct Opts {
    // gen-scenes / gen-dataset / build-scenarios
    std::uint64_t seed = 0;
    std::uint64_t count = 1;
    std::string out;
    std::string kind = "expert";
    std::uint64_t per_scene = 10;
    std::uint64_t scene_count = 1;
    std::string split = "test";
    int n_goal = 32;
    std::vector<std::uint64_t> seeds;
    // eval / serve
    std::string scenarios;
    std::string agent = "oracle";
    unsigned workers = 1;
    std::string json_out;
    std::string csv_out;
    std::string bind = "127.0.0.1:7878";
    bool stdio = false;
    // cor-select / replay
    std::string input = "-";
    std::string record;
    std::string map;
};

int gen_scenes(const Opts& o) {
    const rvn::SceneParams params;
    fs::create_directories(o.out);
    json scenes = json::array();
    for (auto seed : seed_range(o.seed, o.count)) {
        const rvn::OccupancyGrid grid = rvn::generate_scene(seed, params);
        const fs::path path = fs::path(o.out) / (grid.scene_id() + ".rvnmap");
        rvn::save_scene_file(grid, path);
        scenes.push_back({{"scene_id", grid.scene_id()}, {"seed", seed}, {"path", path.string()}, {"free_cells", grid.free_count()}});
    }
    print({{"ok", true}, {"command", "gen-scenes"}, {"scenes", scenes}});
    return 0;
}

int gen_dataset(const Opts& o) {
    if (o.kind != "expert" && o.kind != "negative") throw rvn::Error(rvn::ErrorCode::invalid_argument, "--kind must be expert or negative");
    const rvn::AgentSpec agent;
    const rvn::SensorSpec sensor;
    const auto config = rvn::PlannerConfig::for_agent(agent);
    std::size_t records = 0;
    std::size_t collisions = 0;
    std::size_t frames = 0;
    for (auto scene_seed : seed_range(o.seed, o.scene_count)) {
        auto nav = rvn::make_nav_scene(rvn::generate_scene(scene_seed), agent);
        auto scene = rvn::make_datagen_scene(nav, config);
        for (std::uint64_t i = 0; i < o.per_scene; ++i) {
            const std::uint64_t seed = rvn::splitmix64(scene_seed * 1000003ULL + i);
            const rvn::TrajectoryRecord rec =
                o.kind == "expert" ? rvn::generate_expert(*scene, seed, sensor) : rvn::generate_negative(*scene, seed, sensor);
            if (fs::exists(rvn::record_dir(o.out, rec) / "manifest.json"))
                throw rvn::Error(rvn::ErrorCode::io_error, "refusing to overwrite " + rvn::record_dir(o.out, rec).string());
            rvn::write_record(o.out, rec);
            ++records;
            frames += rec.frames.size();
            collisions += rec.collision_index.has_value();
        }
    }
    print({{"ok", true}, {"command", "gen-dataset"}, {"kind", o.kind}, {"records", records}, {"frames", frames}, {"collisions", collisions}, {"out", o.out}});
    return 0;
}

int build_scenarios(const Opts& o) {
    rvn::ScenarioConfig config;
    config.episode.n_goal = o.n_goal;
    const auto seeds = o.seeds.empty() ? seed_range(o.seed, o.count) : o.seeds;
    const rvn::ScenarioSet set = rvn::build_scenarios(seeds, rvn::parse_split(o.split), config);
    const std::string text = rvn::to_scenario_file(set);
    if (o.out.empty() || o.out == "-") {
        std::cout << text;
        return 0;
    }
    write_text(o.out, text);
    print({{"ok", true}, {"command", "build-scenarios"}, {"split", o.split}, {"scenes", seeds.size()}, {"episodes", set.episodes.size()}, {"out", o.out}});
    return 0;
}

int eval(const Opts& o) {
    const rvn::ScenarioSet set = load_scenarios(o.scenarios);
    const auto factory = rvn::agent_factory(o.agent, set.config.agent);
    const rvn::EvalReport report = rvn::run_eval(set, factory, {o.workers, o.agent});
    json j = rvn::to_json(report);
    if (!o.csv_out.empty()) write_text(o.csv_out, rvn::to_csv(report));
    if (!o.json_out.empty()) write_text(o.json_out, rvn::protocol::dump(j) + "\n");
    j.erase("rows");
    j["ok"] = true;
    j["command"] = "eval";
    print(j);
    return 0;
}

int serve(const Opts& o) {
    auto ctx = rvn::protocol::ServerContext::make(load_scenarios(o.scenarios), rvn::protocol::seed_from_env());
    if (o.stdio) {
        rvn::serve_stream(std::cin, std::cout, ctx);
        return 0;
    }
    rvn::Server server(rvn::net::parse_address(o.bind), ctx);
    std::cerr << rvn::protocol::dump({{"ok", true}, {"command", "serve"}, {"port", server.port()}}) << std::endl;
    server.run();
    return 0;
}

int cor_select(const Opts& o) {
    json in;
    try {
        in = json::parse(read_input(o.input));
    } catch (const json::exception& e) {
        throw rvn::Error(rvn::ErrorCode::parse_error, e.what());
    }
    auto read_set = [&](const char* key) {
        std::vector<rvn::CandidateTrajectory> out;
        try {
            for (const auto& traj : in.at(key)) {
                rvn::CandidateTrajectory t;
                for (const auto& p : traj) t.waypoints.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
                out.push_back(std::move(t));
            }
        } catch (const json::exception& e) {
            throw rvn::Error(rvn::ErrorCode::parse_error, std::string(key) + ": " + e.what());
        }
        return out;
    };
    const auto experts = read_set("experts");
    const auto negatives = read_set("negatives");
    rvn::CorConfig config;
    config.alpha = in.value("alpha", config.alpha);
    config.maximize = in.value("maximize", false);
    config.leave_one_out = in.value("leave_one_out", false);
    const rvn::CorSelection sel = rvn::select(experts, negatives, config);
    json chosen = json::array();
    for (const auto& w : sel.chosen.waypoints) chosen.push_back({w.x, w.y});
    print({{"ok", true},
           {"command", "cor-select"},
           {"index", sel.index},
           {"scores", sel.scores},
           {"chosen", chosen},
           {"action", rvn::to_string(rvn::trajectory_to_action(sel.chosen, rvn::AgentSpec{}))}});
    return 0;
}

int replay(const Opts& o) {
    const rvn::TrajectoryRecord rec = rvn::read_record(o.record);
    const auto scene = resolve_scene(rec.scene_id, o.map, rvn::SceneParams{}, rvn::AgentSpec{});
    const rvn::ReplayReport report = rvn::replay_record(rec, *scene);
    print({{"ok", report.ok},
           {"command", "replay"},
           {"scene_id", rec.scene_id},
           {"kind", rvn::to_string(rec.kind)},
           {"frames", rec.frames.size()},
           {"collisions", report.collisions},
           {"violations", report.violations}});
    return report.ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rvn: navigation environment, dataset and evaluation tools"};
    app.require_subcommand(1);
    Opts o;

    auto* gs = app.add_subcommand("gen-scenes", "Generate RVNMAP scene files");
    gs->add_option("--seed", o.seed, "first scene seed");
    gs->add_option("--count", o.count, "number of consecutive seeds");
    gs->add_option("--out", o.out, "output directory")->required();

    auto* gd = app.add_subcommand("gen-dataset", "Generate expert or negative trajectory records");
    gd->add_option("--kind", o.kind, "expert|negative")->check(CLI::IsMember({"expert", "negative"}));
    gd->add_option("--seed", o.seed, "first scene seed");
    gd->add_option("--scenes", o.scene_count, "number of scenes");
    gd->add_option("--per-scene", o.per_scene, "records per scene");
    gd->add_option("--out", o.out, "dataset root")->required();

    auto* bs = app.add_subcommand("build-scenarios", "Write a scenario file");
    bs->add_option("--split", o.split, "train|val|test")->check(CLI::IsMember({"train", "val", "test"}));
    bs->add_option("--seed", o.seed, "first scene seed");
    bs->add_option("--count", o.count, "number of scenes");
    bs->add_option("--seeds", o.seeds, "explicit scene seeds");
    bs->add_option("--n-goal", o.n_goal, "goals per episode");
    bs->add_option("--out", o.out, "output file (- for stdout)");

    auto* ev = app.add_subcommand("eval", "Evaluate an agent on a scenario file");
    ev->add_option("--scenarios", o.scenarios, "scenario file")->required();
    ev->add_option("--agent", o.agent, "oracle|greedy|stop|socket:host:port");
    ev->add_option("--workers", o.workers, "parallel workers");
    ev->add_option("--json", o.json_out, "full report output");
    ev->add_option("--csv", o.csv_out, "per-episode CSV output");

    auto* sv = app.add_subcommand("serve", "Serve RVNP1 sessions");
    sv->add_option("--scenarios", o.scenarios, "scenario file")->required();
    sv->add_option("--bind", o.bind, "host:port");
    sv->add_flag("--stdio", o.stdio, "serve one session over stdin/stdout");

    auto* cs = app.add_subcommand("cor-select", "Pick a candidate trajectory by CoR score");
    cs->add_option("--input", o.input, "JSON file with experts, negatives, alpha (- for stdin)");

    auto* rp = app.add_subcommand("replay", "Validate a trajectory record against the simulator");
    rp->add_option("--record", o.record, "record directory")->required();
    rp->add_option("--map", o.map, "RVNMAP file for non-generated scenes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << app.help();
        print({{"ok", false}, {"error", "usage"}, {"message", e.what()}});
        return 2;
    }

    try {
        if (*gs) return gen_scenes(o);
        if (*gd) return gen_dataset(o);
        if (*bs) return build_scenarios(o);
        if (*ev) return eval(o);
        if (*sv) return serve(o);
        if (*cs) return cor_select(o);
        if (*rp) return replay(o);
    } catch (const rvn::Error& e) {
        print({{"ok", false}, {"error", rvn::to_string(e.code())}, {"message", e.what()}});
        return 1;
    } catch (const std::exception& e) {
        print({{"ok", false}, {"error", "internal"}, {"message", e.what()}});
        return 1;
    }
    return 2;
}
