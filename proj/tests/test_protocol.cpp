#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <sstream>
#include <thread>

#include "rvn.hpp"

using namespace rvn;
using nlohmann::json;

namespace {

std::shared_ptr<protocol::ServerContext> context(std::optional<std::uint64_t> seed = std::nullopt) {
    ScenarioConfig c;
    c.episode.n_goal = 2;
    return protocol::ServerContext::make(build_scenarios({51, 52}, Split::train, c), seed);
}

json ask(protocol::Session& s, const json& req) { return json::parse(s.handle(req.dump())); }

std::vector<float> floats(const json& j) { return j.get<std::vector<float>>(); }

// A fixed request script covering resets, motion, errors and a full episode.
std::vector<std::string> script() {
    std::vector<std::string> lines{R"({"id":1,"cmd":"hello"})", R"({"id":2,"cmd":"step","action":"STOP"})", R"({"id":3,"cmd":"reset"})"};
    const char* cycle[] = {"MOVE_FORWARD", "TURN_LEFT", "MOVE_FORWARD", "MOVE_FORWARD", "TURN_RIGHT", "STOP"};
    for (int i = 0; i < 60; ++i) lines.push_back(json{{"id", 10 + i}, {"cmd", "step"}, {"action", cycle[i % 6]}}.dump());
    lines.push_back(R"({"id":80,"cmd":"reset","episode":3})");
    lines.push_back("{not json");
    lines.push_back(R"({"id":81,"cmd":"warp"})");
    for (int i = 0; i < 30; ++i) lines.push_back(json{{"id", 90 + i}, {"cmd", "step"}, {"action", "MOVE_FORWARD"}}.dump());
    lines.push_back(R"({"id":200,"cmd":"reset"})");
    return lines;
}

}  // namespace

TEST(Protocol, HelloAndReset) {
    auto ctx = context();
    protocol::Session s(ctx, "t0");
    const auto hello = ask(s, {{"id", 1}, {"cmd", "hello"}});
    EXPECT_EQ(hello["id"], 1);
    EXPECT_EQ(hello["ok"], true);
    EXPECT_EQ(hello["version"], "RVNP1");
    EXPECT_EQ(hello["n_rays"], 64);
    EXPECT_EQ(hello["C"], 5);
    EXPECT_EQ(hello["episodes"], 4);

    const auto r = ask(s, {{"id", 2}, {"cmd", "reset"}});
    EXPECT_EQ(r["ok"], true);
    EXPECT_EQ(r["obs"].size(), 64u);
    EXPECT_EQ(r["goal"].size(), 2u);
    EXPECT_EQ(r["scene_id"], "scene-51");
    EXPECT_EQ(r["episode"], 0);
    EXPECT_EQ(r["episode_seed"], ctx->scenarios->episodes[0].episode_seed);
    EXPECT_EQ(s.cursor(), 1u);
    EXPECT_EQ(ask(s, {{"id", 3}, {"cmd", "reset"}})["episode"], 1);
    EXPECT_EQ(ask(s, {{"id", 4}, {"cmd", "reset"}, {"episode", 3}})["scene_id"], "scene-52");
    EXPECT_EQ(s.cursor(), 0u);
}

TEST(Protocol, TwelveLeftTurnsRestoreHeading) {
    protocol::Session s(context(), "t0");
    const auto r = ask(s, {{"id", 1}, {"cmd", "reset"}});
    const double yaw0 = s.episode()->state().pose.yaw;
    json last;
    for (int i = 0; i < 12; ++i) {
        last = ask(s, {{"id", 2 + i}, {"cmd", "step"}, {"action", "TURN_LEFT"}});
        ASSERT_EQ(last["ok"], true);
        EXPECT_NEAR(last["reward"].get<double>(), -0.01, 1e-12);
        EXPECT_EQ(last["done"], false);
    }
    EXPECT_NEAR(std::abs(wrap_angle(s.episode()->state().pose.yaw - yaw0)), 0.0, 1e-9);
    const auto a = floats(r["obs"]), b = floats(last["obs"]);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-5);
}

TEST(Protocol, CollisionResponse) {
    protocol::Session s(context(), "t0");
    ask(s, {{"id", 0}, {"cmd", "reset"}});
    json last;
    for (int i = 0; i < 400; ++i) {
        last = ask(s, {{"id", i}, {"cmd", "step"}, {"action", "MOVE_FORWARD"}});
        ASSERT_EQ(last["ok"], true);
        if (last["done"] == true) break;
    }
    ASSERT_EQ(last["done"], true);
    EXPECT_EQ(last["info"]["collided"], true);
    EXPECT_EQ(last["info"]["status"], "FAIL_COLLISION");
    EXPECT_EQ(last["reward"].get<double>(), -0.1);
    EXPECT_EQ(last["cost"].get<double>(), 1.0);
    const auto after = ask(s, {{"id", 999}, {"cmd", "step"}, {"action", "TURN_LEFT"}});
    EXPECT_EQ(after["ok"], false);
    EXPECT_EQ(after["error"], "no_episode");
    EXPECT_EQ(after["id"], 999);
}

TEST(Protocol, ErrorCodesPreserveSession) {
    protocol::Session s(context(), "t0");
    auto err = [&](const std::string& line) { return json::parse(s.handle(line)); };
    EXPECT_EQ(err("{oops")["error"], "bad_request");
    EXPECT_TRUE(err("{oops")["id"].is_null());
    EXPECT_EQ(err("[1,2]")["error"], "bad_request");
    EXPECT_EQ(err(R"({"id":5})")["error"], "bad_request");
    EXPECT_EQ(err(R"({"id":5,"cmd":"fly"})")["error"], "unknown_cmd");
    EXPECT_EQ(err(R"({"id":5,"cmd":"step","action":"STOP"})")["error"], "no_episode");
    EXPECT_EQ(err(R"({"id":5,"cmd":"reset","episode":4})")["error"], "bad_request");
    EXPECT_EQ(err(R"({"id":5,"cmd":"reset","episode":-1})")["error"], "bad_request");
    EXPECT_EQ(err(R"({"id":5,"cmd":"reset","episode":"x"})")["error"], "bad_request");
    ASSERT_EQ(err(R"({"id":6,"cmd":"reset"})")["ok"], true);
    EXPECT_EQ(err(R"({"id":7,"cmd":"step","action":"JUMP"})")["error"], "bad_request");
    EXPECT_EQ(err(R"({"id":7,"cmd":"step"})")["error"], "bad_request");
    const auto ok = err(R"({"id":"abc","cmd":"step","action":"TURN_RIGHT"})");
    EXPECT_EQ(ok["ok"], true);
    EXPECT_EQ(ok["id"], "abc");
    for (const auto& e : {err("{oops"), err(R"({"cmd":"fly"})")}) {
        EXPECT_EQ(e["ok"], false);
        EXPECT_TRUE(e["message"].is_string());
    }
}

TEST(Protocol, FuzzAlwaysAnswersOnce) {
    auto ctx = context();
    protocol::Session s(ctx, "fuzz");
    std::mt19937_64 rng(99);
    const auto valid = script();
    std::uniform_int_distribution<int> byte(0, 255), kind(0, 3);
    for (int i = 0; i < 3000; ++i) {
        std::string line;
        switch (kind(rng)) {
            case 0:
                for (int k = 0, n = byte(rng) % 80; k < n; ++k) line.push_back(static_cast<char>(byte(rng)));
                break;
            case 1: {
                const auto& v = valid[rng() % valid.size()];
                line = v.substr(0, rng() % (v.size() + 1));
                break;
            }
            case 2:
                line = valid[rng() % valid.size()];
                break;
            default:
                line = json{{"id", i}, {"cmd", "step"}, {"action", std::string(1, static_cast<char>(byte(rng)))}}.dump(-1, ' ', false, json::error_handler_t::replace);
        }
        line.erase(std::remove(line.begin(), line.end(), '\n'), line.end());
        std::string out;
        ASSERT_NO_THROW(out = s.handle(line));
        EXPECT_EQ(out.find('\n'), std::string::npos);
        const auto j = json::parse(out, nullptr, false);
        ASSERT_TRUE(j.is_object()) << out;
        ASSERT_TRUE(j["ok"].is_boolean());
    }
}

TEST(Protocol, TranscriptMatchesInProcessEpisode) {
    auto ctx = context();
    for (std::size_t index = 0; index < ctx->scenarios->episodes.size(); ++index) {
        protocol::Session s(ctx, "t");
        const auto r = ask(s, {{"id", 0}, {"cmd", "reset"}, {"episode", index}});
        Episode ep(ctx->scenes->get(ctx->scenarios->episodes[index].scene_seed), ctx->episode_config(index), ctx->scenarios->config.sensor);
        const auto obs0 = ep.reset();
        EXPECT_EQ(floats(r["obs"]), obs0.depths);
        EXPECT_EQ(r["goal"][0].get<float>(), obs0.goal_x);
        EXPECT_EQ(r["goal"][1].get<float>(), obs0.goal_y);

        OracleAgent oracle;
        oracle.begin(ep);
        FrameHistory history(ep.sensor().history);
        history.push(obs0);
        int t = 1;
        while (!ep.done()) {
            const auto stack = history.stack();
            const std::string action = oracle.act(stack, stack.back().goal());
            const StepResult want = ep.step(*parse_action(action));
            history.push(want.observation);
            const auto got = ask(s, {{"id", t++}, {"cmd", "step"}, {"action", action}});
            ASSERT_EQ(got["ok"], true);
            ASSERT_EQ(floats(got["obs"]), want.observation.depths);
            ASSERT_EQ(got["goal"][0].get<float>(), want.observation.goal_x);
            ASSERT_EQ(got["goal"][1].get<float>(), want.observation.goal_y);
            ASSERT_EQ(got["reward"].get<double>(), want.reward);
            ASSERT_EQ(got["cost"].get<double>(), want.cost);
            ASSERT_EQ(got["done"].get<bool>(), want.done);
            ASSERT_EQ(got["info"]["collided"].get<bool>(), want.info.collided);
            ASSERT_EQ(got["info"]["goal_reached"].get<bool>(), want.info.goal_reached);
            ASSERT_EQ(got["info"]["dtg"].get<double>(), want.info.dtg);
            ASSERT_EQ(got["info"]["status"], to_string(want.status));
        }
        EXPECT_EQ(ep.state().status, EpisodeStatus::success);
    }
}

TEST(Protocol, StdioServing) {
    auto ctx = context();
    std::string input;
    for (const auto& l : script()) input += l + "\r\n";
    std::istringstream in(input);
    std::ostringstream out;
    serve_stream(in, out, ctx, "x");
    protocol::Session s(ctx, "x");
    std::string want;
    for (const auto& l : script()) want += s.handle(l) + '\n';
    EXPECT_EQ(out.str(), want);
}

TEST(Server, TcpTranscriptEqualsInProcess) {
    auto ctx = context();
    Server server(net::parse_address("127.0.0.1:0"), ctx);
    server.start();
    ASSERT_NE(server.port(), 0);
    const net::Address addr{"127.0.0.1", server.port()};

    auto run_client = [&](std::vector<std::string>& out) {
        auto stream = net::LineStream::connect(addr);
        for (const auto& l : script()) {
            stream.write_line(l);
            auto reply = stream.read_line();
            ASSERT_TRUE(reply.has_value());
            out.push_back(*reply);
        }
    };
    std::vector<std::string> a, b;
    std::thread ta([&] { run_client(a); }), tb([&] { run_client(b); });
    ta.join();
    tb.join();
    server.stop();

    protocol::Session local(ctx, "local");
    const auto lines = script();
    ASSERT_EQ(a.size(), lines.size());
    ASSERT_EQ(b.size(), lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto want = json::parse(local.handle(lines[i]));
        auto ja = json::parse(a[i]), jb = json::parse(b[i]);
        if (want.contains("session_id")) {
            EXPECT_NE(ja["session_id"], jb["session_id"]);
            for (auto* j : {&want, &ja, &jb}) j->erase("session_id");
        }
        EXPECT_EQ(ja, want) << lines[i];
        EXPECT_EQ(jb, want) << lines[i];
    }
}

TEST(Server, SeedOverride) {
    ::setenv("RVN_SEED", "1000", 1);
    const auto seed = protocol::seed_from_env();
    ::unsetenv("RVN_SEED");
    ASSERT_EQ(seed, 1000u);
    EXPECT_EQ(protocol::seed_from_env(), std::nullopt);
    ::setenv("RVN_SEED", "12x", 1);
    EXPECT_THROW(protocol::seed_from_env(), Error);
    ::unsetenv("RVN_SEED");

    auto ctx = context(seed);
    protocol::Session s(ctx, "t");
    EXPECT_EQ(ask(s, {{"id", 1}, {"cmd", "reset"}, {"episode", 2}})["episode_seed"], 1002);
    protocol::Session plain(context(), "t");
    const auto a = ask(s, {{"id", 1}, {"cmd", "reset"}, {"episode", 0}});
    const auto b = ask(plain, {{"id", 1}, {"cmd", "reset"}, {"episode", 0}});
    EXPECT_EQ(a["episode_seed"], 1000);
    EXPECT_NE(a["goal"], b["goal"]);
}

TEST(Server, SocketAgentDrivesEpisodes) {
    net::Listener policy(net::parse_address("127.0.0.1:0"));
    const std::uint16_t port = policy.port();
    std::atomic<int> requests{0};
    std::thread t([&] {
        auto sock = policy.accept();
        if (!sock) return;
        net::LineStream stream(std::move(*sock));
        while (auto line = stream.read_line()) {
            const auto req = json::parse(*line);
            const int n = requests++;
            if (req["obs"].size() != 6u || req["goal"].size() != 2u) {
                stream.write_line(R"({"action":"bogus"})");
                continue;
            }
            stream.write_line(n < 30 ? R"({"action":"TURN_LEFT"})" : R"({"action":"bogus"})");
        }
    });
    {
        SocketAgent agent({"127.0.0.1", port});
        auto scene = make_nav_scene(generate_scene(60));
        EpisodeConfig c;
        c.seed = 4;
        const auto row = run_episode(scene, c, SensorSpec{}, agent);
        EXPECT_EQ(row.steps, 30);
        EXPECT_EQ(row.flags.back(), "protocol_violation");
        EXPECT_EQ(row.status, "FAIL_TIMEOUT");
    }
    t.join();
    EXPECT_EQ(requests.load(), 31);
}

TEST(Net, ParseAddress) {
    const auto a = net::parse_address("localhost:8080");
    EXPECT_EQ(a.host, "localhost");
    EXPECT_EQ(a.port, 8080);
    EXPECT_EQ(net::parse_address(":9").host, "0.0.0.0");
    EXPECT_THROW(net::parse_address("nohost"), Error);
    EXPECT_THROW(net::parse_address("h:70000"), Error);
    EXPECT_THROW(net::parse_address("h:"), Error);
}
