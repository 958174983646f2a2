#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace rvn;

namespace {

// Obstacle-free raster with a closed border; `wall_from` blocks every column at
// or beyond that index.
Raster open_raster(int w, int h, double res, int wall_from = -1) {
    std::vector<std::uint8_t> cells(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (x == 0 || y == 0 || x == w - 1 || y == h - 1 || (wall_from >= 0 && x >= wall_from)) cells[static_cast<std::size_t>(y) * w + x] = 1;
    return Raster(w, h, res, std::move(cells));
}

}  // namespace

TEST(Kinematics, ForwardInOpenSpace) {
    const Raster nav = open_raster(80, 80, 0.05);
    const MoveOutcome m = execute_action({{2.0, 2.0}, 0.0}, Action::move_forward, AgentSpec{}, nav);
    EXPECT_NEAR(m.displacement, 0.25, 1e-12);
    EXPECT_FALSE(m.collided);
    EXPECT_NEAR(m.new_pose.position.x, 2.25, 1e-12);
}

TEST(Kinematics, TurnsAreThirtyDegrees) {
    const Raster nav = open_raster(20, 20, 0.1);
    const AgentSpec spec;
    const Pose p{{1.0, 1.0}, 0.0};
    const MoveOutcome l = execute_action(p, Action::turn_left, spec, nav);
    EXPECT_NEAR(l.new_pose.yaw, kPi / 6, 1e-12);
    EXPECT_EQ(l.displacement, 0.0);
    const MoveOutcome back = execute_action(l.new_pose, Action::turn_right, spec, nav);
    EXPECT_NEAR(wrap_angle(back.new_pose.yaw - p.yaw), 0.0, 1e-12);
    Pose q{{1.0, 1.0}, 0.3};
    for (int i = 0; i < 12; ++i) q = execute_action(q, Action::turn_left, spec, nav).new_pose;
    EXPECT_NEAR(wrap_angle(q.yaw - 0.3), 0.0, 1e-12);
    EXPECT_EQ(execute_action(p, Action::stop, spec, nav).new_pose, p);
}

TEST(Kinematics, ClampsAtWallWithTenCentimetresClearance) {
    // Blocked boxes start at x = 23 * 0.05 = 1.15; the agent stands at x = 1.05.
    const Raster nav = open_raster(60, 40, 0.05, 23);
    const MoveOutcome m = execute_action({{1.05, 1.0}, 0.0}, Action::move_forward, AgentSpec{}, nav);
    EXPECT_TRUE(m.collided);
    EXPECT_NEAR(m.displacement, 0.10, 1e-5);
    EXPECT_FALSE(nav.blocked_at(m.new_pose.position));
}

TEST(Kinematics, BlockedStartIsInvalid) {
    const Raster nav = open_raster(20, 20, 0.1);
    EXPECT_THROW(execute_action({{0.05, 0.05}, 0.0}, Action::turn_left, AgentSpec{}, nav), Error);
}

TEST(Kinematics, DisplacementShrinksAsWallApproaches) {
    double last = kInf;
    for (int wall = 40; wall >= 21; --wall) {
        const Raster nav = open_raster(60, 20, 0.05, wall);
        const double d = execute_action({{1.0, 0.5}, 0.0}, Action::move_forward, AgentSpec{}, nav).displacement;
        EXPECT_LE(d, last);
        last = d;
    }
}

TEST(Kinematics, RelativeGoal) {
    EXPECT_EQ(relative_goal({{1, 2}, 0.7}, {1, 2}), (Vec2{0, 0}));
    const Vec2 ahead = relative_goal({{0, 0}, 0.0}, {1, 0});
    EXPECT_NEAR(ahead.x, 1.0, 1e-12);
    EXPECT_NEAR(ahead.y, 0.0, 1e-12);
    const Vec2 right = relative_goal({{0, 0}, kPi / 2}, {1, 0});
    EXPECT_NEAR(right.x, 0.0, 1e-12);
    EXPECT_NEAR(right.y, -1.0, 1e-12);
    const Pose p{{0.3, -1.2}, 2.1};
    const Vec2 w = world_from_relative(p, relative_goal(p, {4.0, 5.0}));
    EXPECT_NEAR(w.x, 4.0, 1e-12);
    EXPECT_NEAR(w.y, 5.0, 1e-12);
}

TEST(Kinematics, RandomActionsAgreeWithSegmentOracle) {
    std::mt19937_64 gen(77);
    const AgentSpec spec;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const auto nav = make_nav_scene(generate_scene(500 + seed), spec);
        Rng rng = make_rng(seed);
        Pose pose{sample_from(nav->nav, nav->region, rng), 0.1};
        for (int i = 0; i < 2500; ++i) {
            const Action a = kAllActions[gen() % 3];
            const MoveOutcome m = execute_action(pose, a, spec, nav->nav);
            ASSERT_FALSE(nav->nav.blocked_at(m.new_pose.position));
            if (a == Action::move_forward) {
                const double hit = oracle::ray_hit(nav->nav, pose.position, heading(pose.yaw), spec.d_step);
                ASSERT_EQ(m.collided, hit < spec.d_step - 1e-9);
                if (m.collided) ASSERT_NEAR(m.displacement, hit, 1e-5);
            }
            pose = m.new_pose;
            if (gen() % 50 == 0) pose.yaw = std::uniform_real_distribution<double>(-kPi, kPi)(gen);
        }
    }
}

TEST(Sensing, ClipsAtMaxRange) {
    const auto g = OccupancyGrid::empty_room(140, 140, 0.1);
    const auto f = render({{7.0, 7.0}, 0.4}, g, {8.0, 7.0}, SensorSpec{});
    ASSERT_EQ(f.depths.size(), 64u);
    for (float d : f.depths) EXPECT_FLOAT_EQ(d, 5.0f);
}

TEST(Sensing, FlatWallOneMetreAhead) {
    SensorSpec spec;
    spec.n_rays = 65;  // odd count puts a ray on the heading
    std::vector<std::uint8_t> cells(60 * 40, 0);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 60; ++x)
            if (x == 0 || y == 0 || y == 39 || x >= 40) cells[static_cast<std::size_t>(y) * 60 + x] = 1;
    const OccupancyGrid g(60, 40, 0.05, cells);
    const auto f = render({{1.0, 1.0}, 0.0}, g, {1.5, 1.0}, spec);
    EXPECT_NEAR(f.depths[32], 1.0, 1e-6);
    EXPECT_NEAR(f.goal_x, 0.5, 1e-6);
    EXPECT_NEAR(f.goal_y, 0.0, 1e-6);
    EXPECT_NEAR(spec.ray_offset(0), kPi / 4, 1e-12);
    EXPECT_NEAR(spec.ray_offset(64), -kPi / 4, 1e-12);
}

TEST(Sensing, MatchesRayMarchOracle) {
    const SensorSpec spec;
    const AgentSpec agent;
    int corner_clips = 0, rays = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto scene = make_nav_scene(generate_scene(40 + seed), agent);
        const auto& g = *scene->grid;
        Rng rng = make_rng(seed);
        for (int k = 0; k < 20; ++k) {
            const Pose p{sample_from(scene->nav, scene->region, rng), uniform_real(rng, -kPi, kPi)};
            const auto f = render(p, g, {0, 0}, spec);
            for (int i = 0; i < spec.n_rays; ++i) {
                const Vec2 dir = heading(p.yaw + spec.ray_offset(i));
                const double exact = std::min(oracle::ray_hit(g, p.position, dir, spec.max_range), spec.max_range);
                const double marched = std::min(oracle::march(g, p.position, dir, spec.max_range, g.resolution() / 8), spec.max_range);
                ASSERT_NEAR(f.depths[i], exact, 1e-5);
                // A fixed-step march can step over a clipped corner but never
                // reports a hit before the true one.
                ASSERT_LE(f.depths[i], marched + 1e-5);
                if (marched - exact > g.resolution() / 2) ++corner_clips;
                ++rays;
            }
            // Heading depth on the raw map bounds free forward travel on the
            // inflated one, up to half a cell diagonal of rasterisation.
            SensorSpec one = spec;
            one.n_rays = 1;
            one.fov = 0.0;
            const double depth = render(p, g, {0, 0}, one).depths[0];
            const MoveOutcome m = execute_action(p, Action::move_forward, agent, scene->nav);
            if (depth < spec.max_range) ASSERT_LE(m.displacement + agent.r_robot, depth + g.resolution() * std::sqrt(0.5) + 1e-6);
        }
    }
    EXPECT_LT(corner_clips * 100, rays);
}

TEST(Sensing, HistoryPadding) {
    ObservationFrame f0, f1;
    f0.depths = {1.0f};
    f1.depths = {2.0f};
    const std::vector<ObservationFrame> two{f0, f1};
    const auto s0 = history_stack(two, 0);
    ASSERT_EQ(s0.size(), 1u);
    EXPECT_EQ(s0[0], f1);
    const auto s4 = history_stack(two, 4);
    ASSERT_EQ(s4.size(), 5u);
    for (int i = 0; i < 4; ++i) EXPECT_EQ(s4[i], f0);
    EXPECT_EQ(s4[4], f1);
}

TEST(Planner, MatchesDijkstraOracle) {
    std::mt19937_64 rng(4321);
    for (int i = 0; i < 50; ++i) {
        const Raster r = oracle::random_raster(rng, 32, 32, 0.25);
        const auto region = largest_component(r);
        if (region.size() < 2) continue;
        const Cell s = r.cell_at(region[rng() % region.size()]);
        const auto dist = oracle::dijkstra(r, s);
        const auto bf = oracle::bellman_ford(r, s);
        for (int k = 0; k < 10; ++k) {
            const Cell t = r.cell_at(region[rng() % region.size()]);
            const PlanResult plan = plan_path(r, r.center(s), r.center(t));
            ASSERT_TRUE(plan.ok());
            ASSERT_EQ(plan.cost.straight, bf.at(t)->straight);
            ASSERT_EQ(plan.cost.diagonal, bf.at(t)->diagonal);
            ASSERT_NEAR(plan.length, static_cast<double>(dist[r.index(t)]) * r.resolution(), 1e-9);
            // The waypoint chain is a legal lattice path of exactly that cost.
            ASSERT_EQ(plan.waypoints.front(), r.center(s));
            ASSERT_EQ(plan.waypoints.back(), r.center(t));
            long long straight = 0, diagonal = 0;
            for (std::size_t j = 1; j < plan.waypoints.size(); ++j) {
                const Cell a = r.cell_of(plan.waypoints[j - 1]), b = r.cell_of(plan.waypoints[j]);
                const int dx = b.x - a.x, dy = b.y - a.y;
                ASSERT_TRUE(std::abs(dx) <= 1 && std::abs(dy) <= 1 && (dx || dy));
                ASSERT_FALSE(r.blocked(b));
                if (dx && dy) {
                    ASSERT_FALSE(r.blocked(a.x + dx, a.y));
                    ASSERT_FALSE(r.blocked(a.x, a.y + dy));
                    ++diagonal;
                } else {
                    ++straight;
                }
            }
            ASSERT_EQ(straight, plan.cost.straight);
            ASSERT_EQ(diagonal, plan.cost.diagonal);
        }
    }
}

TEST(Planner, Rejections) {
    const auto room = OccupancyGrid::empty_room(40, 40, 0.1);
    const Vec2 p{1.05, 1.05};
    EXPECT_EQ(plan_path(room, p, p, 0.0, LengthRange{4.0, 8.0}).status, PlanStatus::out_of_range);
    EXPECT_TRUE(plan_path(room, p, p, 0.0).ok());
    EXPECT_EQ(plan_path(room, {0.05, 0.05}, p, 0.0).status, PlanStatus::invalid_endpoint);
    const auto split = oracle::from_rows({"#######", "#..#..#", "#..#..#", "#######"}, 0.1);
    EXPECT_EQ(plan_path(split, {0.15, 0.15}, {0.55, 0.15}, 0.0).status, PlanStatus::no_path);
}

TEST(Planner, StraightCorridor) {
    // 5 m corridor, 1 m wide, 0.05 m cells.
    std::vector<std::string> rows(22, std::string(112, '#'));
    for (int r = 1; r <= 20; ++r) rows[r] = "#" + std::string(110, '.') + "#";
    const auto g = oracle::from_rows(rows, 0.05);
    const PlanResult plan = plan_path(g, {0.275, 0.525}, {5.275, 0.525}, 0.0, LengthRange{4.0, 8.0});
    ASSERT_TRUE(plan.ok());
    EXPECT_NEAR(plan.length, 5.0, 0.05);

    const auto f = follow_path(inflate(g, 0.18), AgentSpec{}, plan.waypoints, 0.0);
    EXPECT_EQ(f.status, FollowStatus::reached);
    for (Action a : f.actions) EXPECT_EQ(a, Action::move_forward);
}

TEST(Planner, NearestFreePoint) {
    const auto room = OccupancyGrid::empty_room(10, 10, 0.1);
    const auto q = nearest_free_point(room, {0.05, 0.45});
    ASSERT_TRUE(q.has_value());
    EXPECT_NEAR(q->x, 0.15, 1e-12);
    EXPECT_NEAR(q->y, 0.45, 1e-12);
    EXPECT_EQ(*nearest_free_point(room, {0.45, 0.45}), room.center({4, 4}));
}

TEST(Follower, UnderInflatedPlanCollidesAtPinch) {
    // Two rooms joined by a 0.3 m gap: wide enough for the 0.10 m plan margin,
    // too narrow for the 0.18 m body.
    std::vector<std::string> rows(42, std::string(82, '.'));
    for (int r = 0; r < 42; ++r) {
        rows[r].front() = rows[r].back() = '#';
        if (r == 0 || r == 41) rows[r] = std::string(82, '#');
        if (r < 18 || r > 23) rows[r][41] = '#';
    }
    const auto g = oracle::from_rows(rows, 0.05);
    const PlanResult plan = plan_path(g, {1.0, 1.0}, {3.0, 1.0}, 0.10);
    ASSERT_TRUE(plan.ok());
    const auto f = follow_path(inflate(g, 0.18), AgentSpec{}, plan.waypoints, 0.0);
    EXPECT_EQ(f.status, FollowStatus::collided);
    ASSERT_TRUE(f.collision_step.has_value());
    EXPECT_LT(*f.collision_step, f.poses.size());
    EXPECT_EQ(*f.collision_step, f.poses.size() - 1);
}

TEST(Follower, StepLimit) {
    EXPECT_EQ(follow_step_limit(5.0, AgentSpec{}), 80u);
    EXPECT_EQ(follow_step_limit(0.0, AgentSpec{}), 1u);
}
