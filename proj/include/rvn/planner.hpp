#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <queue>
#include <vector>

#include "rvn/core.hpp"
#include "rvn/geodesic.hpp"
#include "rvn/grid.hpp"
#include "rvn/kinematics.hpp"

namespace rvn {

enum class PlanStatus { ok, invalid_endpoint, no_path, out_of_range };

inline const char* to_string(PlanStatus s) {
    switch (s) {
        case PlanStatus::ok: return "ok";
        case PlanStatus::invalid_endpoint: return "invalid_endpoint";
        case PlanStatus::no_path: return "no_path";
        case PlanStatus::out_of_range: return "out_of_range";
    }
    return "no_path";
}

struct LengthRange {
    double min = 0.0;
    double max = kInf;
};

struct PlanResult {
    PlanStatus status = PlanStatus::no_path;
    std::vector<Vec2> waypoints;  // cell centers, start first
    PathCost cost;
    double length = 0.0;

    bool ok() const { return status == PlanStatus::ok; }
};

/// Optimal lattice path by A* with the octile heuristic. A path whose length
/// falls outside `range` is reported as out_of_range (waypoints kept).
inline PlanResult plan_path(const Raster& nav, Vec2 start, Vec2 goal, std::optional<LengthRange> range = std::nullopt) {
    PlanResult result;
    const Cell s = nav.cell_of(start);
    const Cell g = nav.cell_of(goal);
    if (nav.blocked(s) || nav.blocked(g)) {
        result.status = PlanStatus::invalid_endpoint;
        return result;
    }

    std::vector<PathCost> best(nav.size(), kUnreachable);
    std::vector<std::int64_t> parent(nav.size(), -1);
    struct Entry {
        PathCost f;
        PathCost h;
        std::size_t index;
    };
    auto later = [](const Entry& a, const Entry& b) {
        if (!(a.f == b.f)) return a.f > b.f;
        if (!(a.h == b.h)) return a.h > b.h;
        return a.index > b.index;
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(later)> open(later);
    const std::size_t start_i = nav.index(s);
    const std::size_t goal_i = nav.index(g);
    best[start_i] = PathCost{};
    open.push({octile(s, g), octile(s, g), start_i});

    bool found = false;
    while (!open.empty()) {
        const Entry top = open.top();
        open.pop();
        const PathCost cost = best[top.index];
        if (!(cost + top.h == top.f)) continue;  // stale entry
        if (top.index == goal_i) {
            found = true;
            break;
        }
        for_each_neighbor(nav, nav.cell_at(top.index), [&](Cell n, PathCost step) {
            const std::size_t ni = nav.index(n);
            const PathCost candidate = cost + step;
            if (best[ni].straight < 0 || candidate < best[ni]) {
                best[ni] = candidate;
                parent[ni] = static_cast<std::int64_t>(top.index);
                const PathCost h = octile(n, g);
                open.push({candidate + h, h, ni});
            }
        });
    }
    if (!found) {
        result.status = PlanStatus::no_path;
        return result;
    }

    for (std::int64_t i = static_cast<std::int64_t>(goal_i); i >= 0; i = parent[static_cast<std::size_t>(i)])
        result.waypoints.push_back(nav.center(nav.cell_at(static_cast<std::size_t>(i))));
    std::reverse(result.waypoints.begin(), result.waypoints.end());
    result.cost = best[goal_i];
    result.length = result.cost.meters(nav.resolution());
    constexpr double kTol = 1e-9;
    const bool in_range = !range || (result.length >= range->min - kTol && result.length <= range->max + kTol);
    result.status = in_range ? PlanStatus::ok : PlanStatus::out_of_range;
    return result;
}

inline PlanResult plan_path(const OccupancyGrid& grid, Vec2 start, Vec2 goal, double margin,
                            std::optional<LengthRange> range = std::nullopt) {
    return plan_path(inflate(grid, margin), start, goal, range);
}

/// Free cell of `nav` nearest to p (Euclidean between centers); p's own cell
/// when it is free. Returns nullopt when nav has no free cell.
inline std::optional<Vec2> nearest_free_point(const Raster& nav, Vec2 p) {
    const Cell c = nav.cell_of(p);
    if (!nav.blocked(c)) return nav.center(c);
    const int max_ring = std::max(nav.width(), nav.height());
    std::optional<Cell> best;
    double best_d = kInf;
    for (int ring = 1; ring <= max_ring; ++ring) {
        // Anything on a later ring is at least (ring - 1) cells away.
        if (best && (ring - 1) * nav.resolution() > best_d) break;
        for (int dy = -ring; dy <= ring; ++dy) {
            for (int dx = -ring; dx <= ring; ++dx) {
                if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
                const Cell n{c.x + dx, c.y + dy};
                if (nav.blocked(n)) continue;
                const double d = distance(nav.center(n), p);
                if (d < best_d) best_d = d, best = n;
            }
        }
    }
    if (!best) return std::nullopt;
    return nav.center(*best);
}

}  // namespace rvn
