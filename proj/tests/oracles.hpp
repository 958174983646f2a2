#pragma once

// Independent reference implementations used only by tests. They favour
// brute force over speed and share no code paths with the library beyond
// the basic grid container.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <vector>

#include "rvn.hpp"

namespace oracle {

using rvn::Cell;
using rvn::Raster;
using rvn::Vec2;

inline constexpr long double kSqrt2 = 1.41421356237309504880168872420969808L;

struct Cost {
    long long straight = 0;
    long long diagonal = 0;
    long double value() const { return straight + diagonal * kSqrt2; }
};

struct Field {
    int w = 0, h = 0;
    std::vector<std::optional<Cost>> cost;
    const std::optional<Cost>& at(Cell c) const { return cost[static_cast<std::size_t>(c.y) * w + c.x]; }
};

inline bool free_cell(const Raster& g, int x, int y) { return x >= 0 && y >= 0 && x < g.width() && y < g.height() && !g.blocked(x, y); }

// Bellman-Ford relaxation to a fixed point over the 8-neighbourhood; a
// diagonal move needs both orthogonal side cells free.
inline Field bellman_ford(const Raster& g, Cell src) {
    Field f;
    f.w = g.width();
    f.h = g.height();
    f.cost.assign(static_cast<std::size_t>(f.w) * f.h, std::nullopt);
    if (!free_cell(g, src.x, src.y)) return f;
    f.cost[static_cast<std::size_t>(src.y) * f.w + src.x] = Cost{};
    bool changed = true;
    while (changed) {
        changed = false;
        for (int y = 0; y < f.h; ++y) {
            for (int x = 0; x < f.w; ++x) {
                const auto& here = f.cost[static_cast<std::size_t>(y) * f.w + x];
                if (!here) continue;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (!dx && !dy) continue;
                        const int nx = x + dx, ny = y + dy;
                        if (!free_cell(g, nx, ny)) continue;
                        const bool diag = dx && dy;
                        if (diag && (!free_cell(g, x + dx, y) || !free_cell(g, x, y + dy))) continue;
                        Cost c = *here;
                        (diag ? c.diagonal : c.straight) += 1;
                        auto& there = f.cost[static_cast<std::size_t>(ny) * f.w + nx];
                        if (!there || c.value() < there->value() - 1e-12L) {
                            there = c;
                            changed = true;
                        }
                    }
                }
            }
        }
    }
    return f;
}

// Textbook Dijkstra on long double weights, written separately from the above.
inline std::vector<long double> dijkstra(const Raster& g, Cell src) {
    const long double inf = std::numeric_limits<long double>::infinity();
    const int w = g.width(), h = g.height();
    std::vector<long double> dist(static_cast<std::size_t>(w) * h, inf);
    if (!free_cell(g, src.x, src.y)) return dist;
    using Item = std::pair<long double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[static_cast<std::size_t>(src.y) * w + src.x] = 0;
    pq.push({0, src.y * w + src.x});
    while (!pq.empty()) {
        auto [d, i] = pq.top();
        pq.pop();
        if (d > dist[i]) continue;
        const int x = i % w, y = i / w;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (!dx && !dy) continue;
                if (!free_cell(g, x + dx, y + dy)) continue;
                if (dx && dy && (!free_cell(g, x + dx, y) || !free_cell(g, x, y + dy))) continue;
                const long double nd = d + (dx && dy ? kSqrt2 : 1.0L);
                const int j = (y + dy) * w + x + dx;
                if (nd < dist[j]) {
                    dist[j] = nd;
                    pq.push({nd, j});
                }
            }
    }
    return dist;
}

// Cell is blocked iff its center lies within margin of some obstacle cell's box.
inline std::vector<std::uint8_t> inflate(const Raster& g, double margin) {
    const double res = g.resolution();
    std::vector<std::uint8_t> out(g.cells().begin(), g.cells().end());
    for (int y = 0; y < g.height(); ++y)
        for (int x = 0; x < g.width(); ++x) {
            if (out[static_cast<std::size_t>(y) * g.width() + x]) continue;
            const double cx = (x + 0.5) * res, cy = (y + 0.5) * res;
            for (int oy = 0; oy < g.height() && !out[static_cast<std::size_t>(y) * g.width() + x]; ++oy)
                for (int ox = 0; ox < g.width(); ++ox) {
                    if (!g.blocked(ox, oy)) continue;
                    const double qx = std::clamp(cx, ox * res, (ox + 1) * res);
                    const double qy = std::clamp(cy, oy * res, (oy + 1) * res);
                    if (std::hypot(cx - qx, cy - qy) <= margin + 1e-9 * res) {
                        out[static_cast<std::size_t>(y) * g.width() + x] = 1;
                        break;
                    }
                }
        }
    return out;
}

// Entry parameter of the ray p + t*d (t >= 0) into the closed box, or +inf.
inline double slab_entry(Vec2 p, Vec2 d, double x0, double y0, double x1, double y1) {
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    const double o[2] = {p.x, p.y}, v[2] = {d.x, d.y}, a[2] = {x0, y0}, b[2] = {x1, y1};
    for (int k = 0; k < 2; ++k) {
        if (v[k] == 0.0) {
            if (o[k] < a[k] || o[k] > b[k]) return std::numeric_limits<double>::infinity();
            continue;
        }
        double t0 = (a[k] - o[k]) / v[k], t1 = (b[k] - o[k]) / v[k];
        if (t0 > t1) std::swap(t0, t1);
        lo = std::max(lo, t0);
        hi = std::min(hi, t1);
    }
    return lo <= hi ? lo : std::numeric_limits<double>::infinity();
}

// Distance to the first blocked closed cell box along a unit direction; scans
// every blocked cell in the ray's bounding box.
inline double ray_hit(const Raster& g, Vec2 p, Vec2 dir, double max_range) {
    const double res = g.resolution();
    const Vec2 e = p + max_range * dir;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(p.x, e.x) / res)) - 1);
    const int x1 = std::min(g.width() - 1, static_cast<int>(std::floor(std::max(p.x, e.x) / res)) + 1);
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(p.y, e.y) / res)) - 1);
    const int y1 = std::min(g.height() - 1, static_cast<int>(std::floor(std::max(p.y, e.y) / res)) + 1);
    double best = std::numeric_limits<double>::infinity();
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            if (!g.blocked(x, y)) continue;
            best = std::min(best, slab_entry(p, dir, x * res, y * res, (x + 1) * res, (y + 1) * res));
        }
    return best <= max_range ? best : std::numeric_limits<double>::infinity();
}

// Fixed-step march: first sample whose containing cell is blocked.
inline double march(const Raster& g, Vec2 p, Vec2 dir, double max_range, double step) {
    for (double t = 0.0; t <= max_range; t += step) {
        const Vec2 q = p + t * dir;
        const int x = static_cast<int>(std::floor(q.x / g.resolution()));
        const int y = static_cast<int>(std::floor(q.y / g.resolution()));
        if (!free_cell(g, x, y)) return t;
    }
    return std::numeric_limits<double>::infinity();
}

inline Raster random_raster(std::mt19937_64& rng, int w, int h, double density, double res = 0.1, bool border = true) {
    std::bernoulli_distribution coin(density);
    std::vector<std::uint8_t> cells(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1;
            cells[static_cast<std::size_t>(y) * w + x] = (border && edge) || coin(rng);
        }
    return Raster(w, h, res, std::move(cells));
}

inline rvn::OccupancyGrid random_grid(std::mt19937_64& rng, int w, int h, double density, double res = 0.1) {
    const Raster r = random_raster(rng, w, h, density, res, true);
    return rvn::OccupancyGrid(w, h, res, std::vector<std::uint8_t>(r.cells().begin(), r.cells().end()));
}

// Grid from rows of '#' and '.', first string is the top row (largest y).
inline rvn::OccupancyGrid from_rows(const std::vector<std::string>& rows, double res) {
    const int h = static_cast<int>(rows.size());
    const int w = static_cast<int>(rows.front().size());
    std::vector<std::uint8_t> cells(static_cast<std::size_t>(w) * h);
    for (int r = 0; r < h; ++r)
        for (int x = 0; x < w; ++x) cells[static_cast<std::size_t>(h - 1 - r) * w + x] = rows[r][x] == '#';
    return rvn::OccupancyGrid(w, h, res, std::move(cells));
}

}  // namespace oracle
