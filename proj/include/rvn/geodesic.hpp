#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <numbers>
#include <queue>
#include <span>
#include <vector>

#include "rvn/core.hpp"
#include "rvn/grid.hpp"

namespace rvn {

/// Shortest-path length on the 8-connected lattice, held as exact move
/// counts. Comparison is exact, so every optimal path of a query converts
/// to the same meters value.
struct PathCost {
    std::int32_t straight = 0;
    std::int32_t diagonal = 0;

    double meters(double resolution) const noexcept {
        return resolution * (static_cast<double>(straight) + static_cast<double>(diagonal) * std::numbers::sqrt2);
    }

    friend PathCost operator+(PathCost a, PathCost b) { return {a.straight + b.straight, a.diagonal + b.diagonal}; }
    friend bool operator==(PathCost a, PathCost b) = default;

    // a.straight + a.diagonal*sqrt2 < b.straight + b.diagonal*sqrt2
    friend bool operator<(PathCost a, PathCost b) {
        const std::int64_t x = static_cast<std::int64_t>(a.straight) - b.straight;
        const std::int64_t y = static_cast<std::int64_t>(b.diagonal) - a.diagonal;
        if (y == 0) return x < 0;
        if (y > 0) return x <= 0 || x * x < 2 * y * y;
        return x < 0 && x * x > 2 * y * y;
    }
    friend bool operator>(PathCost a, PathCost b) { return b < a; }
    friend bool operator<=(PathCost a, PathCost b) { return !(b < a); }
};

inline constexpr PathCost kStraightStep{1, 0};
inline constexpr PathCost kDiagonalStep{0, 1};

/// Octile distance between two cells; admissible and consistent on the lattice.
inline PathCost octile(Cell a, Cell b) {
    const int dx = std::abs(a.x - b.x);
    const int dy = std::abs(a.y - b.y);
    return {std::max(dx, dy) - std::min(dx, dy), std::min(dx, dy)};
}

/// Calls fn(neighbor, step_cost) for each lattice neighbor of `c` that is
/// free. Diagonal moves require both adjacent side cells to be free, so the
/// graph never squeezes between two blocked cells touching at a corner.
template <typename Fn>
void for_each_neighbor(const Raster& grid, Cell c, Fn&& fn) {
    static constexpr std::array<std::array<int, 2>, 4> kAxis{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
    static constexpr std::array<std::array<int, 2>, 4> kDiag{{{1, 1}, {-1, 1}, {1, -1}, {-1, -1}}};
    for (auto [dx, dy] : kAxis) {
        const Cell n{c.x + dx, c.y + dy};
        if (!grid.blocked(n)) fn(n, kStraightStep);
    }
    for (auto [dx, dy] : kDiag) {
        const Cell n{c.x + dx, c.y + dy};
        if (!grid.blocked(n) && !grid.blocked(c.x + dx, c.y) && !grid.blocked(c.x, c.y + dy)) fn(n, kDiagonalStep);
    }
}

/// Geodesic distances from one source cell over the free lattice.
class DistanceField {
public:
    DistanceField(int width, int height, double resolution, Cell source, std::vector<PathCost> costs)
        : width_(width), height_(height), resolution_(resolution), source_(source), costs_(std::move(costs)) {}

    Cell source() const noexcept { return source_; }
    double resolution() const noexcept { return resolution_; }
    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

    bool reachable(Cell c) const noexcept { return in_bounds(c) && costs_[index(c)].straight >= 0; }
    PathCost cost(Cell c) const {
        if (!reachable(c)) throw Error(ErrorCode::invalid_argument, "cell is unreachable");
        return costs_[index(c)];
    }
    /// Meters, or kInf when unreachable.
    double distance(Cell c) const noexcept { return reachable(c) ? costs_[index(c)].meters(resolution_) : kInf; }
    double distance_at(Vec2 p) const noexcept {
        return distance(Cell{static_cast<int>(std::floor(p.x / resolution_)), static_cast<int>(std::floor(p.y / resolution_))});
    }
    std::span<const PathCost> costs() const noexcept { return costs_; }

private:
    bool in_bounds(Cell c) const noexcept { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
    std::size_t index(Cell c) const noexcept { return static_cast<std::size_t>(c.y) * width_ + c.x; }

    int width_;
    int height_;
    double resolution_;
    Cell source_;
    std::vector<PathCost> costs_;
};

inline constexpr PathCost kUnreachable{-1, -1};

inline DistanceField geodesic_field(const Raster& grid, Cell source) {
    if (grid.blocked(source)) throw Error(ErrorCode::invalid_source, "geodesic source lies in a blocked cell");
    std::vector<PathCost> dist(grid.size(), kUnreachable);
    struct Entry {
        PathCost cost;
        std::size_t index;
    };
    auto later = [](const Entry& a, const Entry& b) {
        if (a.cost == b.cost) return a.index > b.index;
        return a.cost > b.cost;
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(later)> open(later);
    dist[grid.index(source)] = PathCost{};
    open.push({PathCost{}, grid.index(source)});
    while (!open.empty()) {
        const Entry top = open.top();
        open.pop();
        if (!(dist[top.index] == top.cost)) continue;
        const Cell c = grid.cell_at(top.index);
        for_each_neighbor(grid, c, [&](Cell n, PathCost step) {
            const std::size_t ni = grid.index(n);
            const PathCost candidate = top.cost + step;
            if (dist[ni].straight < 0 || candidate < dist[ni]) {
                dist[ni] = candidate;
                open.push({candidate, ni});
            }
        });
    }
    return DistanceField(grid.width(), grid.height(), grid.resolution(), source, std::move(dist));
}

inline DistanceField geodesic_field(const Raster& grid, Vec2 source) { return geodesic_field(grid, grid.cell_of(source)); }

/// Free cells of the largest lattice-connected component, ascending by index.
/// Ties between equal-sized components go to the one holding the lowest index.
inline std::vector<std::size_t> largest_component(const Raster& grid) {
    std::vector<std::int32_t> label(grid.size(), -1);
    std::vector<std::size_t> best;
    std::vector<std::size_t> current;
    std::int32_t next_label = 0;
    for (std::size_t start = 0; start < grid.size(); ++start) {
        if (label[start] >= 0 || grid.cells()[start]) continue;
        current.clear();
        std::deque<std::size_t> queue{start};
        label[start] = next_label;
        while (!queue.empty()) {
            const std::size_t i = queue.front();
            queue.pop_front();
            current.push_back(i);
            for_each_neighbor(grid, grid.cell_at(i), [&](Cell n, PathCost) {
                const std::size_t ni = grid.index(n);
                if (label[ni] < 0) {
                    label[ni] = next_label;
                    queue.push_back(ni);
                }
            });
        }
        ++next_label;
        if (current.size() > best.size()) best = current;
    }
    std::sort(best.begin(), best.end());
    return best;
}

/// Uniform cell center drawn from a precomputed cell list.
inline Vec2 sample_from(const Raster& grid, std::span<const std::size_t> cells, Rng& rng) {
    if (cells.empty()) throw Error(ErrorCode::empty_world, "no free cells to sample from");
    return grid.center(grid.cell_at(cells[uniform_index(rng, cells.size())]));
}

inline Vec2 sample_navigable_point(const Raster& grid, Rng& rng) {
    const auto region = largest_component(grid);
    return sample_from(grid, region, rng);
}

}  // namespace rvn
