#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rvn/core.hpp"
#include "rvn/geodesic.hpp"
#include "rvn/grid.hpp"

namespace rvn {

/// Procedural floorplan parameters. Lengths in meters.
struct SceneParams {
    double width_m = 20.0;
    double height_m = 20.0;
    double resolution = 0.05;
    int min_rooms = 4;
    int max_rooms = 8;
    double room_min_m = 3.0;
    double room_max_m = 7.0;
    double corridor_min_m = 1.0;
    double corridor_max_m = 1.6;
    double furniture_density = 0.04;  // expected blobs per m^2 of room floor
    double furniture_min_m = 0.3;
    double furniture_max_m = 1.0;
    double furniture_gap_m = 1.0;  // clearance from walls and other furniture
    double min_passage_m = 0.4;    // free space is opened with a disc of this radius
};

inline std::string generated_scene_id(std::uint64_t seed) { return "scene-" + std::to_string(seed); }

/// Parses ids produced by generated_scene_id.
inline bool parse_generated_scene_id(const std::string& id, std::uint64_t& seed) {
    constexpr std::string_view prefix = "scene-";
    if (id.size() <= prefix.size() || id.compare(0, prefix.size(), prefix) != 0) return false;
    const std::string digits = id.substr(prefix.size());
    if (!std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) return false;
    try {
        seed = std::stoull(digits);
    } catch (...) {
        return false;
    }
    return true;
}

namespace detail {

struct Rect {
    double x0, y0, x1, y1;
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
    Vec2 center() const { return {(x0 + x1) / 2, (y0 + y1) / 2}; }
    Rect grown(double d) const { return {x0 - d, y0 - d, x1 + d, y1 + d}; }
    bool overlaps(const Rect& o) const { return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1; }
    bool contains(const Rect& o) const { return o.x0 >= x0 && o.y0 >= y0 && o.x1 <= x1 && o.y1 <= y1; }
};

class SceneCanvas {
public:
    SceneCanvas(int w, int h, double res) : w_(w), h_(h), res_(res), cells_(static_cast<std::size_t>(w) * h, 1) {}

    void fill_rect(const Rect& r, std::uint8_t value) {
        for_cells_in(r, [&](int x, int y) { set(x, y, value); });
    }
    void fill_circle(Vec2 c, double radius, std::uint8_t value) {
        for_cells_in(Rect{c.x - radius, c.y - radius, c.x + radius, c.y + radius}, [&](int x, int y) {
            const Vec2 p{(x + 0.5) * res_, (y + 0.5) * res_};
            if (distance(p, c) <= radius) set(x, y, value);
        });
    }
    void seal_border() {
        for (int x = 0; x < w_; ++x) set(x, 0, 1), set(x, h_ - 1, 1);
        for (int y = 0; y < h_; ++y) set(0, y, 1), set(w_ - 1, y, 1);
    }
    std::vector<std::uint8_t>& cells() { return cells_; }

private:
    // Cells whose centers lie inside r.
    template <typename Fn>
    void for_cells_in(const Rect& r, Fn&& fn) {
        const int x0 = std::max(0, static_cast<int>(std::ceil(r.x0 / res_ - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::ceil(r.y0 / res_ - 0.5)));
        const int x1 = std::min(w_ - 1, static_cast<int>(std::floor(r.x1 / res_ - 0.5)));
        const int y1 = std::min(h_ - 1, static_cast<int>(std::floor(r.y1 / res_ - 0.5)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) fn(x, y);
    }
    void set(int x, int y, std::uint8_t v) { cells_[static_cast<std::size_t>(y) * w_ + x] = v; }

    int w_, h_;
    double res_;
    std::vector<std::uint8_t> cells_;
};

inline void validate(const SceneParams& p) {
    auto fail = [](const char* what) { throw Error(ErrorCode::invalid_argument, std::string("scene params: ") + what); };
    if (!(p.resolution > 0.0 && p.resolution <= 1.0)) fail("resolution must be in (0, 1]");
    if (p.width_m / p.resolution < 8 || p.height_m / p.resolution < 8) fail("world must span at least 8x8 cells");
    if (p.width_m / p.resolution > 20000 || p.height_m / p.resolution > 20000) fail("world too large");
    if (p.min_rooms < 0 || p.max_rooms < p.min_rooms) fail("room count range is invalid");
    if (!(p.room_min_m > 0.0 && p.room_max_m >= p.room_min_m)) fail("room size range is invalid");
    if (!(p.corridor_min_m > 0.0 && p.corridor_max_m >= p.corridor_min_m)) fail("corridor width range is invalid");
    if (!(p.furniture_density >= 0.0)) fail("furniture density must be >= 0");
    if (!(p.furniture_min_m > 0.0 && p.furniture_max_m >= p.furniture_min_m)) fail("furniture size range is invalid");
    if (!(p.furniture_gap_m >= 0.0) || !(p.min_passage_m >= 0.0)) fail("clearances must be >= 0");
}

// Morphological opening of the free space: keeps only cells covered by a
// free disc of the given radius.
inline void open_free_space(std::vector<std::uint8_t>& cells, int w, int h, double res, double radius) {
    const Raster world(w, h, res, cells);
    const Raster eroded = inflate_raster(world, radius);
    std::vector<std::uint8_t> cores(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) cores[i] = eroded.cells()[i] ? 0 : 1;
    const Raster covered = inflate_raster(Raster(w, h, res, std::move(cores)), radius);
    for (std::size_t i = 0; i < cells.size(); ++i)
        if (!covered.cells()[i]) cells[i] = 1;
}

inline std::vector<std::uint8_t> layout_once(const SceneParams& p, int w, int h, Rng& rng) {
    const double res = p.resolution;
    const Rect interior{res, res, (w - 1) * res, (h - 1) * res};
    SceneCanvas canvas(w, h, res);

    std::vector<Rect> rooms;
    const int room_target = p.min_rooms + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(p.max_rooms - p.min_rooms + 1)));
    if (room_target == 0) {
        rooms.push_back(interior);
    } else {
        constexpr double kWall = 0.3;
        for (int attempt = 0; attempt < 400 && static_cast<int>(rooms.size()) < room_target; ++attempt) {
            const double rw = std::min(uniform_real(rng, p.room_min_m, p.room_max_m), interior.width());
            const double rh = std::min(uniform_real(rng, p.room_min_m, p.room_max_m), interior.height());
            const double x0 = uniform_real(rng, interior.x0, interior.x1 - rw);
            const double y0 = uniform_real(rng, interior.y0, interior.y1 - rh);
            const Rect room{x0, y0, x0 + rw, y0 + rh};
            const bool clear = std::none_of(rooms.begin(), rooms.end(), [&](const Rect& o) { return o.grown(kWall).overlaps(room); });
            if (clear) rooms.push_back(room);
        }
    }
    for (const Rect& r : rooms) canvas.fill_rect(r, 0);

    // Each room joins its nearest predecessor through an L-shaped corridor.
    for (std::size_t i = 1; i < rooms.size(); ++i) {
        std::size_t nearest = 0;
        for (std::size_t j = 1; j < i; ++j)
            if (distance(rooms[j].center(), rooms[i].center()) < distance(rooms[nearest].center(), rooms[i].center())) nearest = j;
        const double cw = uniform_real(rng, p.corridor_min_m, p.corridor_max_m);
        const double half = cw / 2;
        const Vec2 a = rooms[i].center();
        const Vec2 b = rooms[nearest].center();
        const Vec2 elbow = (rng() & 1) ? Vec2{b.x, a.y} : Vec2{a.x, b.y};
        for (auto [s, t] : {std::pair{a, elbow}, std::pair{elbow, b}}) {
            canvas.fill_rect(Rect{std::min(s.x, t.x) - half, std::min(s.y, t.y) - half, std::max(s.x, t.x) + half,
                                  std::max(s.y, t.y) + half},
                             0);
        }
    }

    std::vector<Rect> furniture;
    for (const Rect& room : rooms) {
        const double expected = room.area() * p.furniture_density;
        int count = static_cast<int>(std::floor(expected));
        if (uniform01(rng) < expected - count) ++count;
        for (int k = 0; k < count; ++k) {
            for (int attempt = 0; attempt < 50; ++attempt) {
                const bool round = (rng() & 1) != 0;
                const double sw = uniform_real(rng, p.furniture_min_m, p.furniture_max_m);
                const double sh = round ? sw : uniform_real(rng, p.furniture_min_m, p.furniture_max_m);
                const Rect inner = room.grown(-p.furniture_gap_m);
                if (inner.width() < sw || inner.height() < sh) break;
                const double x0 = uniform_real(rng, inner.x0, inner.x1 - sw);
                const double y0 = uniform_real(rng, inner.y0, inner.y1 - sh);
                const Rect blob{x0, y0, x0 + sw, y0 + sh};
                const bool clear = std::none_of(furniture.begin(), furniture.end(),
                                                [&](const Rect& o) { return o.grown(p.furniture_gap_m).overlaps(blob); });
                if (!clear) continue;
                furniture.push_back(blob);
                if (round)
                    canvas.fill_circle(blob.center(), sw / 2, 1);
                else
                    canvas.fill_rect(blob, 1);
                break;
            }
        }
    }

    canvas.seal_border();
    auto cells = std::move(canvas.cells());
    const bool trivial = rooms.size() == 1 && room_target == 0 && furniture.empty();
    if (p.min_passage_m > 0.0 && !trivial) open_free_space(cells, w, h, res, p.min_passage_m);
    return cells;
}

}  // namespace detail

/// Seeded procedural indoor floorplan: rooms joined by corridors, with
/// rectangular and round furniture. Deterministic in (seed, params).
inline OccupancyGrid generate_scene(std::uint64_t seed, const SceneParams& params = {}) {
    detail::validate(params);
    const int w = static_cast<int>(std::lround(params.width_m / params.resolution));
    const int h = static_cast<int>(std::lround(params.height_m / params.resolution));
    Rng rng = make_rng(seed);
    constexpr int kAttempts = 32;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        auto cells = detail::layout_once(params, w, h, rng);
        OccupancyGrid grid(w, h, params.resolution, std::move(cells), generated_scene_id(seed));
        const std::size_t free = grid.free_count();
        const std::size_t largest = largest_component(grid).size();
        if (largest >= 100 && static_cast<double>(largest) >= 0.6 * static_cast<double>(free)) return grid;
    }
    throw Error(ErrorCode::generation_failure,
                "scene generation produced no usable layout after " + std::to_string(kAttempts) + " attempts");
}

}  // namespace rvn
