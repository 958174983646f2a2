#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rvn/core.hpp"

namespace rvn {

struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(Cell a, Cell b) = default;
};

/// Row-major binary raster with metric resolution. Cell (x, y) covers
/// [x*res, (x+1)*res) x [y*res, (y+1)*res); y grows upward.
class Raster {
public:
    Raster() = default;

    Raster(int width, int height, double resolution, std::vector<std::uint8_t> cells)
        : width_(width), height_(height), resolution_(resolution), cells_(std::move(cells)) {
        if (width <= 0 || height <= 0) throw Error(ErrorCode::invalid_argument, "raster dimensions must be positive");
        if (!(resolution > 0.0)) throw Error(ErrorCode::invalid_argument, "resolution must be positive");
        if (cells_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
            throw Error(ErrorCode::invalid_argument, "cell count does not match width x height");
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    double resolution() const noexcept { return resolution_; }
    std::size_t size() const noexcept { return cells_.size(); }
    std::span<const std::uint8_t> cells() const noexcept { return cells_; }

    bool in_bounds(Cell c) const noexcept { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
    std::size_t index(Cell c) const noexcept {
        return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(c.x);
    }
    Cell cell_at(std::size_t index) const noexcept {
        return {static_cast<int>(index % static_cast<std::size_t>(width_)), static_cast<int>(index / static_cast<std::size_t>(width_))};
    }

    /// Out-of-bounds cells read as blocked.
    bool blocked(Cell c) const noexcept { return !in_bounds(c) || cells_[index(c)] != 0; }
    bool blocked(int x, int y) const noexcept { return blocked(Cell{x, y}); }
    bool blocked_at(Vec2 p) const noexcept { return blocked(cell_of(p)); }

    Cell cell_of(Vec2 p) const noexcept {
        return {static_cast<int>(std::floor(p.x / resolution_)), static_cast<int>(std::floor(p.y / resolution_))};
    }
    Vec2 center(Cell c) const noexcept { return {(c.x + 0.5) * resolution_, (c.y + 0.5) * resolution_}; }

    std::size_t blocked_count() const noexcept {
        return static_cast<std::size_t>(std::count_if(cells_.begin(), cells_.end(), [](std::uint8_t v) { return v != 0; }));
    }
    std::size_t free_count() const noexcept { return cells_.size() - blocked_count(); }

    double diagonal_m() const noexcept { return std::hypot(width_ * resolution_, height_ * resolution_); }

    bool same_shape(const Raster& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_ && resolution_ == other.resolution_;
    }

protected:
    int width_ = 0;
    int height_ = 0;
    double resolution_ = 1.0;
    std::vector<std::uint8_t> cells_;
};

/// World geometry: true cells are obstacles. Worlds are closed, so every
/// border cell must be an obstacle.
class OccupancyGrid : public Raster {
public:
    static constexpr int kMinSide = 3;

    OccupancyGrid() = default;

    OccupancyGrid(int width, int height, double resolution, std::vector<std::uint8_t> cells, std::string scene_id = {})
        : Raster(width, height, resolution, std::move(cells)), scene_id_(std::move(scene_id)) {
        if (width < kMinSide || height < kMinSide)
            throw Error(ErrorCode::invalid_argument, "occupancy grid must be at least 3x3");
        if (resolution > 1.0) throw Error(ErrorCode::invalid_argument, "resolution must be in (0, 1] m");
        for (auto& v : cells_) v = v ? 1 : 0;
        if (!closed()) throw Error(ErrorCode::invalid_argument, "border cells must all be obstacles");
    }

    /// An all-free interior wrapped in a one-cell wall.
    static OccupancyGrid empty_room(int width, int height, double resolution, std::string scene_id = {}) {
        std::vector<std::uint8_t> cells(static_cast<std::size_t>(width) * height, 0);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                if (x == 0 || y == 0 || x == width - 1 || y == height - 1) cells[static_cast<std::size_t>(y) * width + x] = 1;
        return OccupancyGrid(width, height, resolution, std::move(cells), std::move(scene_id));
    }

    const std::string& scene_id() const noexcept { return scene_id_; }
    void set_scene_id(std::string id) { scene_id_ = std::move(id); }

    bool closed() const noexcept {
        for (int x = 0; x < width_; ++x)
            if (!blocked(x, 0) || !blocked(x, height_ - 1)) return false;
        for (int y = 0; y < height_; ++y)
            if (!blocked(0, y) || !blocked(width_ - 1, y)) return false;
        return true;
    }

    friend bool operator==(const OccupancyGrid& a, const OccupancyGrid& b) {
        return a.same_shape(b) && a.cells_ == b.cells_;
    }

private:
    std::string scene_id_;
};

/// Configuration-space raster: obstacles grown by `margin` meters.
class InflatedGrid : public Raster {
public:
    InflatedGrid() = default;
    InflatedGrid(Raster raster, double margin, std::string scene_id)
        : Raster(std::move(raster)), margin_(margin), scene_id_(std::move(scene_id)) {}

    double margin() const noexcept { return margin_; }
    const std::string& scene_id() const noexcept { return scene_id_; }

private:
    double margin_ = 0.0;
    std::string scene_id_;
};

namespace detail {

// Offsets whose cell box lies within `margin_cells` of the origin cell center.
inline std::vector<std::pair<int, int>> inflation_kernel(double margin_cells, int max_radius) {
    const int radius = std::min(max_radius, static_cast<int>(std::ceil(margin_cells + 0.5)));
    const double limit = margin_cells * margin_cells + 1e-9;
    std::vector<std::pair<int, int>> kernel;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            const double gx = std::max(0.0, std::abs(dx) - 0.5);
            const double gy = std::max(0.0, std::abs(dy) - 0.5);
            if (gx * gx + gy * gy <= limit) kernel.emplace_back(dx, dy);
        }
    }
    return kernel;
}

}  // namespace detail

/// Grows obstacles of `grid` by `margin` meters: a cell is blocked iff its
/// center is within `margin` of some obstacle cell's box.
inline Raster inflate_raster(const Raster& grid, double margin) {
    if (!(margin >= 0.0)) throw Error(ErrorCode::invalid_argument, "inflation margin must be >= 0");
    const int w = grid.width();
    const int h = grid.height();
    std::vector<std::uint8_t> out(grid.cells().begin(), grid.cells().end());
    if (margin == 0.0 || grid.blocked_count() == 0) return Raster(w, h, grid.resolution(), std::move(out));
    if (margin >= grid.diagonal_m()) {
        std::fill(out.begin(), out.end(), 1);
        return Raster(w, h, grid.resolution(), std::move(out));
    }
    const auto kernel = detail::inflation_kernel(margin / grid.resolution(), std::max(w, h));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!grid.blocked(x, y)) continue;
            // Interior obstacles never hold the nearest box to a free cell.
            bool interior = true;
            for (int dy = -1; dy <= 1 && interior; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const Cell n{x + dx, y + dy};
                    if (grid.in_bounds(n) && !grid.blocked(n)) {
                        interior = false;
                        break;
                    }
                }
            if (interior) continue;
            for (auto [dx, dy] : kernel) {
                const Cell n{x + dx, y + dy};
                if (grid.in_bounds(n)) out[grid.index(n)] = 1;
            }
        }
    }
    return Raster(w, h, grid.resolution(), std::move(out));
}

inline InflatedGrid inflate(const OccupancyGrid& grid, double margin) {
    return InflatedGrid(inflate_raster(grid, margin), margin, grid.scene_id());
}

/// Distance along the unit direction `dir` from `origin` to the first point
/// that touches a blocked cell (closed cell boxes), or kInf if none is met
/// within `max_distance`. Exact grid traversal.
inline double first_blocked_distance(const Raster& grid, Vec2 origin, Vec2 dir, double max_distance) {
    const double res = grid.resolution();
    const double px = origin.x / res;
    const double py = origin.y / res;
    Cell c{static_cast<int>(std::floor(px)), static_cast<int>(std::floor(py))};
    if (grid.blocked(c)) return 0.0;

    const int step_x = dir.x > 0 ? 1 : (dir.x < 0 ? -1 : 0);
    const int step_y = dir.y > 0 ? 1 : (dir.y < 0 ? -1 : 0);
    double t_max_x = kInf;
    double t_max_y = kInf;
    double t_delta_x = kInf;
    double t_delta_y = kInf;
    if (step_x > 0) {
        t_max_x = (c.x + 1 - px) / dir.x;
        t_delta_x = 1.0 / dir.x;
    } else if (step_x < 0) {
        t_max_x = (px - c.x) / -dir.x;
        t_delta_x = -1.0 / dir.x;
    }
    if (step_y > 0) {
        t_max_y = (c.y + 1 - py) / dir.y;
        t_delta_y = 1.0 / dir.y;
    } else if (step_y < 0) {
        t_max_y = (py - c.y) / -dir.y;
        t_delta_y = -1.0 / dir.y;
    }

    const double limit = max_distance / res;
    while (true) {
        const double t = std::min(t_max_x, t_max_y);
        if (t > limit) return kInf;
        if (t_max_x < t_max_y) {
            c.x += step_x;
            t_max_x += t_delta_x;
        } else if (t_max_y < t_max_x) {
            c.y += step_y;
            t_max_y += t_delta_y;
        } else {
            // Passing exactly through a lattice corner touches both side cells.
            if (grid.blocked(c.x + step_x, c.y) || grid.blocked(c.x, c.y + step_y)) return t * res;
            c.x += step_x;
            c.y += step_y;
            t_max_x += t_delta_x;
            t_max_y += t_delta_y;
        }
        if (grid.blocked(c)) return t * res;
    }
}

// RVNMAP v1 text format.

inline std::string format_resolution(double resolution) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", resolution);
    return buf;
}

inline std::string to_rvnmap(const OccupancyGrid& grid) {
    std::string out = "RVNMAP v1 " + std::to_string(grid.width()) + " " + std::to_string(grid.height()) + " " +
                      format_resolution(grid.resolution()) + "\n";
    out.reserve(out.size() + static_cast<std::size_t>(grid.width() + 1) * grid.height());
    for (int y = 0; y < grid.height(); ++y) {
        for (int x = 0; x < grid.width(); ++x) out.push_back(grid.blocked(x, y) ? '#' : '.');
        out.push_back('\n');
    }
    return out;
}

inline OccupancyGrid parse_rvnmap(std::string_view text, std::string scene_id = {}) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    if (lines.empty()) throw ParseError(1, "missing RVNMAP header");

    std::istringstream header{std::string(lines[0])};
    std::string magic, version, extra;
    long long width = 0, height = 0;
    double resolution = 0.0;
    if (!(header >> magic >> version >> width >> height >> resolution) || magic != "RVNMAP" || version != "v1" ||
        (header >> extra))
        throw ParseError(1, "malformed header, expected 'RVNMAP v1 <width> <height> <resolution_m>'");
    if (width < OccupancyGrid::kMinSide || height < OccupancyGrid::kMinSide || width > 100000 || height > 100000)
        throw ParseError(1, "unsupported map dimensions");
    if (!(resolution > 0.0 && resolution <= 1.0)) throw ParseError(1, "resolution must be in (0, 1]");

    std::vector<std::uint8_t> cells(static_cast<std::size_t>(width * height));
    for (long long row = 0; row < height; ++row) {
        const std::size_t line_no = static_cast<std::size_t>(row) + 2;
        if (static_cast<std::size_t>(row) + 1 >= lines.size()) throw ParseError(line_no, "missing row");
        const std::string_view line = lines[static_cast<std::size_t>(row) + 1];
        if (static_cast<long long>(line.size()) != width)
            throw ParseError(line_no, "row has " + std::to_string(line.size()) + " glyphs, expected " + std::to_string(width));
        for (long long x = 0; x < width; ++x) {
            const char g = line[static_cast<std::size_t>(x)];
            if (g != '#' && g != '.') throw ParseError(line_no, std::string("unknown glyph '") + g + "'");
            cells[static_cast<std::size_t>(row * width + x)] = g == '#' ? 1 : 0;
        }
    }
    if (lines.size() > static_cast<std::size_t>(height) + 1)
        throw ParseError(static_cast<std::size_t>(height) + 2, "unexpected content after last row");

    try {
        return OccupancyGrid(static_cast<int>(width), static_cast<int>(height), resolution, std::move(cells), std::move(scene_id));
    } catch (const Error& e) {
        throw ParseError(2, e.what());
    }
}

inline OccupancyGrid load_scene(std::istream& in, std::string scene_id = {}) {
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse_rvnmap(text, std::move(scene_id));
}

inline OccupancyGrid load_scene_file(const std::string& path, std::string scene_id = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path);
    if (scene_id.empty()) {
        const auto slash = path.find_last_of('/');
        scene_id = path.substr(slash == std::string::npos ? 0 : slash + 1);
        const auto dot = scene_id.rfind('.');
        if (dot != std::string::npos && dot > 0) scene_id.resize(dot);
    }
    return load_scene(in, std::move(scene_id));
}

inline void save_scene_file(const OccupancyGrid& grid, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + path);
    out << to_rvnmap(grid);
}

}  // namespace rvn
