#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace rvn {

enum class ErrorCode {
    invalid_argument,
    parse_error,
    generation_failure,
    invalid_source,
    empty_world,
    invalid_state,
    scene_unusable,
    goal_exhausted,
    episode_finished,
    negative_exhausted,
    configuration_error,
    io_error,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::parse_error: return "parse_error";
        case ErrorCode::generation_failure: return "generation_failure";
        case ErrorCode::invalid_source: return "invalid_source";
        case ErrorCode::empty_world: return "empty_world";
        case ErrorCode::invalid_state: return "invalid_state";
        case ErrorCode::scene_unusable: return "scene_unusable";
        case ErrorCode::goal_exhausted: return "goal_exhausted";
        case ErrorCode::episode_finished: return "episode_finished";
        case ErrorCode::negative_exhausted: return "negative_exhausted";
        case ErrorCode::configuration_error: return "configuration_error";
        case ErrorCode::io_error: return "io_error";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message)
        : Error(ErrorCode::parse_error, "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
    friend bool operator==(Vec2 a, Vec2 b) = default;

    double norm() const { return std::hypot(x, y); }
    double squared_norm() const { return x * x + y * y; }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    double r = std::remainder(a, 2.0 * kPi);
    if (r <= -kPi) r += 2.0 * kPi;
    return r;
}

// Seeded randomness. The engine output is fixed by the standard; the
// distribution helpers below are ours so sequences do not depend on the
// standard library implementation.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

/// Uniform integer in [0, n). n must be positive.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    if (n == 0) throw Error(ErrorCode::invalid_argument, "uniform_index over empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % n);
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % n;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform_real(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

}  // namespace rvn
