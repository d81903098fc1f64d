#pragma once

// Shared vocabulary: units, errors, small vector type, RNG, threading.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace nonplanar {

// Natural units throughout: hbar = mu = 1. Lengths are in units of the
// contour scale chosen by the caller.
inline constexpr double hbar = 1.0;
inline constexpr double mass = 1.0;
inline constexpr double kinetic_prefactor = hbar * hbar / (2.0 * mass);

inline constexpr double pi = std::numbers::pi;

enum class ErrorKind { config, domain, tolerance };

/// Base error. The kind maps onto the CLI exit status.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept {
        switch (kind_) {
        case ErrorKind::config: return 2;
        case ErrorKind::domain: return 3;
        case ErrorKind::tolerance: return 4;
        }
        return 1;
    }
    const char* kind_name() const noexcept {
        switch (kind_) {
        case ErrorKind::config: return "config";
        case ErrorKind::domain: return "domain";
        case ErrorKind::tolerance: return "tolerance";
        }
        return "unknown";
    }

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// Input outside the mathematical domain of an operation (apex, bad order...).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

/// An iterative method did not reach its tolerance.
class ToleranceError : public Error {
public:
    explicit ToleranceError(const std::string& what) : Error(ErrorKind::tolerance, what) {}
};

/// Form of the geometric confining potential on the cone flank.
/// `derived` substitutes the principal curvatures directly; `printed` carries an
/// extra factor 1/(1+(f0/R)^2) (the closed form quoted for the circular cone).
enum class ConfiningForm { derived, printed };

inline const char* to_string(ConfiningForm f) { return f == ConfiningForm::derived ? "derived" : "printed"; }

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator-() const { return {-x, -y}; }
    constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
    constexpr double cross(Vec2 o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
};

inline constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }

/// Counter-based 64-bit generator: value k of stream `key` is a pure function
/// of (key, k), so independent trajectories never share state.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Derives the key of sub-stream `index` from a master seed.
    static constexpr std::uint64_t substream(std::uint64_t seed, std::uint64_t index) {
        return mix(mix(seed) ^ (index * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL));
    }

    std::uint64_t next() { return mix(key_ ^ mix(counter_++)); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        // Box-Muller; the second variate is discarded to keep the stream stateless.
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
    }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

/// Worker count: NONPLANAR_THREADS if set, otherwise the hardware concurrency.
inline unsigned thread_count() {
    if (const char* env = std::getenv("NONPLANAR_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n > 0) return static_cast<unsigned>(n);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

/// Runs body(i) for i in [0, n) on interleaved indices. The body must
/// only write to slots it owns; results are then independent of scheduling.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
    const unsigned workers = std::min<std::size_t>(thread_count(), std::max<std::size_t>(n, 1));
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline double square(double x) { return x * x; }

}  // namespace nonplanar
