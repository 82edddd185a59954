#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gridcp {

// ---------------------------------------------------------------------------
// Error hierarchy. Contract violations throw; recoverable conditions
// (divergence, empty strata) travel as values.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class SyntaxError : public Error {
  public:
    SyntaxError(const std::string& msg, std::size_t line, std::size_t column)
        : Error("syntax error at " + std::to_string(line) + ":" +
                std::to_string(column) + ": " + msg),
          line_(line), column_(column) {}
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

  private:
    std::size_t line_, column_;
};

class ValidationError : public Error {
  public:
    using Error::Error;
};

class UnknownBusError : public Error {
  public:
    explicit UnknownBusError(int bus_id)
        : Error("unknown bus id " + std::to_string(bus_id)) {}
};

class SingularSystemError : public Error {
  public:
    using Error::Error;
};

class ExhaustedSamplingError : public Error {
  public:
    using Error::Error;
};

class DimensionMismatchError : public Error {
  public:
    using Error::Error;
};

class MissingBiasError : public Error {
  public:
    explicit MissingBiasError(int k)
        : Error("no bias configured for outage level k=" + std::to_string(k)) {}
};

class IndexMismatchError : public Error {
  public:
    using Error::Error;
};

class DuplicateRecordError : public Error {
  public:
    using Error::Error;
};

class EmptyStratumError : public Error {
  public:
    explicit EmptyStratumError(int k)
        : Error("no calibration data for outage level k=" + std::to_string(k)) {}
};

class FingerprintMismatchError : public Error {
  public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Deterministic randomness. The mt19937_64 engine is pinned by the standard;
// variate generation is hand-rolled here because the std distributions are
// implementation-defined and would break byte-identical reruns across
// standard libraries.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xCBF29CE484222325ULL) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

// Sub-stream seed for a named pipeline stage.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    return splitmix64(splitmix64(seed) ^ fnv1a64(tag));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    return splitmix64(splitmix64(seed) ^ splitmix64(salt));
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // uniform on [0, 1) with 53 random bits
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // unbiased integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
        std::uint64_t v = eng_();
        while (v >= limit) v = eng_();
        return v % n;
    }

    // Box-Muller; consumes exactly two engine draws per variate
    double normal() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

  private:
    std::mt19937_64 eng_;
};

// ---------------------------------------------------------------------------
// Shortest round-trip decimal formatting; the single float->text path keeps
// artifact files byte-stable across runs.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

inline std::string to_hex16(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace gridcp
