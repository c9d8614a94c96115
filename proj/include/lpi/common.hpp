#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lpi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Error hierarchy. The CLI maps each family onto an exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };
struct ArgumentError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct TemplateError : Error { using Error::Error; };
struct StateError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct RankError : Error { using Error::Error; };

// Service-side failures.
struct TransportError : Error {
    TransportError(const std::string& what, int retries_used)
        : Error(what), retries(retries_used) {}
    int retries = 0;
};
struct DeadlineError : Error { using Error::Error; };
struct CompatibilityError : Error { using Error::Error; };
struct CapacityError : Error { using Error::Error; };
struct ServerError : Error { using Error::Error; };

// Stateless 64-bit mixer (splitmix64 finalizer). Used for hashing and for
// deriving per-item seeds; never as a general RNG.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace lpi
