#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace taxoenrich {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input or violated structural invariant of the taxonomy.
class TaxonomyError : public Error {
public:
    using Error::Error;
};

// Malformed or truncated file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

// Non-finite loss or gradient.
class NumericError : public Error {
public:
    using Error::Error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stateless seed derivation so that sub-streams (epoch, example, ...) do not
// depend on how many draws earlier stages consumed.
inline std::uint64_t derive_seed(std::uint64_t base) { return splitmix64(base); }

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, Rest... rest) {
    return derive_seed(splitmix64(base ^ splitmix64(tag + 0x632be59bd9b4e019ULL)), rest...);
}

inline std::uint64_t hash_string(std::string_view s, std::uint64_t seed = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(h);
}

using Rng = std::mt19937_64;

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace taxoenrich
