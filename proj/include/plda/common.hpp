#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace plda {

using Vec = std::vector<double>;

// All randomness flows through explicitly seeded engines of this type.
using Rng = std::mt19937_64;

// Raised for shape and argument violations. Messages name what was expected.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Raised when a numerical procedure cannot produce a trustworthy result.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& message) {
    if (!cond) throw InvalidArgument(message);
}

}  // namespace plda
