#pragma once

#include <stdexcept>
#include <string>

namespace pcrnn {

// Dimension disagreement between tensors (always names both sides).
class ShapeError : public std::runtime_error {
public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Caller broke an API contract (empty input list, bad mask index, mismatched tape).
class UsageError : public std::runtime_error {
public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// Bad or insufficient input data (corpus too short, token out of range).
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration (unknown key, non-divisible hidden size, bad value).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pcrnn
