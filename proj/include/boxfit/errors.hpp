#pragma once

#include <stdexcept>
#include <string>

namespace boxfit {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
    using Error::Error;
};

// project_point with z <= 0.
struct BehindCamera : Error {
    using Error::Error;
};

struct EmptyMask : Error {
    using Error::Error;
};

struct EmptyCloud : Error {
    using Error::Error;
};

struct DegenerateCloud : Error {
    using Error::Error;
};

// Rank-deficient correspondence set in the rigid solver.
struct RankError : Error {
    using Error::Error;
};

struct DegenerateExtent : Error {
    using Error::Error;
};

// Rejection sampling could not place all boxes.
struct PlacementFailure : Error {
    using Error::Error;
};

struct ParseError : Error {
    ParseError(const std::string& file, long offset, const std::string& what)
        : Error(file + ":" + std::to_string(offset) + ": " + what),
          file(file),
          offset(offset) {}
    std::string file;
    long offset = 0;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& field, const std::string& what)
        : Error("config field '" + field + "': " + what), field(field) {}
    std::string field;
};

struct UndefinedMetric : Error {
    using Error::Error;
};

}  // namespace boxfit
