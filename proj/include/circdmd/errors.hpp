#pragma once

#include <cstddef>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>

namespace circdmd {

/// Base class for every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A CSV cell that could not be parsed as a number. Coordinates are 0-based
/// positions in the file (row counts the header when one is present).
struct ParseError : Error {
    ParseError(std::size_t row, std::size_t col, const std::string& what)
        : Error("parse error at row " + std::to_string(row) + ", col " + std::to_string(col) +
                ": " + what),
          row(row),
          col(col) {}
    std::size_t row;
    std::size_t col;
};

struct ShapeError : Error {
    using Error::Error;
};

/// Non-finite values found during ingestion.
struct DataError : Error {
    using Error::Error;
};

struct RangeError : Error {
    using Error::Error;
};

/// An operation received an embedding of the wrong kind.
struct KindError : Error {
    using Error::Error;
};

struct RankDeficiencyError : Error {
    using Error::Error;
};

struct NumericalError : Error {
    using Error::Error;
};

struct SingularEigenvalueError : Error {
    using Error::Error;
};

struct SingularBackwardError : Error {
    using Error::Error;
};

struct DegenerateSeriesError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct UsageError : Error {
    using Error::Error;
};

/// Warning sink. Defaults to stderr; tests and tools may swap it out.
inline std::function<void(const std::string&)>& warning_sink() {
    static std::function<void(const std::string&)> sink = [](const std::string& msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return sink;
}

inline void warn(const std::string& msg) {
    if (auto& sink = warning_sink()) sink(msg);
}

}  // namespace circdmd
