#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pushsum {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Malformed graph or config text. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Structural problem with a graph or mixing matrix (disconnected, self-loop, irregular, ...).
class GraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine hit a state its preconditions rule out.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace pushsum
