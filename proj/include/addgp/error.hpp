#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace addgp {

/// Raised when a covariance matrix cannot be factorized even after the
/// jitter schedule is exhausted. Carries every jitter level that was tried.
class NumericalFailure : public std::runtime_error {
public:
    explicit NumericalFailure(const std::string& what,
                              std::vector<double> attempted_jitter = {})
        : std::runtime_error(describe(what, attempted_jitter)),
          attempted_jitter_(std::move(attempted_jitter)) {}

    const std::vector<double>& attempted_jitter() const noexcept { return attempted_jitter_; }

private:
    static std::string describe(const std::string& what, const std::vector<double>& jitter) {
        if (jitter.empty()) return what;
        std::ostringstream os;
        os << what << " (jitter tried:";
        for (double j : jitter) os << ' ' << j;
        os << ')';
        return os.str();
    }

    std::vector<double> attempted_jitter_;
};

/// Base class for tabular data problems.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FileError : public DataError {
public:
    using DataError::DataError;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t column)
        : DataError(what), row_(row), column_(column) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

class EmptyTableError : public DataError {
public:
    using DataError::DataError;
};

/// Data that parsed fine but cannot be modelled (e.g. a constant column).
class InvalidData : public DataError {
public:
    using DataError::DataError;
};

/// Saved model that is malformed or fails its integrity check.
class ModelFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace addgp
