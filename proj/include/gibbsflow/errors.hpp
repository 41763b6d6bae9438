#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gibbsflow {

// Root of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid argument to an operation (n = 0, odd n for lifting, empty lists ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

// s >= t where s < t is required.
class OrderingError : public ArgumentError {
public:
    using ArgumentError::ArgumentError;
};

// A scalar function is undefined at some eigenvalue of its argument.
class DomainError : public Error {
public:
    DomainError(const std::string& what, double eigenvalue)
        : Error(what), eigenvalue_(eigenvalue) {}

    double eigenvalue() const { return eigenvalue_; }

private:
    double eigenvalue_;
};

// Time outside the model horizon [0, T].
class RangeError : public Error {
public:
    using Error::Error;
};

// A model instance violates A >= 1 or B(t) >= 0.
class ModelError : public Error {
public:
    using Error::Error;
};

// A numerical procedure did not reach its requested accuracy.
class AccuracyError : public Error {
public:
    AccuracyError(const std::string& what, double achieved)
        : Error(what), achieved_(achieved) {}

    double achieved() const { return achieved_; }

private:
    double achieved_;
};

class EigenSolverError : public AccuracyError {
public:
    EigenSolverError(const std::string& what, long dim, double condition)
        : AccuracyError(what, condition), dim_(dim), condition_(condition) {}

    long dim() const { return dim_; }
    double condition() const { return condition_; }

private:
    long dim_;
    double condition_;
};

// Least-squares rate fit impossible (too few usable points).
class FitError : public Error {
public:
    using Error::Error;
};

// Pathological configuration detected during a computation
// (e.g. bisection depth exhausted).
class ConfigurationError : public Error {
public:
    using Error::Error;
};

// Experiment config failed validation. Carries every failure, not just the first.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> failures)
        : Error(join(failures)), failures_(std::move(failures)) {}

    const std::vector<std::string>& failures() const { return failures_; }

private:
    static std::string join(const std::vector<std::string>& items) {
        std::string out;
        for (const auto& s : items) {
            if (!out.empty()) out += "; ";
            out += s;
        }
        return out;
    }

    std::vector<std::string> failures_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace gibbsflow
