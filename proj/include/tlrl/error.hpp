#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tlrl {

/// Base class for every error raised by the library. `kind()` is a short
/// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* kind() const noexcept { return "error"; }
};

/// Malformed document (scenario file, weights file, report).
class ParseError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "parse"; }
};

/// Well-formed document whose content breaks one or more invariants.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> violations)
        : Error(join(violations)), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }
    const char* kind() const noexcept override { return "validation"; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out;
        for (const auto& s : v) {
            if (!out.empty()) out += "; ";
            out += s;
        }
        return out;
    }

    std::vector<std::string> violations_;
};

/// Caller broke a precondition (dimension mismatch, unsafe signal assignment, ...).
class ContractError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "contract"; }
};

class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "io"; }
};

}  // namespace tlrl
