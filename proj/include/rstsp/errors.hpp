#pragma once

#include <stdexcept>
#include <string>

namespace rstsp {

/// Bad caller-supplied value (sizes, budgets, ranges).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Violated precondition on an otherwise well-typed value (e.g. a tour that is
/// not a permutation, tensors with mismatched shapes).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Malformed or unsupported input file.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedFormatError : public FormatError {
public:
    using FormatError::FormatError;
};

class ParseError : public FormatError {
public:
    ParseError(const std::string& what, std::size_t line)
        : FormatError("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class SizeLimitError : public ArgumentError {
public:
    using ArgumentError::ArgumentError;
};

/// Non-finite value produced during inference.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace rstsp
