#ifndef RED_ERRORS_HPP
#define RED_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace red {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed equation text. Carries the byte offset of the offending token
/// and a short description of what was expected there.
class SyntaxError : public Error {
public:
    SyntaxError(const std::string& what, std::size_t position, std::string expected)
        : Error(what), position_(position), expected_(std::move(expected)) {}
    std::size_t position() const noexcept { return position_; }
    const std::string& expected() const noexcept { return expected_; }

private:
    std::size_t position_;
    std::string expected_;
};

/// Identifier that is neither a variable (x<k>) nor a known function name.
class UnknownSymbol : public SyntaxError {
public:
    UnknownSymbol(const std::string& what, std::size_t position, std::string symbol)
        : SyntaxError(what, position, "variable or function name"), symbol_(std::move(symbol)) {}
    const std::string& symbol() const noexcept { return symbol_; }

private:
    std::string symbol_;
};

class VariableOutOfRange : public Error {
public:
    using Error::Error;
};

class NodeNotFound : public Error {
public:
    using Error::Error;
};

class CannotReplaceRoot : public Error {
public:
    using Error::Error;
};

/// The node kind has no inverse (sine, cosine) or the path to the root
/// crosses such a node.
class NotInvertible : public Error {
public:
    using Error::Error;
};

/// Inversion is not applicable: leaves have no children that could ask for
/// a residual.
class NotApplicable : public Error {
public:
    using Error::Error;
};

/// Too few rows survived the validity mask for the residual to be a usable
/// fitting target.
class AllRowsInvalid : public Error {
public:
    using Error::Error;
};

class FitFailed : public Error {
public:
    using Error::Error;
};

class TimeoutError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

class EmptyComparison : public Error {
public:
    using Error::Error;
};

class TooFewRows : public Error {
public:
    using Error::Error;
};

class UnsatisfiableRanges : public Error {
public:
    using Error::Error;
};

/// Problems with input files: CSV tables, corpus manifests, config files.
class DataError : public Error {
public:
    using Error::Error;
};

} // namespace red

#endif
