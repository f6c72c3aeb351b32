#pragma once

#include <stdexcept>
#include <string>

namespace ringcorr {

// Base of every domain error raised by the toolkit. The CLI maps these to
// exit code 1 and prints what() verbatim.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define RINGCORR_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                       \
    public:                                                           \
        explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
    }

RINGCORR_DEFINE_ERROR(DomainError);
RINGCORR_DEFINE_ERROR(BinningError);
RINGCORR_DEFINE_ERROR(EdgeMismatch);
RINGCORR_DEFINE_ERROR(InsufficientData);
RINGCORR_DEFINE_ERROR(DimensionMismatch);
RINGCORR_DEFINE_ERROR(DegenerateError);
RINGCORR_DEFINE_ERROR(ConnectionError);
RINGCORR_DEFINE_ERROR(RangeError);
RINGCORR_DEFINE_ERROR(SchemaError);
RINGCORR_DEFINE_ERROR(OrderError);
RINGCORR_DEFINE_ERROR(ConfigError);
RINGCORR_DEFINE_ERROR(KeyError);
RINGCORR_DEFINE_ERROR(IOError);

#undef RINGCORR_DEFINE_ERROR

// Carries the 1-based line number of the offending record.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& msg)
        : Error("ParseError: line " + std::to_string(line) + ": " + msg), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace ringcorr
