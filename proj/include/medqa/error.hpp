#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace medqa {

enum class ErrorCode {
    InvalidArgument,
    EmptyQuestion,
    QuestionTooLong,
    ExpansionUnavailable,
    QueryParse,
    UpstreamUnavailable,
    UpstreamRejected,
    ParseFailure,
    ProviderUnavailable,
    DimensionMismatch,
    ZeroVector,
    UnparseableResponse,
    MalformedAnswer,
    NoEvidenceFound,
    SynthesisFailed,
    StorageUnavailable,
    Unauthorized,
    NotFound,
    Conflict,
};

std::string_view to_string(ErrorCode code);

// Every failure the library reports is an Error carrying one of the codes
// above; callers branch on code(), never on the message text.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        fail(ErrorCode::InvalidArgument, message);
    }
}

}  // namespace medqa
