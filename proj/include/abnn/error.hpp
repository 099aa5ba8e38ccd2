#pragma once

#include <stdexcept>
#include <string>

namespace abnn {

enum class Errc {
    dimension_mismatch,
    index_out_of_range,
    domain_error,
    numeric_error,
    format_error,
    truncated_file,
    bad_magic,
    unsupported_version,
    shape_mismatch,
    config_error,
    io_error,
    training_diverged,
    undefined_affinity,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::dimension_mismatch: return "dimension_mismatch";
        case Errc::index_out_of_range: return "index_out_of_range";
        case Errc::domain_error: return "domain_error";
        case Errc::numeric_error: return "numeric_error";
        case Errc::format_error: return "format_error";
        case Errc::truncated_file: return "truncated_file";
        case Errc::bad_magic: return "bad_magic";
        case Errc::unsupported_version: return "unsupported_version";
        case Errc::shape_mismatch: return "shape_mismatch";
        case Errc::config_error: return "config_error";
        case Errc::io_error: return "io_error";
        case Errc::training_diverged: return "training_diverged";
        case Errc::undefined_affinity: return "undefined_affinity";
    }
    return "unknown";
}

/// Single exception type for the whole library; the code tells callers
/// (and tests) which contract was violated.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

} // namespace abnn
