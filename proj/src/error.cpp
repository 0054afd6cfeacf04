#include "ltkv/error.hpp"

#include <cerrno>
#include <cstring>

namespace ltkv {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::ok: return "ok";
    case ErrorCode::not_found: return "not found";
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::invalid_config: return "invalid config";
    case ErrorCode::already_exists: return "already exists";
    case ErrorCode::locked: return "locked";
    case ErrorCode::corruption: return "corruption";
    case ErrorCode::io_error: return "i/o error";
    case ErrorCode::budget_exhausted: return "memory budget exhausted";
    case ErrorCode::out_of_range: return "out of range";
    case ErrorCode::rejected: return "rejected";
    case ErrorCode::no_space: return "no space left";
    }
    return "unknown";
}

void throw_errno(const std::string& what, int err) {
    const ErrorCode code = (err == ENOSPC || err == EDQUOT) ? ErrorCode::no_space : ErrorCode::io_error;
    throw Error(code, what + ": " + std::strerror(err));
}

void throw_errno(const std::string& what) { throw_errno(what, errno); }

} // namespace ltkv
