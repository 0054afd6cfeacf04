#pragma once

#include <stdexcept>
#include <string>

namespace ltkv {

// Numeric values are shared with the C API (ltkv_status).
enum class ErrorCode : int {
    ok = 0,
    not_found = 1,
    invalid_argument = 2,
    invalid_config = 3,
    already_exists = 4,
    locked = 5,
    corruption = 6,
    io_error = 7,
    budget_exhausted = 8,
    out_of_range = 9,
    rejected = 10,
    no_space = 11,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Throws io_error (or no_space for ENOSPC/EDQUOT) with strerror(err) appended.
[[noreturn]] void throw_errno(const std::string& what, int err);
[[noreturn]] void throw_errno(const std::string& what);

} // namespace ltkv
