#pragma once

#include <stdexcept>
#include <string>

#include "crx/crx.h"

namespace crx {

// Core error type carrying one of the public status codes. The C layer
// catches these and maps them 1:1 onto crx_status.
class Error : public std::runtime_error {
public:
    Error(crx_status code, std::string msg)
        : std::runtime_error(std::move(msg)), code_(code) {}

    crx_status code() const noexcept { return code_; }

private:
    crx_status code_;
};

[[noreturn]] inline void fail(crx_status code, const std::string& msg) {
    throw Error(code, msg);
}

inline void require(bool cond, crx_status code, const std::string& msg) {
    if (!cond) fail(code, msg);
}

}  // namespace crx
