#pragma once

namespace crx {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace crx
