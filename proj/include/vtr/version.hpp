#pragma once

namespace vtr {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace vtr
