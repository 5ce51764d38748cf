#pragma once

namespace kerrecho {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace kerrecho
