#pragma once

namespace relfdiv {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace relfdiv
