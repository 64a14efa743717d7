#pragma once

namespace pairtomo {
inline constexpr const char* kVersion = "0.1.0";
}  // namespace pairtomo
