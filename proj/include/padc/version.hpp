#pragma once

namespace padc {

inline constexpr const char* kVersion = "1.0.0";

} // namespace padc
