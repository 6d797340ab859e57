#pragma once

namespace schedlab {
inline constexpr const char* kVersion = "0.1.0";
}
