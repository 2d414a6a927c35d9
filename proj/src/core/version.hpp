#pragma once

namespace otstab {
inline constexpr const char* kVersion = "0.3.0";
}
