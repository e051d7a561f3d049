#pragma once

namespace ibp {
inline constexpr const char* kVersion = "0.1.0";
}
