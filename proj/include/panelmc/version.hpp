#pragma once

namespace panelmc {
inline constexpr const char* kVersion = "0.1.0";
}
