#pragma once

namespace xseg {
inline constexpr const char* kVersion = "0.1.0";
}
