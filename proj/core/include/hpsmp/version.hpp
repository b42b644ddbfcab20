#pragma once

namespace hpsmp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace hpsmp
