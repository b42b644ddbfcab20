#pragma once

#include <iostream>
#include <string>

namespace hpsmp {

/// Non-fatal diagnostics (empty splits, dropped records, degenerate fields).
inline void log_warning(const std::string& message) {
  std::cerr << "warning: " << message << "\n";
}

}  // namespace hpsmp
