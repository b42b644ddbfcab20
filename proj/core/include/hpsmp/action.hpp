#pragma once

#include <string>

#include "hpsmp/errors.hpp"

namespace hpsmp {

enum class Action { Buy, Sell, Hold };

inline const char* to_string(Action a) {
  switch (a) {
    case Action::Buy: return "BUY";
    case Action::Sell: return "SELL";
    case Action::Hold: return "HOLD";
  }
  return "HOLD";
}

inline Action action_from_string(const std::string& s) {
  if (s == "BUY") return Action::Buy;
  if (s == "SELL") return Action::Sell;
  if (s == "HOLD") return Action::Hold;
  throw ParseError("unknown action: " + s);
}

}  // namespace hpsmp
