#pragma once

#include <compare>
#include <string>

namespace hpsmp {

/// Calendar date. Comparable by (year, month, day); conversion to a serial
/// day number makes weekday and distance computations trivial.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;
};

/// Days since 1970-01-01 (proleptic Gregorian).
long days_from_civil(const Date& d);
Date civil_from_days(long days);

/// 0 = Sunday ... 6 = Saturday.
int weekday(const Date& d);
bool is_weekend(const Date& d);

/// Parses strict "YYYY-MM-DD"; throws ParseError otherwise.
Date parse_date(const std::string& s);
std::string to_string(const Date& d);

}  // namespace hpsmp
