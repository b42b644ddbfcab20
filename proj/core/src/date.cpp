#include "hpsmp/date.hpp"

#include <cstdio>

#include "hpsmp/errors.hpp"

namespace hpsmp {

long days_from_civil(const Date& d) {
  long y = d.year;
  const int m = d.month;
  const int day = d.day;
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(day) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

Date civil_from_days(long days) {
  days += 719468;
  const long era = (days >= 0 ? days : days - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(days - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long y = static_cast<long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned day = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(day)};
}

int weekday(const Date& d) {
  const long z = days_from_civil(d);
  return static_cast<int>(z >= -4 ? (z + 4) % 7 : (z + 5) % 7 + 6);
}

bool is_weekend(const Date& d) {
  const int wd = weekday(d);
  return wd == 0 || wd == 6;
}

Date parse_date(const std::string& s) {
  int y = 0, m = 0, day = 0;
  char extra = 0;
  if (s.size() != 10 || std::sscanf(s.c_str(), "%4d-%2d-%2d%c", &y, &m, &day, &extra) != 3) {
    throw ParseError("invalid date '" + s + "', expected YYYY-MM-DD");
  }
  if (m < 1 || m > 12 || day < 1 || day > 31) {
    throw ParseError("date '" + s + "' out of range");
  }
  Date d{y, m, day};
  if (civil_from_days(days_from_civil(d)) != d) {
    throw ParseError("invalid calendar date '" + s + "'");
  }
  return d;
}

std::string to_string(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

}  // namespace hpsmp
