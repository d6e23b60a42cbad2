#include "aodfill/date.hpp"

#include <array>
#include <charconv>
#include <cstdio>

#include "aodfill/errors.hpp"

namespace aodfill {

bool is_leap_year(int year) {
    return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

int days_in_month(int year, int month) {
    static constexpr std::array<int, 12> kDays = {31, 28, 31, 30, 31, 30,
                                                  31, 31, 30, 31, 30, 31};
    if (month == 2 && is_leap_year(year)) return 29;
    return kDays[static_cast<std::size_t>(month - 1)];
}

int days_in_year(int year) { return is_leap_year(year) ? 366 : 365; }

namespace {

// Howard Hinnant's civil-date algorithms.
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy =
        static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
    y = static_cast<int>(yy + (m <= 2));
}

} // namespace

DateStamp DateStamp::from_ymd(int year, int month, int day) {
    if (month < 1 || month > 12)
        throw InputError("invalid month " + std::to_string(month));
    if (day < 1 || day > days_in_month(year, month))
        throw InputError("invalid day " + std::to_string(day) + " for " +
                         std::to_string(year) + "-" + std::to_string(month));
    DateStamp d;
    d.year = year;
    d.month = month;
    d.day_of_month = day;
    d.day_of_year = static_cast<int>(days_from_civil(year, month, day) -
                                     days_from_civil(year, 1, 1)) +
                    1;
    return d;
}

DateStamp DateStamp::from_serial(std::int64_t days) {
    int y, m, d;
    civil_from_days(days, y, m, d);
    return from_ymd(y, m, d);
}

std::int64_t DateStamp::serial() const {
    return days_from_civil(year, month, day_of_month);
}

std::string DateStamp::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day_of_month);
    return buf;
}

DateStamp DateStamp::parse(std::string_view text) {
    int y = 0, m = 0, d = 0;
    const char* p = text.data();
    const char* end = p + text.size();
    auto r1 = std::from_chars(p, end, y);
    if (r1.ec != std::errc{} || r1.ptr == end || *r1.ptr != '-')
        throw InputError("bad date '" + std::string(text) + "', expected YYYY-MM-DD");
    auto r2 = std::from_chars(r1.ptr + 1, end, m);
    if (r2.ec != std::errc{} || r2.ptr == end || *r2.ptr != '-')
        throw InputError("bad date '" + std::string(text) + "', expected YYYY-MM-DD");
    auto r3 = std::from_chars(r2.ptr + 1, end, d);
    if (r3.ec != std::errc{} || r3.ptr != end)
        throw InputError("bad date '" + std::string(text) + "', expected YYYY-MM-DD");
    return from_ymd(y, m, d);
}

} // namespace aodfill
