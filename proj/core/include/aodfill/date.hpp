#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace aodfill {

bool is_leap_year(int year);
int days_in_month(int year, int month);
int days_in_year(int year);

/// Proleptic Gregorian calendar date. day_of_year is derived from
/// (year, month, day_of_month) at construction and kept consistent.
struct DateStamp {
    int year = 1970;
    int month = 1;        // 1..12
    int day_of_month = 1; // 1..31
    int day_of_year = 1;  // 1..366

    static DateStamp from_ymd(int year, int month, int day); // validates
    static DateStamp from_serial(std::int64_t days_since_epoch);

    /// Days since 1970-01-01.
    std::int64_t serial() const;

    DateStamp next_day() const { return from_serial(serial() + 1); }

    std::string to_string() const; // YYYY-MM-DD
    static DateStamp parse(std::string_view text);

    friend bool operator==(const DateStamp& a, const DateStamp& b) {
        return a.year == b.year && a.month == b.month &&
               a.day_of_month == b.day_of_month;
    }
    friend std::strong_ordering operator<=>(const DateStamp& a, const DateStamp& b) {
        if (auto c = a.year <=> b.year; c != 0) return c;
        if (auto c = a.month <=> b.month; c != 0) return c;
        return a.day_of_month <=> b.day_of_month;
    }
};

} // namespace aodfill
