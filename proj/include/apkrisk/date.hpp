#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace apkrisk {

// Calendar date. Proleptic Gregorian, no time-of-day: feed publication
// dates, sidecar release dates and the two-year risk window only need
// day resolution.
struct Date {
    int year = 1970;
    unsigned month = 1; // 1..12
    unsigned day = 1;   // 1..31

    bool operator==(const Date&) const = default;
    auto operator<=>(const Date&) const = default;
};

bool is_valid_date(const Date& d);

// "YYYY-MM-DD"; a leading ISO-8601 timestamp ("2014-04-07T22:55Z") parses
// to its date part. Returns nullopt on anything malformed or non-existent.
std::optional<Date> parse_iso_date(std::string_view text);

std::string format_iso_date(const Date& d);

// Days since 1970-01-01 (negative before). Howard Hinnant's civil-days
// algorithm.
std::int64_t days_from_civil(const Date& d);

inline std::int64_t days_between(const Date& a, const Date& b) {
    return days_from_civil(b) - days_from_civil(a);
}

// Today in UTC, from the system clock.
Date today_utc();

// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ". SOURCE_DATE_EPOCH overrides
// the clock so builds and scans can be reproduced byte-for-byte.
std::string utc_timestamp_now();

} // namespace apkrisk
