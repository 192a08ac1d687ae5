#ifndef REGIME_DATES_HPP
#define REGIME_DATES_HPP

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace regime {

/// Calendar date. Comparisons are chronological; all file interfaces use
/// ISO-8601 (YYYY-MM-DD) unless a custom format string is supplied.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;
};

inline bool is_leap_year(int y) {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

inline int days_in_month(int y, int m) {
    static constexpr int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && is_leap_year(y)) return 29;
    return lengths[m - 1];
}

inline bool is_valid(const Date& d) {
    return d.month >= 1 && d.month <= 12 && d.day >= 1 && d.day <= days_in_month(d.year, d.month);
}

/// Days since 1970-01-01 (proleptic Gregorian), negative before the epoch.
inline std::int64_t to_day_number(const Date& d) {
    std::int64_t y = d.year;
    y -= d.month <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (d.month + (d.month > 2 ? -3 : 9)) + 2) / 5 + d.day - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline Date from_day_number(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

/// 0 = Monday ... 6 = Sunday.
inline int weekday(const Date& d) {
    const std::int64_t z = to_day_number(d);
    return static_cast<int>(z >= -3 ? (z + 3) % 7 : (z + 4) % 7 + 6);
}

inline std::string to_string(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

/// Parses `text` against a strptime-like format containing %Y, %m, %d and
/// literal characters. Returns nullopt on any mismatch or invalid date.
inline std::optional<Date> parse_date(std::string_view text, std::string_view format = "%Y-%m-%d") {
    Date out{0, 0, 0};
    std::size_t ti = 0;
    auto read_int = [&](std::size_t max_digits) -> std::optional<int> {
        std::size_t start = ti;
        int value = 0;
        while (ti < text.size() && ti - start < max_digits && text[ti] >= '0' && text[ti] <= '9') {
            value = value * 10 + (text[ti] - '0');
            ++ti;
        }
        if (ti == start) return std::nullopt;
        return value;
    };
    for (std::size_t fi = 0; fi < format.size(); ++fi) {
        if (format[fi] == '%' && fi + 1 < format.size()) {
            std::optional<int> v;
            switch (format[++fi]) {
                case 'Y': v = read_int(4); if (v) out.year = *v; break;
                case 'm': v = read_int(2); if (v) out.month = *v; break;
                case 'd': v = read_int(2); if (v) out.day = *v; break;
                default: return std::nullopt;
            }
            if (!v) return std::nullopt;
        } else {
            if (ti >= text.size() || text[ti] != format[fi]) return std::nullopt;
            ++ti;
        }
    }
    if (ti != text.size()) return std::nullopt;
    if (!is_valid(out)) return std::nullopt;
    return out;
}

/// Synthetic trading calendar: n consecutive weekdays starting at or after `start`.
inline std::vector<Date> weekday_calendar(Date start, std::size_t n) {
    if (!is_valid(start)) throw std::invalid_argument("weekday_calendar: invalid start date");
    std::vector<Date> out;
    out.reserve(n);
    std::int64_t z = to_day_number(start);
    while (out.size() < n) {
        Date d = from_day_number(z);
        if (weekday(d) < 5) out.push_back(d);
        ++z;
    }
    return out;
}

}  // namespace regime

#endif
