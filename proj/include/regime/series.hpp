#ifndef REGIME_SERIES_HPP
#define REGIME_SERIES_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "regime/dates.hpp"

namespace regime {

constexpr int kTradingDaysPerYear = 252;

/// Raised on unreadable or structurally invalid input files; carries the path
/// so the CLI can surface it in machine-readable error reports.
struct FileError : std::runtime_error {
    std::string path;
    FileError(std::string p, const std::string& message)
        : std::runtime_error(message), path(std::move(p)) {}
};

/// One date-indexed value series on a trading calendar.
/// Invariants: dates strictly increasing, values finite, equal lengths.
struct AlignedSeries {
    std::vector<Date> dates;
    std::vector<double> values;

    AlignedSeries() = default;
    AlignedSeries(std::vector<Date> d, std::vector<double> v)
        : dates(std::move(d)), values(std::move(v)) {
        validate();
    }

    std::size_t size() const { return dates.size(); }
    bool empty() const { return dates.empty(); }

    std::optional<std::size_t> find(const Date& d) const {
        auto it = std::lower_bound(dates.begin(), dates.end(), d);
        if (it == dates.end() || *it != d) return std::nullopt;
        return static_cast<std::size_t>(it - dates.begin());
    }

    /// Index of the first date >= d (dates.size() if none).
    std::size_t lower_bound(const Date& d) const {
        return static_cast<std::size_t>(std::lower_bound(dates.begin(), dates.end(), d) - dates.begin());
    }

    /// Index of the last date <= d, if any.
    std::optional<std::size_t> last_at_or_before(const Date& d) const {
        auto it = std::upper_bound(dates.begin(), dates.end(), d);
        if (it == dates.begin()) return std::nullopt;
        return static_cast<std::size_t>(it - dates.begin()) - 1;
    }

    /// Sorts rows by date and validates; rejects duplicate dates.
    static AlignedSeries from_rows(std::vector<std::pair<Date, double>> rows) {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        AlignedSeries out;
        out.dates.reserve(rows.size());
        out.values.reserve(rows.size());
        for (auto& [d, v] : rows) {
            out.dates.push_back(d);
            out.values.push_back(v);
        }
        out.validate();
        return out;
    }

  private:
    void validate() const {
        if (dates.size() != values.size())
            throw std::invalid_argument("AlignedSeries: dates/values length mismatch");
        for (std::size_t i = 0; i < dates.size(); ++i) {
            if (!std::isfinite(values[i]))
                throw std::invalid_argument("AlignedSeries: non-finite value at " + regime::to_string(dates[i]));
            if (i > 0 && !(dates[i - 1] < dates[i])) {
                if (dates[i - 1] == dates[i])
                    throw std::invalid_argument("AlignedSeries: duplicate date " + regime::to_string(dates[i]));
                throw std::invalid_argument("AlignedSeries: dates not increasing at " + regime::to_string(dates[i]));
            }
        }
    }
};

/// Column mapping for CSV ingestion. A header row is required; lines starting
/// with '#' and blank lines are skipped. '.' is the decimal separator.
struct CsvSchema {
    std::string date_column = "date";
    std::string value_column = "value";
    std::string date_format = "%Y-%m-%d";
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim surrounding whitespace and a stray \r from CRLF files
        const auto b = field.find_first_not_of(" \t\r\n");
        const auto e = field.find_last_not_of(" \t\r\n");
        out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::optional<double> parse_double(const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    return v;
}

}  // namespace detail

/// Loads one (date, value) series from CSV. Rows may appear in any order; the
/// result is sorted ascending. Malformed rows, duplicate dates and non-finite
/// values are hard errors naming the offending line.
inline AlignedSeries load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw FileError(path, "cannot open file: " + path);

    std::string line;
    std::size_t line_no = 0;
    std::optional<std::size_t> date_idx, value_idx;
    std::vector<std::pair<Date, double>> rows;

    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r\n");
        if (first == std::string::npos || line[first] == '#') continue;
        auto fields = detail::split_csv_line(line);
        if (!date_idx) {
            // header row
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (fields[i] == schema.date_column) date_idx = i;
                if (fields[i] == schema.value_column) value_idx = i;
            }
            if (!date_idx || !value_idx)
                throw FileError(path, path + ": header must contain columns '" + schema.date_column +
                                          "' and '" + schema.value_column + "'");
            continue;
        }
        if (fields.size() <= std::max(*date_idx, *value_idx))
            throw FileError(path, path + ": malformed row at line " + std::to_string(line_no) +
                                      " (too few columns)");
        const auto date = parse_date(fields[*date_idx], schema.date_format);
        if (!date)
            throw FileError(path, path + ": malformed row at line " + std::to_string(line_no) +
                                      " (bad date '" + fields[*date_idx] + "')");
        const auto value = detail::parse_double(fields[*value_idx]);
        if (!value)
            throw FileError(path, path + ": malformed row at line " + std::to_string(line_no) +
                                      " (bad value '" + fields[*value_idx] + "')");
        if (!std::isfinite(*value))
            throw FileError(path, path + ": non-finite value at line " + std::to_string(line_no));
        rows.emplace_back(*date, *value);
    }
    if (!date_idx) throw FileError(path, path + ": missing header row");

    try {
        return AlignedSeries::from_rows(std::move(rows));
    } catch (const std::invalid_argument& e) {
        throw FileError(path, path + ": " + e.what());
    }
}

/// Daily market data on one shared calendar. Returns start at the second
/// available price date, so every stored series has identical dates.
struct MarketDataset {
    AlignedSeries index_prices;    // total-return index level
    AlignedSeries index_returns;   // simple daily returns, decimal
    AlignedSeries log_returns;     // ln(1 + simple return)
    AlignedSeries risk_free_daily; // daily simple risk-free return, decimal

    std::size_t size() const { return index_prices.size(); }
    const std::vector<Date>& dates() const { return index_prices.dates; }
};

/// Converts a decimal annual yield to the equivalent daily simple return
/// under 252-day geometric compounding.
inline double deannualize_yield(double annual_yield) {
    return std::pow(1.0 + annual_yield, 1.0 / kTradingDaysPerYear) - 1.0;
}

/// Builds the shared-calendar dataset from an index level series and a decimal
/// annual yield series. Yields are forward-filled onto the price calendar
/// (last known yield is the investable rate); price dates with no prior or
/// same-day yield observation are dropped.
inline MarketDataset build_dataset(const AlignedSeries& prices, const AlignedSeries& yields) {
    for (std::size_t i = 0; i < prices.size(); ++i)
        if (prices.values[i] <= 0.0)
            throw std::invalid_argument("build_dataset: non-positive price at " +
                                        regime::to_string(prices.dates[i]));

    std::vector<Date> dates;
    std::vector<double> px, ret, logret, rf;
    for (std::size_t i = 1; i < prices.size(); ++i) {
        const auto yi = yields.last_at_or_before(prices.dates[i]);
        if (!yi) continue;
        const double r = prices.values[i] / prices.values[i - 1] - 1.0;
        dates.push_back(prices.dates[i]);
        px.push_back(prices.values[i]);
        ret.push_back(r);
        logret.push_back(std::log1p(r));
        rf.push_back(deannualize_yield(yields.values[*yi]));
    }
    if (dates.empty())
        throw std::invalid_argument("build_dataset: empty calendar intersection");

    MarketDataset out;
    out.index_prices = AlignedSeries(dates, std::move(px));
    out.index_returns = AlignedSeries(dates, std::move(ret));
    out.log_returns = AlignedSeries(dates, std::move(logret));
    out.risk_free_daily = AlignedSeries(std::move(dates), std::move(rf));
    return out;
}

}  // namespace regime

#endif
