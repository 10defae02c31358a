#pragma once

// Offline price tables: long-format adjusted closes plus a ticker -> industry map.

#include "tsec/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace tsec::portfolio {

using Date = std::chrono::sys_days;

inline std::optional<Date> parse_date(std::string_view text) {
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    auto num = [&](std::string_view part, auto& out) {
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
        return ec == std::errc{} && ptr == part.data() + part.size();
    };
    if (!num(text.substr(0, 4), y) || !num(text.substr(5, 2), m) || !num(text.substr(8, 2), d)) return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) return std::nullopt;
    return Date{ymd};
}

inline std::string format_date(Date date) {
    const std::chrono::year_month_day ymd{date};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

struct Industry {
    std::string name;
    /// Column indices into PriceTable::prices.
    std::vector<int> tickers;
};

/// Adjusted closes on a common trading calendar, tickers grouped by industry.
struct PriceTable {
    std::vector<Date> dates;
    std::vector<std::string> tickers;
    std::vector<Industry> industries;
    /// [dates x tickers], strictly positive.
    Eigen::MatrixXd prices;
    /// Forward fills and dropped tickers, one line each.
    std::vector<std::string> report;

    int num_days() const noexcept { return static_cast<int>(dates.size()); }

    /// Simple return of column k from trading day d-1 to d.
    double simple_return(int day, int ticker) const { return prices(day, ticker) / prices(day - 1, ticker) - 1.0; }

    /// Index of the first trading day on or after `date` (num_days() if none).
    int first_on_or_after(Date date) const {
        return static_cast<int>(std::lower_bound(dates.begin(), dates.end(), date) - dates.begin());
    }
};

namespace detail {

using tsec::detail::require;

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        std::string_view field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
        while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
        out.push_back(field);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline void expect_header(std::istream& in, std::string_view expected, const std::string& what) {
    std::string line;
    if (!std::getline(in, line)) throw IngestionError(what + ": empty file", 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected) throw IngestionError(what + ": expected header '" + std::string(expected) + "'", 1);
}

} // namespace detail

/// ticker,industry rows; industries keep their order of first appearance.
inline std::vector<std::pair<std::string, std::string>> read_industry_map(std::istream& in) {
    detail::expect_header(in, "ticker,industry", "industry map");
    std::vector<std::pair<std::string, std::string>> rows;
    std::set<std::string> seen;
    std::string line;
    long row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 2 || f[0].empty() || f[1].empty()) throw IngestionError("industry map: malformed row", row);
        if (!seen.insert(std::string(f[0])).second)
            throw IngestionError("industry map: duplicate ticker " + std::string(f[0]), row);
        rows.emplace_back(std::string(f[0]), std::string(f[1]));
    }
    if (rows.empty()) throw IngestionError("industry map: no tickers");
    return rows;
}

/// Builds a validated table from date,ticker,adj_close rows.
///
/// Tickers missing more than `max_missing` of the calendar are dropped; an
/// isolated one-day gap is forward-filled; any other gap is an error.
inline PriceTable load_prices(std::istream& prices_in, std::istream& industries_in, double max_missing = 0.02) {
    const auto mapping = read_industry_map(industries_in);
    std::map<std::string, int> column_of;
    for (const auto& [ticker, industry] : mapping) column_of.emplace(ticker, static_cast<int>(column_of.size()));

    detail::expect_header(prices_in, "date,ticker,adj_close", "prices");
    struct Obs {
        Date date;
        int column;
        double price;
    };
    std::vector<Obs> obs;
    std::set<Date> calendar;
    std::set<std::pair<Date, int>> seen;
    std::string line;
    long row = 1;
    while (std::getline(prices_in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 3) throw IngestionError("prices: expected 3 fields", row);
        const auto date = parse_date(f[0]);
        if (!date) throw IngestionError("prices: bad date '" + std::string(f[0]) + "'", row);
        const auto it = column_of.find(std::string(f[1]));
        if (it == column_of.end()) throw IngestionError("prices: ticker '" + std::string(f[1]) + "' is not in the industry map", row);
        double price = 0.0;
        const auto [ptr, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), price);
        if (ec != std::errc{} || ptr != f[2].data() + f[2].size())
            throw IngestionError("prices: bad price '" + std::string(f[2]) + "'", row);
        if (!(price > 0.0)) throw IngestionError("prices: non-positive price", row);
        if (!seen.emplace(*date, it->second).second) throw IngestionError("prices: duplicate (date, ticker)", row);
        obs.push_back(Obs{*date, it->second, price});
        calendar.insert(*date);
    }
    if (calendar.empty()) throw IngestionError("prices: no rows");

    PriceTable table;
    table.dates.assign(calendar.begin(), calendar.end());
    const int days = table.num_days();
    const int all_cols = static_cast<int>(mapping.size());
    Eigen::MatrixXd raw = Eigen::MatrixXd::Constant(days, all_cols, std::numeric_limits<double>::quiet_NaN());
    for (const auto& o : obs) raw(table.first_on_or_after(o.date), o.column) = o.price;

    std::vector<int> kept;
    for (int c = 0; c < all_cols; ++c) {
        const auto& ticker = mapping[static_cast<std::size_t>(c)].first;
        int missing = 0;
        for (int d = 0; d < days; ++d) missing += std::isnan(raw(d, c));
        if (static_cast<double>(missing) > max_missing * days) {
            table.report.push_back("dropped " + ticker + ": " + std::to_string(missing) + " of " + std::to_string(days) +
                                   " days missing");
            continue;
        }
        for (int d = 0; d < days; ++d) {
            if (!std::isnan(raw(d, c))) continue;
            const bool isolated = d > 0 && d + 1 < days && !std::isnan(raw(d - 1, c)) && !std::isnan(raw(d + 1, c));
            if (!isolated)
                throw IngestionError("prices: " + ticker + " has a gap at " + format_date(table.dates[static_cast<std::size_t>(d)]) +
                                     " that cannot be forward-filled");
            raw(d, c) = raw(d - 1, c);
            table.report.push_back("forward-filled " + ticker + " on " + format_date(table.dates[static_cast<std::size_t>(d)]));
        }
        kept.push_back(c);
    }

    table.prices.resize(days, static_cast<Eigen::Index>(kept.size()));
    std::map<std::string, std::size_t> industry_slot;
    for (std::size_t k = 0; k < kept.size(); ++k) {
        const auto& [ticker, industry] = mapping[static_cast<std::size_t>(kept[k])];
        table.prices.col(static_cast<Eigen::Index>(k)) = raw.col(kept[k]);
        table.tickers.push_back(ticker);
        auto [it, inserted] = industry_slot.try_emplace(industry, table.industries.size());
        if (inserted) table.industries.push_back(Industry{industry, {}});
        table.industries[it->second].tickers.push_back(static_cast<int>(k));
    }
    // industries that lost every ticker
    for (const auto& [ticker, industry] : mapping)
        if (!industry_slot.contains(industry)) throw IngestionError("prices: industry '" + industry + "' has no usable tickers");
    return table;
}

inline PriceTable load_prices(const std::string& prices_path, const std::string& industries_path,
                              double max_missing = 0.02) {
    std::ifstream prices(prices_path);
    if (!prices) throw IngestionError("cannot open " + prices_path);
    std::ifstream industries(industries_path);
    if (!industries) throw IngestionError("cannot open " + industries_path);
    return load_prices(prices, industries, max_missing);
}

} // namespace tsec::portfolio
