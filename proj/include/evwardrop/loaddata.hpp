#pragma once

// Hourly household load datasets: CSV ingestion, aggregation of a day into
// T slots, and per-month share of days whose charging unit price increases.
//
// Accepted CSV layouts (header row required, '#' lines ignored):
//   wide:  date,h0,h1,...,h23     one row per day
//   long:  date,hour,kwh          24 rows per day, hours 0..23 in any order
// Dates are ISO YYYY-MM-DD and must be strictly increasing.

#include <array>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evwardrop/errors.hpp"

namespace evw {

struct LoadDay {
    std::chrono::year_month_day date;
    std::array<double, 24> kwh{};
};

struct LoadDataset {
    std::vector<LoadDay> days;
};

bool operator==(const LoadDay& a, const LoadDay& b);
bool operator==(const LoadDataset& a, const LoadDataset& b);

/// Parse failure with the 1-based line number of the offending row.
class LoadParseError : public InputError {
public:
    LoadParseError(const std::string& source, std::size_t row, const std::string& message);
    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

LoadDataset parse_load_csv(const std::filesystem::path& path);
LoadDataset parse_load_csv_text(std::string_view text, const std::string& source = "<text>");

std::string format_date(const std::chrono::year_month_day& d);

enum class Binning {
    Sorted,        // blocks of the ascending-sorted hourly values
    Chronological  // blocks of consecutive hours 0..23
};

struct SlotProfile {
    std::vector<double> ell0;
    std::size_t slots() const { return ell0.size(); }
};

/// T blocks of 24/T hours; when T does not divide 24 the first 24 mod T
/// blocks hold one extra hour.
SlotProfile aggregate_day_to_slots(const std::array<double, 24>& hours, std::size_t T,
                                   Binning binning = Binning::Sorted);

/// eta per slot for a given T.
using EtaPolicy = std::function<std::vector<double>(std::size_t T)>;
EtaPolicy uniform_eta(double eta = 0.01);

struct MonthFraction {
    unsigned month = 0;                // 1..12
    std::optional<double> fraction;    // absent when no day falls in the month
    std::size_t days_counted = 0;
    std::size_t days_increasing = 0;
    std::size_t zero_days = 0;         // days with no consumption, counted as increasing
};

/// One entry per calendar month, January first.
std::vector<MonthFraction> monthly_increasing_fraction(const LoadDataset& ds, std::size_t T, int n = 2,
                                                       const EtaPolicy& eta = uniform_eta(),
                                                       Binning binning = Binning::Sorted);

/// Share of all days with an increasing unit price.
double yearly_increasing_fraction(const std::vector<MonthFraction>& months);

}  // namespace evw
