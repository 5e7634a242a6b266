#include "evwardrop/loaddata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "evwardrop/charging.hpp"

namespace evw {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

struct Row {
    std::size_t line;
    std::vector<std::string_view> fields;
};

class Parser {
public:
    Parser(std::string_view text, std::string source) : source_(std::move(source)) {
        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const std::size_t end = text.find('\n', pos);
            std::string_view line = text.substr(pos, end == std::string_view::npos ? text.npos : end - pos);
            ++line_no;
            line = trim(line);
            if (!line.empty() && line.front() != '#') rows_.push_back({line_no, split(line)});
            if (end == std::string_view::npos) break;
            pos = end + 1;
        }
    }

    LoadDataset parse() {
        if (rows_.empty()) throw LoadParseError(source_, 0, "empty file, header row expected");
        const Row& header = rows_.front();
        if (is_wide(header)) return parse_wide();
        if (is_long(header)) return parse_long();
        throw LoadParseError(source_, header.line,
                             "unrecognized header; expected 'date,h0,...,h23' or 'date,hour,kwh'");
    }

private:
    static bool is_wide(const Row& r) {
        if (r.fields.size() != 25 || r.fields[0] != "date") return false;
        for (int h = 0; h < 24; ++h)
            if (r.fields[h + 1] != "h" + std::to_string(h)) return false;
        return true;
    }
    static bool is_long(const Row& r) {
        return r.fields.size() == 3 && r.fields[0] == "date" && r.fields[1] == "hour" && r.fields[2] == "kwh";
    }

    [[noreturn]] void fail(std::size_t line, const std::string& msg) const {
        throw LoadParseError(source_, line, msg);
    }

    std::chrono::year_month_day date(const Row& r) const {
        const std::string_view s = r.fields[0];
        int y = 0;
        unsigned m = 0;
        unsigned d = 0;
        auto num = [&](std::string_view part, auto& out) {
            auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
            return ec == std::errc{} && p == part.data() + part.size();
        };
        if (s.size() != 10 || s[4] != '-' || s[7] != '-' || !num(s.substr(0, 4), y) || !num(s.substr(5, 2), m) ||
            !num(s.substr(8, 2), d))
            fail(r.line, "bad date '" + std::string(s) + "', expected YYYY-MM-DD");
        const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
        if (!ymd.ok()) fail(r.line, "invalid calendar date '" + std::string(s) + "'");
        return ymd;
    }

    double value(const Row& r, std::string_view field, const std::string& what) const {
        double v = 0.0;
        auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (field.empty() || ec != std::errc{} || p != field.data() + field.size() || !std::isfinite(v))
            fail(r.line, fmt::format("{} on {}: '{}' is not a number", what, r.fields[0], field));
        if (v < 0.0) fail(r.line, fmt::format("{} on {}: negative value {}", what, r.fields[0], field));
        return v;
    }

    void append(LoadDataset& ds, LoadDay day, std::size_t line) const {
        if (!ds.days.empty()) {
            const auto& last = ds.days.back().date;
            if (day.date == last) fail(line, "duplicate date " + format_date(day.date));
            if (day.date < last)
                fail(line, "date " + format_date(day.date) + " is not after " + format_date(last));
        }
        ds.days.push_back(day);
    }

    LoadDataset parse_wide() const {
        LoadDataset ds;
        for (std::size_t i = 1; i < rows_.size(); ++i) {
            const Row& r = rows_[i];
            LoadDay day;
            day.date = date(r);
            if (r.fields.size() != 25)
                fail(r.line, fmt::format("day {} has {} hourly values, expected 24", r.fields[0], r.fields.size() - 1));
            for (int h = 0; h < 24; ++h) day.kwh[h] = value(r, r.fields[h + 1], "hour " + std::to_string(h));
            append(ds, day, r.line);
        }
        return ds;
    }

    LoadDataset parse_long() const {
        LoadDataset ds;
        std::size_t i = 1;
        while (i < rows_.size()) {
            const Row& first = rows_[i];
            if (first.fields.size() != 3) fail(first.line, "expected 3 fields: date,hour,kwh");
            LoadDay day;
            day.date = date(first);
            std::array<bool, 24> seen{};
            std::size_t count = 0;
            for (; i < rows_.size(); ++i) {
                const Row& r = rows_[i];
                if (r.fields.size() != 3) fail(r.line, "expected 3 fields: date,hour,kwh");
                if (r.fields[0] != first.fields[0]) break;
                int h = -1;
                const auto hs = r.fields[1];
                auto [p, ec] = std::from_chars(hs.data(), hs.data() + hs.size(), h);
                if (ec != std::errc{} || p != hs.data() + hs.size() || h < 0 || h > 23)
                    fail(r.line, fmt::format("day {}: hour '{}' is not in 0..23", r.fields[0], hs));
                if (seen[h]) fail(r.line, fmt::format("day {}: hour {} listed twice", r.fields[0], h));
                seen[h] = true;
                ++count;
                day.kwh[h] = value(r, r.fields[2], "hour " + std::to_string(h));
            }
            if (count != 24) {
                std::string missing;
                for (int h = 0; h < 24; ++h)
                    if (!seen[h]) missing += (missing.empty() ? "" : " ") + std::to_string(h);
                fail(first.line, fmt::format("day {} has {} hourly values, missing hours {}", first.fields[0], count,
                                             missing));
            }
            append(ds, day, first.line);
        }
        return ds;
    }

    std::string source_;
    std::vector<Row> rows_;
};

}  // namespace

bool operator==(const LoadDay& a, const LoadDay& b) { return a.date == b.date && a.kwh == b.kwh; }
bool operator==(const LoadDataset& a, const LoadDataset& b) { return a.days == b.days; }

LoadParseError::LoadParseError(const std::string& source, std::size_t row, const std::string& message)
    : InputError(row ? fmt::format("{}:{}: {}", source, row, message) : fmt::format("{}: {}", source, message)),
      row_(row) {}

std::string format_date(const std::chrono::year_month_day& d) {
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                       static_cast<unsigned>(d.day()));
}

LoadDataset parse_load_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open load file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_load_csv_text(buf.str(), path.string());
}

LoadDataset parse_load_csv_text(std::string_view text, const std::string& source) {
    return Parser(text, source).parse();
}

SlotProfile aggregate_day_to_slots(const std::array<double, 24>& hours, std::size_t T, Binning binning) {
    if (T < 1 || T > 24) throw InputError("slot count T must lie in 1..24");
    std::array<double, 24> values = hours;
    if (binning == Binning::Sorted) std::sort(values.begin(), values.end());
    SlotProfile out;
    out.ell0.assign(T, 0.0);
    const std::size_t base = 24 / T;
    const std::size_t extra = 24 % T;
    std::size_t h = 0;
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t size = base + (t < extra ? 1 : 0);
        for (std::size_t k = 0; k < size; ++k) out.ell0[t] += values[h++];
    }
    return out;
}

EtaPolicy uniform_eta(double eta) {
    return [eta](std::size_t T) { return std::vector<double>(T, eta); };
}

std::vector<MonthFraction> monthly_increasing_fraction(const LoadDataset& ds, std::size_t T, int n,
                                                       const EtaPolicy& eta, Binning binning) {
    if (n < 2) throw InputError("cost exponent n must be an integer >= 2");
    ChargingScenario sc;
    sc.n = n;
    sc.eta = eta(T);
    if (sc.eta.size() != T) throw InputError("eta policy returned the wrong number of slots");
    std::vector<MonthFraction> months(12);
    for (unsigned m = 0; m < 12; ++m) months[m].month = m + 1;
    for (const LoadDay& day : ds.days) {
        const unsigned m = static_cast<unsigned>(day.date.month()) - 1;
        sc.ell0 = aggregate_day_to_slots(day.kwh, T, binning).ell0;
        const PriceMonotonicity mono = is_price_increasing(sc);
        ++months[m].days_counted;
        if (mono.zero_profile) ++months[m].zero_days;
        if (mono.increasing) ++months[m].days_increasing;
    }
    for (unsigned m = 0; m < 12; ++m)
        if (months[m].days_counted > 0)
            months[m].fraction = static_cast<double>(months[m].days_increasing) / static_cast<double>(months[m].days_counted);
    return months;
}

double yearly_increasing_fraction(const std::vector<MonthFraction>& months) {
    std::size_t inc = 0;
    std::size_t days = 0;
    for (const MonthFraction& m : months) {
        inc += m.days_increasing;
        days += m.days_counted;
    }
    if (days == 0) throw InputError("no days counted");
    return static_cast<double>(inc) / static_cast<double>(days);
}

}  // namespace evw
