#include "evwardrop/charging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

#include "evwardrop/errors.hpp"

namespace evw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double ipow(double x, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
}

// Integral over [0, v] of s^n / (s + delta), delta >= 0.
double shifted_power_integral(double v, double delta, int n) {
    if (v <= 0.0) return 0.0;
    if (delta == 0.0) return ipow(v, n) / n;
    if (v <= 0.5 * delta) {
        // Alternating series in v / delta; ratio of successive terms <= 1/2.
        const double q = v / delta;
        double term = ipow(v, n) * q;  // v^(n+1) / delta
        double sum = 0.0;
        for (int j = 0; j < 200; ++j) {
            const double contrib = term / (n + j + 1);
            sum += (j % 2 == 0) ? contrib : -contrib;
            if (contrib <= 1e-18 * std::abs(sum)) break;
            term *= q;
        }
        return sum;
    }
    double sum = 0.0;
    double neg_delta_pow = 1.0;  // (-delta)^k
    for (int k = 0; k < n; ++k) {
        sum += neg_delta_pow * ipow(v, n - k) / (n - k);
        neg_delta_pow *= -delta;
    }
    return sum + neg_delta_pow * std::log1p(v / delta);
}

}  // namespace

void ChargingScenario::validate() const {
    if (n < 2) throw InputError("scenario: n must be an integer >= 2");
    if (eta.empty()) throw InputError("scenario: at least one slot required");
    if (eta.size() != ell0.size())
        throw InputError("scenario: eta has " + std::to_string(eta.size()) + " entries, ell0 has " +
                         std::to_string(ell0.size()));
    for (std::size_t t = 0; t < eta.size(); ++t) {
        if (!(std::isfinite(eta[t]) && eta[t] > 0.0))
            throw InputError("scenario: eta[" + std::to_string(t) + "] must be > 0");
        if (!(std::isfinite(ell0[t]) && ell0[t] >= 0.0))
            throw InputError("scenario: ell0[" + std::to_string(t) + "] must be >= 0");
    }
}

ChargingScenario ChargingScenario::uniform(std::vector<double> ell0, double eta, int n) {
    ChargingScenario sc;
    sc.n = n;
    sc.eta.assign(ell0.size(), eta);
    sc.ell0 = std::move(ell0);
    return sc;
}

std::vector<std::size_t> order_slots(const ChargingScenario& sc) {
    sc.validate();
    std::vector<double> marginal(sc.slots());
    for (std::size_t t = 0; t < sc.slots(); ++t)
        marginal[t] = sc.n * sc.eta[t] * ipow(sc.ell0[t], sc.n - 1);
    std::vector<std::size_t> perm(sc.slots());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::stable_sort(perm.begin(), perm.end(),
                     [&](std::size_t a, std::size_t b) { return marginal[a] < marginal[b]; });
    return perm;
}

ChargingModel::ChargingModel(ChargingScenario sc) : sc_(std::move(sc)) {
    order_ = order_slots(sc_);
    const std::size_t T = sc_.slots();
    const int n = sc_.n;
    const double inv = 1.0 / (n - 1);
    for (std::size_t i : order_) {
        eta_.push_back(sc_.eta[i]);
        ell0_.push_back(sc_.ell0[i]);
        weight_.push_back(std::pow(sc_.eta[i], -inv));
    }
    weight_sum_.assign(T + 1, 0.0);
    alpha_.assign(T + 1, 0.0);
    beta_.assign(T + 1, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        weight_sum_[t + 1] = weight_sum_[t] + weight_[t];
        alpha_[t + 1] = alpha_[t] + ell0_[t];
    }
    for (std::size_t t = T; t-- > 0;) beta_[t] = beta_[t + 1] + eta_[t] * ipow(ell0_[t], n);

    // Need at which sorted slot t+1 joins: every active slot s <= t sits at
    // total load (eta_{t+1} / eta_s)^(1/(n-1)) * ell0_{t+1}.
    thresholds_.assign(T, kInf);
    for (std::size_t t = 1; t < T; ++t) {
        double level = 0.0;
        for (std::size_t s = 0; s < t; ++s) level += std::pow(eta_[t] / eta_[s], inv);
        thresholds_[t - 1] = std::max(level * ell0_[t] - alpha_[t], 0.0);
    }
    // Rounding can break monotonicity between tied slots.
    for (std::size_t t = 1; t + 1 < T; ++t) thresholds_[t] = std::max(thresholds_[t], thresholds_[t - 1]);
}

std::size_t ChargingModel::active_slots(double need) const {
    if (!(need >= 0.0)) throw InputError("charging need must be >= 0");
    if (need == 0.0) return 0;
    auto it = std::lower_bound(thresholds_.begin(), thresholds_.end(), need);
    return static_cast<std::size_t>(it - thresholds_.begin()) + 1;
}

double ChargingModel::value_on_branch(double need, std::size_t active) const {
    if (active == 0) return beta_[0];
    const double w = weight_sum_[active];
    return std::pow(w, 1 - sc_.n) * ipow(need + alpha_[active], sc_.n) + beta_[active];
}

double ChargingModel::value(double need) const { return value_on_branch(need, active_slots(need)); }

double ChargingModel::unit_price_on_branch(double need, std::size_t active) const {
    const double energy = need + nonflexible_total();
    if (!(energy > 0.0)) throw DomainError("unit price undefined with no energy at all");
    return value_on_branch(need, active) / energy;
}

double ChargingModel::unit_price(double need) const {
    return unit_price_on_branch(need, active_slots(need));
}

ChargingSchedule ChargingModel::schedule(double need) const {
    ChargingSchedule out;
    const std::size_t T = slots();
    out.ell_e.assign(T, 0.0);
    out.active_slot_count = active_slots(need);
    const std::size_t active = out.active_slot_count;
    if (active > 0) {
        const double level = (need + alpha_[active]) / weight_sum_[active];
        for (std::size_t s = 0; s < active; ++s)
            out.ell_e[order_[s]] = std::max(weight_[s] * level - ell0_[s], 0.0);
    }
    out.value = value_on_branch(need, active);
    const double energy = need + nonflexible_total();
    out.unit_price = energy > 0.0 ? out.value / energy : 0.0;
    return out;
}

double ChargingModel::price_integral(double need) const {
    if (!(need >= 0.0)) throw InputError("charging need must be >= 0");
    const double total = nonflexible_total();
    const int n = sc_.n;
    double sum = 0.0;
    double lo = 0.0;
    for (std::size_t t = 1; t <= slots() && lo < need; ++t) {
        const double hi = std::min(thresholds_[t - 1], need);
        if (hi > lo && hi - lo <= 1e-3 * (lo + total)) {
            // Narrow piece: the closed form cancels, the integrand is smooth here.
            sum += boost::math::quadrature::gauss<double, 7>::integrate(
                [&](double x) { return unit_price_on_branch(x, t); }, lo, hi);
        } else if (hi > lo) {
            // On this piece V = c (x + alpha_t)^n + beta_t.
            const double c = std::pow(weight_sum_[t], 1 - n);
            const double delta = total - alpha_[t];
            sum += c * (shifted_power_integral(hi + alpha_[t], delta, n) -
                        shifted_power_integral(lo + alpha_[t], delta, n));
            if (beta_[t] > 0.0) sum += beta_[t] * std::log((hi + total) / (lo + total));
        }
        lo = std::max(lo, hi);
    }
    return sum;
}

std::vector<double> energy_thresholds(const ChargingScenario& sc) { return ChargingModel(sc).thresholds(); }

ChargingSchedule schedule_charging(const ChargingScenario& sc, double need) {
    return ChargingModel(sc).schedule(need);
}

double optimal_cost(const ChargingScenario& sc, double need) { return ChargingModel(sc).value(need); }

double charging_unit_price(const ChargingScenario& sc, double need) {
    return ChargingModel(sc).unit_price(need);
}

PriceMonotonicity is_price_increasing(const ChargingScenario& sc) {
    const ChargingModel model(sc);
    PriceMonotonicity out;
    const auto& order = model.order();
    double base_load = sc.ell0[order.front()];
    if (base_load == 0.0) {
        const bool any_load = std::any_of(sc.ell0.begin(), sc.ell0.end(), [](double l) { return l > 0.0; });
        if (!any_load) {
            out.zero_profile = true;
            out.ratio = 0.0;
            out.increasing = true;
            return out;
        }
        // The first kWh goes to an unloaded slot at no marginal cost, so the
        // price drops from its value at L = 0.
        out.empty_cheapest_slot = true;
        out.ratio = kInf;
        out.increasing = false;
        return out;
    }
    const double base_eta = sc.eta[order.front()];
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i : order) {
        const double rel_load = sc.ell0[i] / base_load;
        num += sc.eta[i] / base_eta * ipow(rel_load, sc.n);
        den += rel_load;
    }
    out.ratio = num / den;
    out.increasing = out.ratio <= sc.n;
    return out;
}

std::vector<std::pair<double, int>> price_derivative_sign_scan(const ChargingScenario& sc,
                                                               double max_need,
                                                               std::size_t grid_points) {
    if (!(max_need > 0.0)) throw InputError("sign scan: max_need must be > 0");
    if (grid_points < 2) throw InputError("sign scan: at least 2 grid points");
    const ChargingModel model(sc);
    const double spacing = max_need / static_cast<double>(grid_points - 1);
    const double h = 1e-3 * spacing;
    const bool defined_at_zero = model.nonflexible_total() > 0.0;
    auto sign = [](double diff, double scale) {
        const double noise = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(scale);
        if (diff > noise) return 1;
        if (diff < -noise) return -1;
        return 0;
    };
    std::vector<std::pair<double, int>> out;
    out.reserve(grid_points);
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double need = spacing * static_cast<double>(i);
        if (i == 0) {
            if (!defined_at_zero) continue;
            const double p0 = model.unit_price(0.0);
            out.emplace_back(0.0, sign(model.unit_price(h) - p0, p0));
            continue;
        }
        const double up = model.unit_price(need + h);
        const double down = model.unit_price(need - h);
        out.emplace_back(need, sign(up - down, up));
    }
    return out;
}

}  // namespace evw
