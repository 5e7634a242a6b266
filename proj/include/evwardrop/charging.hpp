#pragma once

// Aggregator-side charging problem: schedule a fleet charging need L_e over
// T slots with per-slot cost f_t(l) = eta_t * l^n on top of a nonflexible
// load, then price every kWh at the resulting average cost.

#include <cstddef>
#include <utility>
#include <vector>

namespace evw {

struct ChargingScenario {
    int n = 2;                  // cost exponent, integer >= 2
    std::vector<double> eta;    // euro / kWh^n, > 0
    std::vector<double> ell0;   // nonflexible load per slot, kWh, >= 0

    std::size_t slots() const { return eta.size(); }
    /// Throws InputError on mismatched sizes or out-of-range entries.
    void validate() const;

    /// Uniform eta over the given nonflexible profile.
    static ChargingScenario uniform(std::vector<double> ell0, double eta = 0.01, int n = 2);
};

struct ChargingSchedule {
    std::vector<double> ell_e;        // per slot, original slot order
    double value = 0.0;               // total cost, euro
    double unit_price = 0.0;          // euro/kWh
    std::size_t active_slot_count = 0;
};

struct PriceMonotonicity {
    double ratio = 0.0;
    bool increasing = true;
    /// The smallest-marginal slot has no load while others do; the ratio is
    /// infinite and the price decreases near L = 0.
    bool empty_cheapest_slot = false;
    bool zero_profile = false;
};

/// Closed-form water-filling solution with the slot sort, thresholds and
/// prefix sums computed once. All queries are O(T) or better.
class ChargingModel {
public:
    explicit ChargingModel(ChargingScenario sc);

    const ChargingScenario& scenario() const { return sc_; }
    std::size_t slots() const { return sc_.slots(); }

    /// Permutation of slot indices sorted by marginal cost at the
    /// nonflexible load (stable on ties).
    const std::vector<std::size_t>& order() const { return order_; }

    /// Energy thresholds in sorted order: entry t-1 is the need at which
    /// sorted slot t+1 starts charging; the last entry is +infinity.
    const std::vector<double>& thresholds() const { return thresholds_; }

    /// Number of charging slots at need L (0 for L = 0).
    std::size_t active_slots(double need) const;

    ChargingSchedule schedule(double need) const;
    double value(double need) const;
    /// Optimal value evaluated on the branch with `active` charging slots,
    /// regardless of whether `need` lies in that branch's interval.
    double value_on_branch(double need, std::size_t active) const;
    double unit_price(double need) const;
    double unit_price_on_branch(double need, std::size_t active) const;

    /// Integral of the unit price from 0 to `need`, in closed form.
    double price_integral(double need) const;

    double nonflexible_total() const { return alpha_.back(); }

private:
    ChargingScenario sc_;
    std::vector<std::size_t> order_;
    std::vector<double> eta_;       // sorted
    std::vector<double> ell0_;      // sorted
    std::vector<double> weight_;    // eta^(-1/(n-1)), sorted
    std::vector<double> weight_sum_;// prefix sums of weight_, [t] = first t slots
    std::vector<double> alpha_;     // prefix sums of ell0_, [t] = first t slots
    std::vector<double> beta_;      // suffix cost, [t] = cost of slots t+1..T
    std::vector<double> thresholds_;
};

std::vector<std::size_t> order_slots(const ChargingScenario& sc);
std::vector<double> energy_thresholds(const ChargingScenario& sc);
ChargingSchedule schedule_charging(const ChargingScenario& sc, double need);
double optimal_cost(const ChargingScenario& sc, double need);
double charging_unit_price(const ChargingScenario& sc, double need);

/// Necessary and sufficient test for an increasing unit price on (0, inf).
PriceMonotonicity is_price_increasing(const ChargingScenario& sc);

/// Sign (-1, 0, +1) of the finite-difference derivative of the unit price on
/// a uniform grid over [0, max_need]. Interior points use central
/// differences; the L = 0 point uses a forward difference and is omitted
/// when the price is undefined there.
std::vector<std::pair<double, int>> price_derivative_sign_scan(const ChargingScenario& sc,
                                                               double max_need,
                                                               std::size_t grid_points);

}  // namespace evw
