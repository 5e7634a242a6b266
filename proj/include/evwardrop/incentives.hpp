#pragma once

// Toll design on top of the equilibrium: environmental cost of gasoline
// traffic, exhaustive search over one GV toll, and parameter sweeps.

#include <cstddef>
#include <string>
#include <vector>

#include "evwardrop/equilibrium.hpp"

namespace evw {

/// Per-arc environmental weight gamma_a >= 1.
struct EnvWeights {
    std::vector<double> gamma;

    static EnvWeights uniform(std::size_t arc_count) { return {std::vector<double>(arc_count, 1.0)}; }
    void validate(const RoadNetwork& net) const;
};

struct SweepOptions {
    EquilibriumConfig solver{1e-11};
    /// Worker threads; 0 runs sequentially.
    std::size_t threads = 0;
    /// Start each solve from the previous grid point's route flows. Only
    /// honoured when running sequentially.
    bool warm_start = false;
    /// Environmental costs within this relative distance of the minimum count
    /// as ties; the smallest such toll wins.
    double tie_tolerance = 1e-6;
};

/// Thread count requested through EVW_THREADS (0 when unset or invalid).
std::size_t threads_from_env();

/// {lo, lo + step, ..., hi}: floor((hi - lo) / step) + 1 points, computed by
/// index so that no rounding drift accumulates.
std::vector<double> uniform_grid(double lo, double hi, double step);

struct TollSweepResult {
    std::string arc_id;
    std::vector<double> toll_grid;
    std::vector<double> env_costs;
    std::vector<EquilibriumResult> equilibria;
    std::size_t best_index = 0;
    double best_toll = 0.0;
    double best_cost = 0.0;
    double gain = 0.0;  // |best_cost - cost at zero toll| / cost at zero toll
};

/// sum_a gamma_a * x_{a,g} * d_a(x_a).
double environmental_cost(const RoadNetwork& net, const FlowAssignment& flows, const EnvWeights& weights);

/// Exhaustive search over the GV toll of one arc on {0, increment, ...,
/// toll_max}. Throws ConvergenceError naming the toll when a grid point
/// fails to converge.
TollSweepResult optimize_toll(const RoadNetwork& net, const ClassParams& params, const ChargingScenario& sc,
                              const EnvWeights& weights, const std::string& tolled_arc, double toll_max = 5.0,
                              double increment = 0.01, const SweepOptions& opts = {});

std::vector<EquilibriumResult> sweep_fuel_price(const RoadNetwork& net, const ClassParams& params,
                                                const ChargingScenario& sc,
                                                const std::vector<double>& lambda_g_grid,
                                                const SweepOptions& opts = {});

struct PenetrationPoint {
    double x_e = 0.0;
    TollSweepResult tolls;
};

std::vector<PenetrationPoint> sweep_ev_penetration(const RoadNetwork& net, const ClassParams& params,
                                                   const ChargingScenario& sc, const EnvWeights& weights,
                                                   const std::vector<double>& x_e_grid,
                                                   const std::string& tolled_arc, double toll_max = 5.0,
                                                   double increment = 0.01, const SweepOptions& opts = {});

}  // namespace evw
