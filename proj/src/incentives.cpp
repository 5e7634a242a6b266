#include "evwardrop/incentives.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>

#include <fmt/format.h>

#include "evwardrop/errors.hpp"

namespace evw {

namespace {

// Calls job(i) for i in [0, count) on up to `threads` workers. Each job owns
// its output slot; the first failure by index is rethrown.
template <class Job>
void run_indexed(std::size_t count, std::size_t threads, Job&& job) {
    std::vector<std::exception_ptr> errors(count);
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            try {
                job(i);
            } catch (...) {
                errors[i] = std::current_exception();
                break;
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const std::size_t workers = std::min(threads, count);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        job(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

EquilibriumResult solve_at(const RoadNetwork& net, const ClassParams& params, const ChargingScenario& sc,
                           const SweepOptions& opts, const EquilibriumResult* previous, const std::string& label) {
    const std::vector<PathFlow>* start = previous ? &previous->flows.paths : nullptr;
    try {
        return solve_equilibrium(net, params, sc, opts.solver, start);
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(label + ": " + e.what(), e.last_iterate());
    }
}

}  // namespace

void EnvWeights::validate(const RoadNetwork& net) const {
    if (gamma.size() != net.arc_count())
        throw InputError("environmental weights: expected " + std::to_string(net.arc_count()) + " entries, got " +
                         std::to_string(gamma.size()));
    for (std::size_t a = 0; a < gamma.size(); ++a)
        if (!(std::isfinite(gamma[a]) && gamma[a] >= 1.0))
            throw InputError("environmental weight of arc '" + net.arcs()[a].id + "' must be >= 1");
}

std::size_t threads_from_env() {
    const char* v = std::getenv("EVW_THREADS");
    if (!v || !*v) return 0;
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 0) return 0;
    return static_cast<std::size_t>(n);
}

std::vector<double> uniform_grid(double lo, double hi, double step) {
    if (!(step > 0.0 && std::isfinite(step))) throw InputError("grid step must be > 0");
    if (!(hi >= lo)) throw InputError("grid upper bound must be >= lower bound");
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> grid(count);
    for (std::size_t i = 0; i < count; ++i) grid[i] = lo + static_cast<double>(i) * step;
    return grid;
}

double environmental_cost(const RoadNetwork& net, const FlowAssignment& flows, const EnvWeights& weights) {
    weights.validate(net);
    double cost = 0.0;
    for (std::size_t a = 0; a < net.arc_count(); ++a)
        cost += weights.gamma[a] * flows.of(a, VehicleClass::Gasoline) * travel_time(net.arcs()[a], flows.total(a));
    return cost;
}

TollSweepResult optimize_toll(const RoadNetwork& net, const ClassParams& params, const ChargingScenario& sc,
                              const EnvWeights& weights, const std::string& tolled_arc, double toll_max,
                              double increment, const SweepOptions& opts) {
    weights.validate(net);
    if (!(toll_max >= 0.0)) throw InputError("toll_max must be >= 0");
    if (!(increment > 0.0)) throw InputError("toll increment must be > 0");
    const std::size_t arc = net.arc_index(tolled_arc);

    TollSweepResult out;
    out.arc_id = tolled_arc;
    out.toll_grid = uniform_grid(0.0, toll_max, increment);
    const std::size_t count = out.toll_grid.size();
    out.equilibria.resize(count);
    out.env_costs.resize(count);

    const bool sequential_warm = opts.warm_start && opts.threads <= 1;
    run_indexed(count, opts.threads, [&](std::size_t i) {
        const RoadNetwork tolled = net.with_toll(arc, VehicleClass::Gasoline, out.toll_grid[i]);
        const EquilibriumResult* previous = sequential_warm && i > 0 ? &out.equilibria[i - 1] : nullptr;
        out.equilibria[i] =
            solve_at(tolled, params, sc, opts, previous, fmt::format("toll {:.10g} on arc '{}'", out.toll_grid[i], tolled_arc));
        out.env_costs[i] = environmental_cost(tolled, out.equilibria[i].flows, weights);
    });

    const double lowest = *std::min_element(out.env_costs.begin(), out.env_costs.end());
    const double slack = opts.tie_tolerance * std::abs(lowest);
    for (std::size_t i = 0; i < count; ++i)
        if (out.env_costs[i] <= lowest + slack) {
            out.best_index = i;
            break;
        }
    out.best_toll = out.toll_grid[out.best_index];
    out.best_cost = out.env_costs[out.best_index];
    const double reference = out.env_costs.front();
    out.gain = out.best_index == 0 || reference == 0.0 ? 0.0 : std::abs(out.best_cost - reference) / reference;
    return out;
}

std::vector<EquilibriumResult> sweep_fuel_price(const RoadNetwork& net, const ClassParams& params,
                                                const ChargingScenario& sc,
                                                const std::vector<double>& lambda_g_grid,
                                                const SweepOptions& opts) {
    for (double v : lambda_g_grid)
        if (!(v > 0.0 && std::isfinite(v))) throw InputError("fuel price grid values must be > 0");
    std::vector<EquilibriumResult> out(lambda_g_grid.size());
    const bool sequential_warm = opts.warm_start && opts.threads <= 1;
    run_indexed(lambda_g_grid.size(), opts.threads, [&](std::size_t i) {
        ClassParams p = params;
        p.lambda_g = lambda_g_grid[i];
        const EquilibriumResult* previous = sequential_warm && i > 0 ? &out[i - 1] : nullptr;
        out[i] = solve_at(net, p, sc, opts, previous, fmt::format("fuel price {:.10g}", lambda_g_grid[i]));
    });
    return out;
}

std::vector<PenetrationPoint> sweep_ev_penetration(const RoadNetwork& net, const ClassParams& params,
                                                   const ChargingScenario& sc, const EnvWeights& weights,
                                                   const std::vector<double>& x_e_grid,
                                                   const std::string& tolled_arc, double toll_max,
                                                   double increment, const SweepOptions& opts) {
    for (double v : x_e_grid)
        if (!(v >= 0.0 && v <= 1.0)) throw InputError("EV penetration grid values must lie in [0, 1]");
    std::vector<PenetrationPoint> out;
    out.reserve(x_e_grid.size());
    for (double x_e : x_e_grid) {
        ClassParams p = params;
        p.x_e = x_e;
        out.push_back({x_e, optimize_toll(net, p, sc, weights, tolled_arc, toll_max, increment, opts)});
    }
    return out;
}

}  // namespace evw
