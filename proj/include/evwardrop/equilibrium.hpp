#pragma once

// Wardrop equilibria of the two-class routing game through its potential:
// the minimizers of the potential over the demand polytope are equilibria,
// and the potential's gradient is the vector of per-class arc costs.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "evwardrop/charging.hpp"
#include "evwardrop/network.hpp"

namespace evw {

struct EquilibriumConfig {
    double gap_tolerance = 1e-6;          // relative duality gap
    std::size_t max_iterations = 100000;  // sweeps over all (class, O-D) blocks
    double line_search_tolerance = 1e-10; // bisection interval, in flow units
    double wardrop_epsilon = 1e-5;        // relative slack for certification
    bool record_potential = false;        // keep the potential after each sweep
};

struct EquilibriumResult {
    FlowAssignment flows;
    double charging_need = 0.0;   // kWh
    double unit_price = 0.0;      // euro/kWh
    double potential = 0.0;
    double relative_gap = 0.0;
    std::size_t iterations = 0;
    double wardrop_residual = 0.0;
    bool certified = false;
    bool converged = false;
    /// Unit price passes the monotonicity test, so the equilibrium is unique.
    bool unique_regime = true;
    /// A line search met a non-monotone directional derivative and fell back
    /// to a damped step; the point is a local minimum only.
    bool local_only = false;
    std::vector<std::string> warnings;
    std::vector<double> potential_history;
};

/// Thrown when the gap tolerance is not met within max_iterations.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, EquilibriumResult last)
        : std::runtime_error(what), last_(std::move(last)) {}
    const EquilibriumResult& last_iterate() const { return last_; }

private:
    EquilibriumResult last_;
};

struct WardropCheck {
    double residual = 0.0;
    bool certified = false;
};

enum class IntegralMethod { ClosedForm, Quadrature };

/// Throws InputError unless flows are nonnegative and conserve each class's
/// demand X_s * D_k (node balance, and route sums when route flows are set).
void check_feasible(const RoadNetwork& net, const FlowAssignment& flows, const ClassParams& params,
                    double tolerance = 1e-9);

double beckmann_potential(const RoadNetwork& net, const FlowAssignment& flows,
                          const ClassParams& params, const ChargingModel& charging,
                          IntegralMethod method = IntegralMethod::ClosedForm);
double beckmann_potential(const RoadNetwork& net, const FlowAssignment& flows,
                          const ClassParams& params, const ChargingScenario& sc,
                          IntegralMethod method = IntegralMethod::ClosedForm);

/// Partial derivatives by (arc, class); equal to the generalized arc costs at
/// the current unit price.
std::vector<ClassPair> beckmann_gradient(const RoadNetwork& net, const FlowAssignment& flows,
                                         const ClassParams& params, const ChargingModel& charging);
std::vector<ClassPair> beckmann_gradient(const RoadNetwork& net, const FlowAssignment& flows,
                                         const ClassParams& params, const ChargingScenario& sc);

/// Unit price at a charging need; 0 when both need and nonflexible load are
/// zero (the limit of the price there).
double equilibrium_unit_price(const ChargingModel& charging, double need);

/// Conditional-gradient minimization of the potential. `start`, when given,
/// is a feasible route-flow assignment used instead of the all-or-nothing
/// initialization. Throws ConvergenceError on non-convergence.
EquilibriumResult solve_equilibrium(const RoadNetwork& net, const ClassParams& params,
                                    const ChargingScenario& sc, const EquilibriumConfig& cfg = {},
                                    const std::vector<PathFlow>* start = nullptr);

/// Residual = max over classes and O-D pairs of (average cost of used flow
/// - shortest route cost) / shortest route cost. Uses route flows when
/// present, otherwise a class-level arc-wise bound.
WardropCheck verify_wardrop(const RoadNetwork& net, const FlowAssignment& flows,
                            const ClassParams& params, const ChargingScenario& sc, double epsilon);

/// Brute-force potential minimizer for two-node networks of at most four
/// parallel arcs: exhaustive grid over per-class splits, then local pairwise
/// refinement. A nonzero seed starts the refinement from a random feasible
/// split instead of the grid optimum.
FlowAssignment enumerate_parallel_equilibrium(const RoadNetwork& net, const ClassParams& params,
                                              const ChargingScenario& sc, std::size_t grid_resolution,
                                              std::uint64_t seed = 0);

}  // namespace evw
