#include "evwardrop/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "evwardrop/errors.hpp"

namespace evw {

namespace {

constexpr std::size_t kE = index(VehicleClass::Electric);
constexpr std::size_t kG = index(VehicleClass::Gasoline);

double class_demand(const RoadNetwork& net, const ClassParams& params, VehicleClass c, std::size_t od) {
    return params.share(c) * net.od_pairs()[od].demand;
}

double price_integral_quadrature(const ChargingModel& model, double need) {
    using boost::math::quadrature::gauss_kronrod;
    auto price = [&](double x) { return equilibrium_unit_price(model, x); };
    double sum = 0.0;
    double lo = 0.0;
    for (double threshold : model.thresholds()) {
        const double hi = std::min(threshold, need);
        if (hi > lo) sum += gauss_kronrod<double, 15>::integrate(price, lo, hi, 20, 1e-13);
        lo = std::max(lo, hi);
        if (lo >= need) break;
    }
    return sum;
}

std::vector<double> class_arc_costs(const RoadNetwork& net, const FlowAssignment& flows,
                                    const ClassParams& params, VehicleClass c, double unit_price_e) {
    std::vector<double> cost(net.arc_count());
    for (std::size_t a = 0; a < net.arc_count(); ++a)
        cost[a] = arc_generalized_cost(net.arcs()[a], flows.total(a), c, params, unit_price_e,
                                       net.toll(a, c));
    return cost;
}

double route_cost(const Path& p, const std::vector<double>& arc_cost) {
    double sum = 0.0;
    for (std::size_t a : p.arcs) sum += arc_cost[a];
    return sum;
}

// Route-based conditional-gradient state. Each block is one (class, O-D)
// pair with its active routes; flows move pairwise from a costlier active
// route to the current shortest route with an exact line search.
class Solver {
public:
    Solver(const RoadNetwork& net, const ClassParams& params, const ChargingModel& model,
           const EquilibriumConfig& cfg)
        : net_(net), params_(params), model_(model), cfg_(cfg), flows_(net.arc_count()) {
        for (VehicleClass c : kAllClasses)
            for (std::size_t k = 0; k < net.od_pairs().size(); ++k) {
                const double d = class_demand(net, params, c, k);
                if (d > 0.0) blocks_.push_back({c, k, d, {}, {}});
            }
    }

    void all_or_nothing() {
        rebuild_arc_flows();
        std::array<std::vector<double>, 2> cost{costs(VehicleClass::Electric), costs(VehicleClass::Gasoline)};
        for (Block& b : blocks_) {
            b.paths = {shortest_path(net_, b.od, cost[index(b.cls)]).path};
            b.flow = {b.demand};
        }
        rebuild_arc_flows();
    }

    void load(const std::vector<PathFlow>& start) {
        FlowAssignment probe = arc_flows_from_path_flows(net_, start);
        check_feasible(net_, probe, params_);
        for (const PathFlow& pf : start)
            for (VehicleClass c : kAllClasses) {
                const double f = pf.flow[index(c)];
                if (f <= 0.0) continue;
                Block* b = find_block(c, pf.path.od);
                if (!b) throw InputError("start assignment routes flow for a class without demand");
                b->paths.push_back(pf.path);
                b->flow.push_back(f);
            }
        for (const Block& b : blocks_)
            if (b.paths.empty()) throw InputError("start assignment misses a class demand");
        rebuild_arc_flows();
    }

    // One pass over every block. Returns false if any step had to fall back
    // to a damped step.
    bool sweep() {
        rebuild_arc_flows();
        bool monotone = true;
        for (Block& b : blocks_) {
            std::vector<double> cost = costs(b.cls);
            const Path target = shortest_path(net_, b.od, cost).path;
            std::size_t q = add_route(b, target);
            std::vector<std::pair<double, std::size_t>> donors;
            const double target_cost = route_cost(b.paths[q], cost);
            for (std::size_t i = 0; i < b.paths.size(); ++i) {
                if (i == q || b.flow[i] <= 0.0) continue;
                const double c = route_cost(b.paths[i], cost);
                if (c > target_cost) donors.emplace_back(c, i);
            }
            std::sort(donors.begin(), donors.end(), std::greater<>());
            for (const auto& [ignored, i] : donors) monotone &= pairwise_step(b, i, q);
            prune(b, q);
        }
        rebuild_arc_flows();
        return monotone;
    }

    double gap() const {
        std::array<std::vector<double>, 2> cost{costs(VehicleClass::Electric), costs(VehicleClass::Gasoline)};
        double g = 0.0;
        for (const Block& b : blocks_) {
            const auto& cs = cost[index(b.cls)];
            const double best = shortest_path(net_, b.od, cs).cost;
            double used = 0.0;
            for (std::size_t i = 0; i < b.paths.size(); ++i) used += b.flow[i] * route_cost(b.paths[i], cs);
            g += used - b.demand * best;
        }
        return std::max(g, 0.0);
    }

    double potential() const { return beckmann_potential(net_, flows_, params_, model_); }

    FlowAssignment assignment() const {
        std::vector<PathFlow> merged;
        for (const Block& b : blocks_)
            for (std::size_t i = 0; i < b.paths.size(); ++i) {
                auto it = std::find_if(merged.begin(), merged.end(), [&](const PathFlow& pf) {
                    return pf.path.od == b.paths[i].od && pf.path.arcs == b.paths[i].arcs;
                });
                if (it == merged.end()) {
                    merged.push_back({b.paths[i], {0.0, 0.0}});
                    it = std::prev(merged.end());
                }
                it->flow[index(b.cls)] += b.flow[i];
            }
        std::sort(merged.begin(), merged.end(), [&](const PathFlow& x, const PathFlow& y) {
            if (x.path.od != y.path.od) return x.path.od < y.path.od;
            return net_.path_id(x.path) < net_.path_id(y.path);
        });
        FlowAssignment out = flows_;
        out.paths = std::move(merged);
        return out;
    }

    double need() const { return need_; }

private:
    struct Block {
        VehicleClass cls;
        std::size_t od;
        double demand;
        std::vector<Path> paths;
        std::vector<double> flow;
    };

    Block* find_block(VehicleClass c, std::size_t od) {
        for (Block& b : blocks_)
            if (b.cls == c && b.od == od) return &b;
        return nullptr;
    }

    static std::size_t add_route(Block& b, const Path& p) {
        for (std::size_t i = 0; i < b.paths.size(); ++i)
            if (b.paths[i].arcs == p.arcs) return i;
        b.paths.push_back(p);
        b.flow.push_back(0.0);
        return b.paths.size() - 1;
    }

    static void prune(Block& b, std::size_t keep) {
        std::vector<Path> paths;
        std::vector<double> flow;
        for (std::size_t i = 0; i < b.paths.size(); ++i)
            if (i == keep || b.flow[i] > 0.0) {
                paths.push_back(std::move(b.paths[i]));
                flow.push_back(b.flow[i]);
            }
        b.paths = std::move(paths);
        b.flow = std::move(flow);
    }

    void rebuild_arc_flows() {
        for (auto& v : flows_.arc) v = {0.0, 0.0};
        for (const Block& b : blocks_)
            for (std::size_t i = 0; i < b.paths.size(); ++i)
                for (std::size_t a : b.paths[i].arcs) flows_.arc[a][index(b.cls)] += b.flow[i];
        need_ = total_class_energy(net_, flows_, VehicleClass::Electric, params_);
    }

    std::vector<double> costs(VehicleClass c) const {
        return class_arc_costs(net_, flows_, params_, c, equilibrium_unit_price(model_, need_));
    }

    // Moves flow from route `from` to route `to` of block b.
    bool pairwise_step(Block& b, std::size_t from, std::size_t to) {
        const double cap = b.flow[from];
        if (cap <= 0.0) return true;
        const VehicleClass cls = b.cls;

        std::map<std::size_t, int> coef;
        for (std::size_t a : b.paths[to].arcs) coef[a] += 1;
        for (std::size_t a : b.paths[from].arcs) coef[a] -= 1;
        std::vector<std::pair<std::size_t, int>> delta;
        for (auto [a, k] : coef)
            if (k != 0) delta.emplace_back(a, k);
        if (delta.empty()) return true;
        const double dlen = net_.path_length(b.paths[to]) - net_.path_length(b.paths[from]);
        const double m = params_.consumption(cls);
        const double need_rate = m * params_.fleet_scale * dlen;

        auto slope = [&](double step) {
            double s = 0.0;
            for (auto [a, k] : delta) {
                const Arc& arc = net_.arcs()[a];
                const double x = std::max(flows_.total(a) + k * step, 0.0);
                s += k * (params_.tau * travel_time(arc, x) + net_.toll(a, cls));
            }
            const double price = cls == VehicleClass::Electric
                                     ? equilibrium_unit_price(model_, std::max(need_ + step * need_rate, 0.0))
                                     : params_.lambda_g;
            return s + m * price * dlen;
        };
        // Potential change along the move, with the rounding scale of its terms.
        auto change = [&](double step) {
            double d = 0.0;
            double scale = 0.0;
            for (auto [a, k] : delta) {
                const Arc& arc = net_.arcs()[a];
                const double x0 = flows_.total(a);
                const double x1 = std::max(x0 + k * step, 0.0);
                const double i0 = params_.tau * travel_time_integral(arc, x0);
                const double i1 = params_.tau * travel_time_integral(arc, x1);
                d += i1 - i0 + k * step * net_.toll(a, cls);
                scale += std::abs(i0) + std::abs(i1);
            }
            if (cls == VehicleClass::Electric) {
                const double n1 = std::max(need_ + step * need_rate, 0.0);
                const double p0 = model_.price_integral(need_) / params_.fleet_scale;
                const double p1 = model_.price_integral(n1) / params_.fleet_scale;
                d += p1 - p0;
                scale += std::abs(p0) + std::abs(p1);
            } else {
                d += params_.lambda_g * m * dlen * step;
            }
            return std::pair{d, scale};
        };
        auto rises = [&](double step) {
            const auto [d, scale] = change(step);
            return d > 64.0 * std::numeric_limits<double>::epsilon() * scale;
        };

        if (slope(0.0) >= 0.0) return true;
        double step = cap;
        if (slope(cap) > 0.0) {
            double lo = 0.0;
            double hi = cap;
            double s_lo = slope(lo);
            double s_hi = slope(hi);
            while (hi - lo > cfg_.line_search_tolerance) {
                const double mid = 0.5 * (lo + hi);
                const double s_mid = slope(mid);
                if (s_mid <= 0.0) {
                    lo = mid;
                    s_lo = s_mid;
                } else {
                    hi = mid;
                    s_hi = s_mid;
                }
            }
            // Final secant step inside the bracket.
            step = s_hi > s_lo ? lo + (hi - lo) * (-s_lo) / (s_hi - s_lo) : 0.5 * (lo + hi);
        }

        bool monotone = true;
        for (int tries = 0; tries < 60 && rises(step); ++tries) {
            monotone = false;
            step *= 0.5;
        }
        if (!monotone && rises(step)) return false;

        if (step >= cap) {
            b.flow[to] += cap;
            b.flow[from] = 0.0;
        } else {
            b.flow[to] += step;
            b.flow[from] -= step;
        }
        for (auto [a, k] : delta) {
            double& v = flows_.arc[a][index(cls)];
            v = std::max(v + k * std::min(step, cap), 0.0);
        }
        if (cls == VehicleClass::Electric)
            need_ = std::max(need_ + std::min(step, cap) * need_rate, 0.0);
        return monotone;
    }

    const RoadNetwork& net_;
    const ClassParams& params_;
    const ChargingModel& model_;
    const EquilibriumConfig& cfg_;
    FlowAssignment flows_;
    double need_ = 0.0;
    std::vector<Block> blocks_;
};

}  // namespace

void check_feasible(const RoadNetwork& net, const FlowAssignment& flows, const ClassParams& params,
                    double tolerance) {
    if (flows.arc.size() != net.arc_count()) throw InputError("flow vector does not match the network");
    for (std::size_t a = 0; a < net.arc_count(); ++a)
        for (VehicleClass c : kAllClasses) {
            const double v = flows.of(a, c);
            if (!(std::isfinite(v) && v >= -tolerance))
                throw InputError("negative " + std::string(class_tag(c)) + " flow on arc '" +
                                 net.arcs()[a].id + "'");
        }
    for (VehicleClass c : kAllClasses) {
        std::vector<double> balance(net.nodes().size(), 0.0);
        for (std::size_t a = 0; a < net.arc_count(); ++a) {
            balance[net.tail_index(a)] -= flows.of(a, c);
            balance[net.head_index(a)] += flows.of(a, c);
        }
        for (std::size_t k = 0; k < net.od_pairs().size(); ++k) {
            const double d = class_demand(net, params, c, k);
            balance[net.origin_index(k)] += d;
            balance[net.destination_index(k)] -= d;
        }
        for (std::size_t v = 0; v < balance.size(); ++v)
            if (std::abs(balance[v]) > tolerance)
                throw InputError("infeasible " + std::string(class_tag(c)) + " flows: node '" +
                                 net.nodes()[v] + "' is out of balance by " + std::to_string(balance[v]));
    }
    if (!flows.paths.empty()) {
        std::vector<ClassPair> routed(net.od_pairs().size(), ClassPair{0.0, 0.0});
        for (const PathFlow& pf : flows.paths)
            for (VehicleClass c : kAllClasses) routed[pf.path.od][index(c)] += pf.flow[index(c)];
        for (std::size_t k = 0; k < routed.size(); ++k)
            for (VehicleClass c : kAllClasses)
                if (std::abs(routed[k][index(c)] - class_demand(net, params, c, k)) > tolerance)
                    throw InputError("route flows of O-D pair " + std::to_string(k) + " do not meet the " +
                                     class_tag(c) + " demand");
    }
}

double equilibrium_unit_price(const ChargingModel& charging, double need) {
    if (need + charging.nonflexible_total() <= 0.0) return 0.0;
    return charging.unit_price(need);
}

double beckmann_potential(const RoadNetwork& net, const FlowAssignment& flows, const ClassParams& params,
                          const ChargingModel& charging, IntegralMethod method) {
    check_feasible(net, flows, params);
    double congestion = 0.0;
    double tolls = 0.0;
    for (std::size_t a = 0; a < net.arc_count(); ++a) {
        congestion += travel_time_integral(net.arcs()[a], std::max(flows.total(a), 0.0));
        for (VehicleClass c : kAllClasses) tolls += net.toll(a, c) * flows.of(a, c);
    }
    const double need_e = std::max(total_class_energy(net, flows, VehicleClass::Electric, params), 0.0);
    const double need_g = total_class_energy(net, flows, VehicleClass::Gasoline, params);
    const double electric = method == IntegralMethod::ClosedForm ? charging.price_integral(need_e)
                                                                 : price_integral_quadrature(charging, need_e);
    return params.tau * congestion + tolls + (electric + params.lambda_g * need_g) / params.fleet_scale;
}

double beckmann_potential(const RoadNetwork& net, const FlowAssignment& flows, const ClassParams& params,
                          const ChargingScenario& sc, IntegralMethod method) {
    return beckmann_potential(net, flows, params, ChargingModel(sc), method);
}

std::vector<ClassPair> beckmann_gradient(const RoadNetwork& net, const FlowAssignment& flows,
                                         const ClassParams& params, const ChargingModel& charging) {
    check_feasible(net, flows, params);
    const double price =
        equilibrium_unit_price(charging, total_class_energy(net, flows, VehicleClass::Electric, params));
    std::vector<ClassPair> grad(net.arc_count());
    for (std::size_t a = 0; a < net.arc_count(); ++a)
        for (VehicleClass c : kAllClasses)
            grad[a][index(c)] = arc_generalized_cost(net.arcs()[a], std::max(flows.total(a), 0.0), c, params,
                                                     price, net.toll(a, c));
    return grad;
}

std::vector<ClassPair> beckmann_gradient(const RoadNetwork& net, const FlowAssignment& flows,
                                         const ClassParams& params, const ChargingScenario& sc) {
    return beckmann_gradient(net, flows, params, ChargingModel(sc));
}

EquilibriumResult solve_equilibrium(const RoadNetwork& net, const ClassParams& params,
                                    const ChargingScenario& sc, const EquilibriumConfig& cfg,
                                    const std::vector<PathFlow>* start) {
    params.validate();
    if (!(cfg.gap_tolerance > 0.0 && cfg.line_search_tolerance > 0.0 && cfg.wardrop_epsilon > 0.0))
        throw InputError("solver tolerances must be > 0");
    const ChargingModel model(sc);
    const PriceMonotonicity mono = is_price_increasing(sc);

    Solver solver(net, params, model, cfg);
    if (start)
        solver.load(*start);
    else
        solver.all_or_nothing();

    EquilibriumResult result;
    result.unique_regime = mono.increasing;
    if (!mono.increasing)
        result.warnings.push_back("unit price is not increasing (ratio " + std::to_string(mono.ratio) +
                                  "); the equilibrium may not be unique, consider multiple starts");

    auto relative = [](double gap, double potential) {
        return potential > 0.0 ? gap / potential : gap;
    };
    double potential = solver.potential();
    double gap = solver.gap();
    if (cfg.record_potential) result.potential_history.push_back(potential);
    std::size_t it = 0;
    while (relative(gap, potential) > cfg.gap_tolerance && it < cfg.max_iterations) {
        if (!solver.sweep()) result.local_only = true;
        ++it;
        potential = solver.potential();
        gap = solver.gap();
        if (cfg.record_potential) result.potential_history.push_back(potential);
    }

    result.flows = solver.assignment();
    result.charging_need = solver.need();
    result.unit_price = equilibrium_unit_price(model, solver.need());
    result.potential = potential;
    result.relative_gap = relative(gap, potential);
    result.iterations = it;
    result.converged = result.relative_gap <= cfg.gap_tolerance;
    if (result.local_only)
        result.warnings.push_back("non-monotone line search encountered; result is a local minimum");
    const WardropCheck check = verify_wardrop(net, result.flows, params, sc, cfg.wardrop_epsilon);
    result.wardrop_residual = check.residual;
    result.certified = check.certified;
    if (!result.converged)
        throw ConvergenceError("equilibrium solver stopped after " + std::to_string(it) +
                                   " iterations with relative gap " + std::to_string(result.relative_gap),
                               std::move(result));
    return result;
}

WardropCheck verify_wardrop(const RoadNetwork& net, const FlowAssignment& flows, const ClassParams& params,
                            const ChargingScenario& sc, double epsilon) {
    check_feasible(net, flows, params);
    const ChargingModel model(sc);
    const double price =
        equilibrium_unit_price(model, total_class_energy(net, flows, VehicleClass::Electric, params));
    double residual = 0.0;
    for (VehicleClass c : kAllClasses) {
        const std::vector<double> cost = class_arc_costs(net, flows, params, c, price);
        if (!flows.paths.empty()) {
            for (std::size_t k = 0; k < net.od_pairs().size(); ++k) {
                if (class_demand(net, params, c, k) <= 0.0) continue;
                const double best = shortest_path(net, k, cost).cost;
                double weighted = 0.0;
                double used = 0.0;
                for (const PathFlow& pf : flows.paths) {
                    const double f = pf.flow[index(c)];
                    if (pf.path.od != k || f < 1e-9) continue;
                    weighted += f * route_cost(pf.path, cost);
                    used += f;
                }
                if (used > 0.0) residual = std::max(residual, (weighted / used - best) / best);
            }
        } else {
            double spent = 0.0;
            double best = 0.0;
            for (std::size_t a = 0; a < net.arc_count(); ++a) spent += flows.of(a, c) * cost[a];
            for (std::size_t k = 0; k < net.od_pairs().size(); ++k) {
                const double d = class_demand(net, params, c, k);
                if (d > 0.0) best += d * shortest_path(net, k, cost).cost;
            }
            if (best > 0.0) residual = std::max(residual, (spent - best) / best);
        }
    }
    return {residual, residual <= epsilon};
}

FlowAssignment enumerate_parallel_equilibrium(const RoadNetwork& net, const ClassParams& params,
                                              const ChargingScenario& sc, std::size_t grid_resolution,
                                              std::uint64_t seed) {
    params.validate();
    const std::size_t m = net.arc_count();
    if (net.nodes().size() != 2 || net.od_pairs().size() != 1 || m == 0 || m > 4)
        throw InputError("brute-force oracle needs a two-node network with 1 to 4 parallel arcs");
    for (std::size_t a = 0; a < m; ++a)
        if (net.tail_index(a) != net.origin_index(0) || net.head_index(a) != net.destination_index(0))
            throw InputError("brute-force oracle: arc '" + net.arcs()[a].id + "' is not parallel");
    if (grid_resolution < 1) throw InputError("brute-force oracle: grid resolution must be >= 1");

    const ChargingModel model(sc);
    const double share_e = params.x_e;
    const double share_g = params.x_g();

    // Potential of a split, written out directly for the parallel topology.
    auto potential = [&](const std::array<double, 4>& e, const std::array<double, 4>& g) {
        double value = 0.0;
        double dist_e = 0.0;
        double dist_g = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            const Arc& arc = net.arcs()[a];
            value += params.tau * travel_time_integral(arc, e[a] + g[a]) +
                     net.toll(a, VehicleClass::Electric) * e[a] + net.toll(a, VehicleClass::Gasoline) * g[a];
            dist_e += arc.length_km * e[a];
            dist_g += arc.length_km * g[a];
        }
        const double need = params.m_e * params.fleet_scale * dist_e;
        return value + model.price_integral(need) / params.fleet_scale + params.lambda_g * params.m_g * dist_g;
    };

    // Integer compositions of `total` into m parts.
    auto compositions = [&](std::size_t total) {
        std::vector<std::array<std::size_t, 4>> out;
        std::array<std::size_t, 4> c{};
        std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t pos, std::size_t left) {
            if (pos + 1 == m) {
                c[pos] = left;
                out.push_back(c);
                return;
            }
            for (std::size_t v = 0; v <= left; ++v) {
                c[pos] = v;
                rec(pos + 1, left - v);
            }
        };
        rec(0, total);
        return out;
    };

    std::size_t res = grid_resolution;
    auto count = [&](std::size_t g) {
        double c = 1.0;
        for (std::size_t i = 1; i < m; ++i) c *= static_cast<double>(g + i) / static_cast<double>(i);
        return c;
    };
    while (res > 1 && count(res) * count(res) > 4e6) --res;

    std::array<double, 4> best_e{};
    std::array<double, 4> best_g{};
    if (seed == 0) {
        const auto grid = compositions(res);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& ce : grid)
            for (const auto& cg : grid) {
                std::array<double, 4> e{};
                std::array<double, 4> g{};
                for (std::size_t a = 0; a < m; ++a) {
                    e[a] = share_e * static_cast<double>(ce[a]) / static_cast<double>(res);
                    g[a] = share_g * static_cast<double>(cg[a]) / static_cast<double>(res);
                }
                const double v = potential(e, g);
                if (v < best) {
                    best = v;
                    best_e = e;
                    best_g = g;
                }
            }
    } else {
        std::mt19937_64 rng(seed);
        std::exponential_distribution<double> expo(1.0);
        for (auto* split : {&best_e, &best_g}) {
            double sum = 0.0;
            for (std::size_t a = 0; a < m; ++a) sum += ((*split)[a] = expo(rng));
            const double share = split == &best_e ? share_e : share_g;
            for (std::size_t a = 0; a < m; ++a) (*split)[a] *= share / sum;
        }
    }

    // Pairwise transfer search with a shrinking step.
    double value = potential(best_e, best_g);
    double step = 1.0 / static_cast<double>(res);
    while (step > 1e-13) {
        bool improved = false;
        for (auto* split : {&best_e, &best_g})
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                    if (i == j) continue;
                    const double move = std::min(step, (*split)[i]);
                    if (move <= 0.0) continue;
                    (*split)[i] -= move;
                    (*split)[j] += move;
                    const double v = potential(best_e, best_g);
                    if (v < value) {
                        value = v;
                        improved = true;
                    } else {
                        (*split)[i] += move;
                        (*split)[j] -= move;
                    }
                }
        if (!improved) step *= 0.5;
    }

    std::vector<PathFlow> routes;
    for (std::size_t a = 0; a < m; ++a) routes.push_back({Path{0, {a}}, ClassPair{best_e[a], best_g[a]}});
    return arc_flows_from_path_flows(net, std::move(routes));
}

}  // namespace evw
