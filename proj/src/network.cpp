#include "evwardrop/network.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "evwardrop/errors.hpp"

namespace evw {

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

std::string join_ids(const RoadNetwork& net, const std::vector<std::size_t>& arcs) {
    std::string out;
    for (std::size_t i = 0; i < arcs.size(); ++i) {
        if (i) out += '/';
        out += net.arcs()[arcs[i]].id;
    }
    return out;
}

}  // namespace

const char* class_tag(VehicleClass c) { return c == VehicleClass::Electric ? "ev" : "gv"; }

VehicleClass parse_class_tag(const std::string& tag) {
    if (tag == "ev") return VehicleClass::Electric;
    if (tag == "gv") return VehicleClass::Gasoline;
    throw InputError("unknown vehicle class '" + tag + "' (expected \"ev\" or \"gv\")");
}

RoadNetwork::RoadNetwork(std::vector<std::string> nodes, std::vector<Arc> arcs,
                         std::vector<ODPair> od_pairs, std::vector<Toll> tolls,
                         std::vector<Path> paths)
    : nodes_(std::move(nodes)),
      arcs_(std::move(arcs)),
      od_pairs_(std::move(od_pairs)),
      declared_paths_(std::move(paths)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].empty()) throw InputError("node " + std::to_string(i) + ": empty id");
        if (!node_lookup_.emplace(nodes_[i], i).second)
            throw InputError("duplicate node id '" + nodes_[i] + "'");
    }
    out_.resize(nodes_.size());
    for (std::size_t a = 0; a < arcs_.size(); ++a) {
        const Arc& arc = arcs_[a];
        const std::string where = "arc '" + arc.id + "': ";
        if (arc.id.empty()) throw InputError("arc " + std::to_string(a) + ": empty id");
        if (arc.id.find('/') != std::string::npos) throw InputError(where + "id must not contain '/'");
        if (!arc_lookup_.emplace(arc.id, a).second) throw InputError("duplicate arc id '" + arc.id + "'");
        auto t = node_lookup_.find(arc.tail);
        auto h = node_lookup_.find(arc.head);
        if (t == node_lookup_.end()) throw InputError(where + "unknown tail node '" + arc.tail + "'");
        if (h == node_lookup_.end()) throw InputError(where + "unknown head node '" + arc.head + "'");
        if (!positive_finite(arc.length_km)) throw InputError(where + "length_km must be > 0");
        if (!positive_finite(arc.capacity)) throw InputError(where + "capacity must be > 0");
        if (!positive_finite(arc.free_flow_speed)) throw InputError(where + "speed must be > 0");
        if (!positive_finite(arc.bpr_alpha)) throw InputError(where + "alpha must be > 0");
        if (!(std::isfinite(arc.bpr_beta) && arc.bpr_beta > 1.0))
            throw InputError(where + "beta must be > 1");
        if (!positive_finite(arc.free_flow_time()))
            throw InputError(where + "free-flow time is not finite and positive");
        arc_ends_.emplace_back(t->second, h->second);
        out_[t->second].push_back(a);
    }

    std::vector<std::size_t> order(arcs_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return arcs_[x].id < arcs_[y].id; });
    arc_rank_.resize(arcs_.size());
    for (std::size_t r = 0; r < order.size(); ++r) arc_rank_[order[r]] = r;

    if (od_pairs_.empty()) throw InputError("network has no O-D pairs");
    double demand_sum = 0.0;
    std::set<std::pair<std::size_t, std::size_t>> seen_od;
    for (std::size_t k = 0; k < od_pairs_.size(); ++k) {
        const ODPair& od = od_pairs_[k];
        const std::string where = "od_pair " + std::to_string(k) + ": ";
        auto o = node_lookup_.find(od.origin);
        auto d = node_lookup_.find(od.destination);
        if (o == node_lookup_.end()) throw InputError(where + "unknown origin '" + od.origin + "'");
        if (d == node_lookup_.end())
            throw InputError(where + "unknown destination '" + od.destination + "'");
        if (o->second == d->second) throw InputError(where + "origin equals destination");
        if (!(std::isfinite(od.demand) && od.demand >= 0.0)) throw InputError(where + "demand must be >= 0");
        if (!seen_od.emplace(o->second, d->second).second) throw InputError(where + "duplicate O-D pair");
        od_nodes_.emplace_back(o->second, d->second);
        demand_sum += od.demand;
    }
    if (std::abs(demand_sum - 1.0) > 1e-9)
        throw InputError("O-D demands must sum to 1 (got " + std::to_string(demand_sum) + ")");

    for (std::size_t k = 0; k < od_pairs_.size(); ++k) {
        std::vector<char> reached(nodes_.size(), 0);
        std::vector<std::size_t> stack{od_nodes_[k].first};
        reached[od_nodes_[k].first] = 1;
        while (!stack.empty()) {
            std::size_t u = stack.back();
            stack.pop_back();
            for (std::size_t a : out_[u]) {
                std::size_t v = arc_ends_[a].second;
                if (!reached[v]) {
                    reached[v] = 1;
                    stack.push_back(v);
                }
            }
        }
        if (!reached[od_nodes_[k].second])
            throw InputError("od_pair " + std::to_string(k) + ": destination '" +
                             od_pairs_[k].destination + "' unreachable from '" + od_pairs_[k].origin + "'");
    }

    tolls_.assign(arcs_.size(), ClassPair{0.0, 0.0});
    std::set<std::pair<std::size_t, std::size_t>> seen_toll;
    for (const Toll& t : tolls) {
        auto it = arc_lookup_.find(t.arc_id);
        if (it == arc_lookup_.end()) throw InputError("toll on unknown arc '" + t.arc_id + "'");
        if (!(std::isfinite(t.euro) && t.euro >= 0.0))
            throw InputError("toll on arc '" + t.arc_id + "' must be >= 0");
        if (!seen_toll.emplace(it->second, index(t.cls)).second)
            throw InputError("duplicate toll for arc '" + t.arc_id + "', class " + class_tag(t.cls));
        tolls_[it->second][index(t.cls)] = t.euro;
    }

    for (const Path& p : declared_paths_) validate_path(p);
}

std::size_t RoadNetwork::arc_index(const std::string& id) const {
    auto it = arc_lookup_.find(id);
    if (it == arc_lookup_.end()) throw InputError("unknown arc '" + id + "'");
    return it->second;
}

std::size_t RoadNetwork::node_index(const std::string& id) const {
    auto it = node_lookup_.find(id);
    if (it == node_lookup_.end()) throw InputError("unknown node '" + id + "'");
    return it->second;
}

std::vector<Toll> RoadNetwork::toll_list() const {
    std::vector<Toll> out;
    for (std::size_t a = 0; a < arcs_.size(); ++a)
        for (VehicleClass c : kAllClasses)
            if (tolls_[a][index(c)] != 0.0) out.push_back({arcs_[a].id, c, tolls_[a][index(c)]});
    return out;
}

RoadNetwork RoadNetwork::with_toll(std::size_t arc, VehicleClass cls, double euro) const {
    if (arc >= arcs_.size()) throw InputError("toll arc index out of range");
    if (!(std::isfinite(euro) && euro >= 0.0)) throw InputError("toll must be >= 0");
    RoadNetwork copy = *this;
    copy.tolls_[arc][index(cls)] = euro;
    return copy;
}

void RoadNetwork::validate_path(const Path& p) const {
    if (p.od >= od_pairs_.size()) throw InputError("path refers to unknown O-D pair");
    if (p.arcs.empty()) throw InputError("empty path");
    std::size_t at = od_nodes_[p.od].first;
    std::set<std::size_t> visited{at};
    for (std::size_t a : p.arcs) {
        if (a >= arcs_.size()) throw InputError("path arc index out of range");
        if (arc_ends_[a].first != at)
            throw InputError("path '" + join_ids(*this, p.arcs) + "' is not contiguous");
        at = arc_ends_[a].second;
        if (!visited.insert(at).second)
            throw InputError("path '" + join_ids(*this, p.arcs) + "' revisits a node");
    }
    if (at != od_nodes_[p.od].second)
        throw InputError("path '" + join_ids(*this, p.arcs) + "' does not end at its destination");
}

std::vector<Path> RoadNetwork::paths(std::size_t limit) const {
    if (!declared_paths_.empty()) return declared_paths_;
    std::vector<Path> out;
    for (std::size_t k = 0; k < od_pairs_.size(); ++k) {
        const std::size_t dest = od_nodes_[k].second;
        std::vector<char> on_stack(nodes_.size(), 0);
        std::vector<std::size_t> current;
        std::function<void(std::size_t)> dfs = [&](std::size_t u) {
            if (u == dest) {
                if (out.size() >= limit)
                    throw InputError("more than " + std::to_string(limit) +
                                     " routes; path enumeration needs a small acyclic network");
                out.push_back({k, current});
                return;
            }
            on_stack[u] = 1;
            for (std::size_t a : out_[u]) {
                std::size_t v = arc_ends_[a].second;
                if (on_stack[v]) continue;
                current.push_back(a);
                dfs(v);
                current.pop_back();
            }
            on_stack[u] = 0;
        };
        dfs(od_nodes_[k].first);
    }
    return out;
}

std::string RoadNetwork::path_id(const Path& p) const { return join_ids(*this, p.arcs); }

Path RoadNetwork::resolve_path(const std::string& id) const {
    Path p;
    std::stringstream ss(id);
    std::string part;
    while (std::getline(ss, part, '/')) {
        auto it = arc_lookup_.find(part);
        if (it == arc_lookup_.end()) throw InputError("unknown path '" + id + "': no arc '" + part + "'");
        p.arcs.push_back(it->second);
    }
    if (p.arcs.empty()) throw InputError("empty path id");
    const std::size_t from = arc_ends_[p.arcs.front()].first;
    const std::size_t to = arc_ends_[p.arcs.back()].second;
    auto od = std::find(od_nodes_.begin(), od_nodes_.end(), std::make_pair(from, to));
    if (od == od_nodes_.end()) throw InputError("unknown path '" + id + "': no matching O-D pair");
    p.od = static_cast<std::size_t>(od - od_nodes_.begin());
    validate_path(p);
    if (!declared_paths_.empty() &&
        std::none_of(declared_paths_.begin(), declared_paths_.end(),
                     [&](const Path& q) { return q.od == p.od && q.arcs == p.arcs; }))
        throw InputError("unknown path '" + id + "': not a declared route");
    return p;
}

double RoadNetwork::path_length(const Path& p) const {
    double len = 0.0;
    for (std::size_t a : p.arcs) len += arcs_[a].length_km;
    return len;
}

void ClassParams::validate() const {
    if (!(x_e >= 0.0 && x_e <= 1.0)) throw InputError("class_params.x_e must lie in [0, 1]");
    if (!positive_finite(m_e)) throw InputError("class_params.m_e must be > 0");
    if (!positive_finite(m_g)) throw InputError("class_params.m_g must be > 0");
    if (!positive_finite(lambda_g)) throw InputError("class_params.lambda_g must be > 0");
    if (!positive_finite(tau)) throw InputError("class_params.tau must be > 0");
    if (!positive_finite(fleet_scale)) throw InputError("class_params.fleet_scale must be > 0");
}

FlowAssignment arc_flows_from_path_flows(const RoadNetwork& net, std::vector<PathFlow> f) {
    FlowAssignment out(net.arc_count());
    for (const PathFlow& pf : f) {
        net.validate_path(pf.path);
        for (VehicleClass c : kAllClasses) {
            const double v = pf.flow[index(c)];
            if (!(std::isfinite(v) && v >= 0.0))
                throw InputError("negative flow on path '" + net.path_id(pf.path) + "'");
            for (std::size_t a : pf.path.arcs) out.arc[a][index(c)] += v;
        }
    }
    out.paths = std::move(f);
    return out;
}

FlowAssignment arc_flows_from_path_flows(const RoadNetwork& net, const PathFlowMap& f) {
    std::vector<PathFlow> flows;
    flows.reserve(f.size());
    for (const auto& [id, value] : f) flows.push_back({net.resolve_path(id), value});
    return arc_flows_from_path_flows(net, std::move(flows));
}

double travel_time(const Arc& arc, double x) {
    if (!(x >= 0.0)) throw InputError("travel_time: negative flow on arc '" + arc.id + "'");
    return arc.free_flow_time() * (1.0 + arc.bpr_alpha * std::pow(x / arc.capacity, arc.bpr_beta));
}

double travel_time_derivative(const Arc& arc, double x) {
    if (!(x >= 0.0)) throw InputError("travel_time: negative flow on arc '" + arc.id + "'");
    return arc.free_flow_time() * arc.bpr_alpha * arc.bpr_beta *
           std::pow(x / arc.capacity, arc.bpr_beta - 1.0) / arc.capacity;
}

double travel_time_integral(const Arc& arc, double x) {
    if (!(x >= 0.0)) throw InputError("travel_time: negative flow on arc '" + arc.id + "'");
    const double b1 = arc.bpr_beta + 1.0;
    return arc.free_flow_time() *
           (x + arc.bpr_alpha * x * std::pow(x / arc.capacity, arc.bpr_beta) / b1);
}

double arc_generalized_cost(const Arc& arc, double x, VehicleClass cls, const ClassParams& params,
                            double unit_price_e, double toll) {
    if (!(unit_price_e >= 0.0)) throw InputError("unit price must be >= 0");
    const double unit_price = cls == VehicleClass::Electric ? unit_price_e : params.lambda_g;
    return params.tau * travel_time(arc, x) + toll +
           arc.length_km * params.consumption(cls) * unit_price;
}

double path_cost(const RoadNetwork& net, const Path& path, const FlowAssignment& flows,
                 VehicleClass cls, const ClassParams& params, double unit_price_e) {
    net.validate_path(path);
    double cost = 0.0;
    for (std::size_t a : path.arcs)
        cost += arc_generalized_cost(net.arcs()[a], flows.total(a), cls, params, unit_price_e,
                                     net.toll(a, cls));
    return cost;
}

double total_class_energy(const RoadNetwork& net, const FlowAssignment& flows, VehicleClass cls,
                          const ClassParams& params) {
    double distance = 0.0;
    for (std::size_t a = 0; a < net.arc_count(); ++a)
        distance += flows.of(a, cls) * net.arcs()[a].length_km;
    return params.consumption(cls) * params.fleet_scale * distance;
}

ShortestPath shortest_path(const RoadNetwork& net, std::size_t od, std::span<const double> arc_cost) {
    if (arc_cost.size() != net.arc_count()) throw InputError("shortest_path: cost vector size mismatch");
    for (double c : arc_cost)
        if (!(std::isfinite(c) && c >= 0.0)) throw InputError("shortest_path: arc costs must be >= 0");
    if (od >= net.od_pairs().size()) throw InputError("shortest_path: unknown O-D pair");

    const std::size_t n = net.nodes().size();
    const std::size_t origin = net.origin_index(od);
    const std::size_t dest = net.destination_index(od);
    constexpr double inf = std::numeric_limits<double>::infinity();

    std::vector<double> dist(n, inf);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[origin] = 0.0;
    heap.emplace(0.0, origin);
    while (!heap.empty()) {
        auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        for (std::size_t a : net.out_arcs(u)) {
            std::size_t v = net.head_index(a);
            double nd = d + arc_cost[a];
            if (nd < dist[v]) {
                dist[v] = nd;
                heap.emplace(nd, v);
            }
        }
    }
    if (!std::isfinite(dist[dest]))
        throw InputError("shortest_path: destination '" + net.od_pairs()[od].destination + "' unreachable");

    auto tight = [&](std::size_t a) {
        const std::size_t u = net.tail_index(a);
        const std::size_t v = net.head_index(a);
        if (!std::isfinite(dist[u])) return false;
        return dist[u] + arc_cost[a] <= dist[v] + 1e-12 * std::max(1.0, std::abs(dist[v]));
    };

    // Nodes that reach the destination through tight arcs only.
    std::vector<std::vector<std::size_t>> tight_in(n);
    for (std::size_t a = 0; a < net.arc_count(); ++a)
        if (tight(a)) tight_in[net.head_index(a)].push_back(a);
    std::vector<char> reaches(n, 0);
    std::vector<std::size_t> stack{dest};
    reaches[dest] = 1;
    while (!stack.empty()) {
        std::size_t v = stack.back();
        stack.pop_back();
        for (std::size_t a : tight_in[v]) {
            std::size_t u = net.tail_index(a);
            if (!reaches[u]) {
                reaches[u] = 1;
                stack.push_back(u);
            }
        }
    }

    // Depth-first walk in arc-id order: the first complete route found is the
    // lexicographically smallest among minimum-cost routes.
    std::vector<char> visited(n, 0);
    std::vector<std::size_t> route;
    std::function<bool(std::size_t)> walk = [&](std::size_t u) {
        if (u == dest) return true;
        visited[u] = 1;
        std::vector<std::size_t> cand;
        for (std::size_t a : net.out_arcs(u))
            if (tight(a) && reaches[net.head_index(a)] && !visited[net.head_index(a)]) cand.push_back(a);
        std::sort(cand.begin(), cand.end(),
                  [&](std::size_t x, std::size_t y) { return net.arc_id_rank(x) < net.arc_id_rank(y); });
        for (std::size_t a : cand) {
            route.push_back(a);
            if (walk(net.head_index(a))) return true;
            route.pop_back();
        }
        return false;
    };
    walk(origin);

    ShortestPath out;
    out.path = {od, route};
    double cost = 0.0;
    for (std::size_t a : route) cost += arc_cost[a];
    out.cost = cost;
    return out;
}

RoadNetwork build_parallel_network(const std::vector<double>& lengths,
                                   const std::vector<double>& speeds,
                                   const std::vector<double>& capacities, double alpha, double beta) {
    if (lengths.size() != speeds.size() || lengths.size() != capacities.size())
        throw InputError("build_parallel_network: lengths, speeds and capacities differ in size");
    if (lengths.empty() || lengths.size() > 26)
        throw InputError("build_parallel_network: between 1 and 26 arcs required");
    std::vector<Arc> arcs;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        Arc a;
        a.id = std::string(1, static_cast<char>('a' + i));
        a.tail = "O";
        a.head = "D";
        a.length_km = lengths[i];
        a.free_flow_speed = speeds[i];
        a.capacity = capacities[i];
        a.bpr_alpha = alpha;
        a.bpr_beta = beta;
        arcs.push_back(a);
    }
    return RoadNetwork({"O", "D"}, std::move(arcs), {{"O", "D", 1.0}});
}

RoadNetwork build_parallel_network() {
    const double ring = std::numbers::pi / 2.0 * 30.0;
    return build_parallel_network({30.0, ring, ring}, {50.0, 70.0, 70.0}, {0.5, 1.0, 0.5});
}

double fleet_scale_for_energy_share(const RoadNetwork& net, const ClassParams& params,
                                    double nonflexible_total_kwh, double fraction) {
    if (!positive_finite(nonflexible_total_kwh)) throw InputError("nonflexible energy must be > 0");
    if (!positive_finite(fraction)) throw InputError("energy share must be > 0");
    if (!(params.x_e > 0.0)) throw InputError("fleet scale undefined without EVs");
    std::vector<double> longest(net.od_pairs().size(), 0.0);
    for (const Path& p : net.paths()) longest[p.od] = std::max(longest[p.od], net.path_length(p));
    double max_distance = 0.0;
    for (std::size_t k = 0; k < longest.size(); ++k)
        max_distance += net.od_pairs()[k].demand * longest[k];
    const double max_need = params.m_e * params.x_e * max_distance;
    return fraction * nonflexible_total_kwh / max_need;
}

}  // namespace evw
