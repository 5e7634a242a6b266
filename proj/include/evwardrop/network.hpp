#pragma once

// Road network, demand and generalized driving costs.
//
// Units: time in hours, distance in km, energy in kWh (EV) or litres (GV),
// money in euro. Flows are normalized: demands of all O-D pairs sum to one.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace evw {

enum class VehicleClass : std::size_t { Electric = 0, Gasoline = 1 };

inline constexpr std::array<VehicleClass, 2> kAllClasses{VehicleClass::Electric,
                                                         VehicleClass::Gasoline};

constexpr std::size_t index(VehicleClass c) { return static_cast<std::size_t>(c); }

/// "ev" / "gv", as used in files and CSV output.
const char* class_tag(VehicleClass c);
VehicleClass parse_class_tag(const std::string& tag);

/// One value per vehicle class, indexed by `index(VehicleClass)`.
using ClassPair = std::array<double, 2>;

struct Arc {
    std::string id;
    std::string tail;
    std::string head;
    double length_km = 0.0;
    double capacity = 0.0;
    double free_flow_speed = 0.0;  // km/h
    double bpr_alpha = 2.0;
    double bpr_beta = 4.0;

    double free_flow_time() const { return length_km / free_flow_speed; }
};

struct ODPair {
    std::string origin;
    std::string destination;
    double demand = 0.0;
};

/// A route of one O-D pair as a sequence of arc indices.
struct Path {
    std::size_t od = 0;
    std::vector<std::size_t> arcs;
};

struct Toll {
    std::string arc_id;
    VehicleClass cls = VehicleClass::Gasoline;
    double euro = 0.0;
};

/// Immutable transportation graph with demands and per-class tolls.
class RoadNetwork {
public:
    /// Validates every invariant; throws InputError naming the offending item.
    /// `paths`, when given, declares the route set; otherwise routes are
    /// enumerated on demand by `paths()`.
    RoadNetwork(std::vector<std::string> nodes, std::vector<Arc> arcs,
                std::vector<ODPair> od_pairs, std::vector<Toll> tolls = {},
                std::vector<Path> paths = {});

    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::vector<Arc>& arcs() const { return arcs_; }
    const std::vector<ODPair>& od_pairs() const { return od_pairs_; }
    std::size_t arc_count() const { return arcs_.size(); }

    std::size_t arc_index(const std::string& id) const;
    std::size_t node_index(const std::string& id) const;
    std::size_t origin_index(std::size_t od) const { return od_nodes_[od].first; }
    std::size_t destination_index(std::size_t od) const { return od_nodes_[od].second; }

    /// Outgoing arc indices of a node, in declaration order.
    const std::vector<std::size_t>& out_arcs(std::size_t node) const { return out_[node]; }
    std::size_t tail_index(std::size_t arc) const { return arc_ends_[arc].first; }
    std::size_t head_index(std::size_t arc) const { return arc_ends_[arc].second; }
    /// Position of the arc id in lexicographic order of all arc ids.
    std::size_t arc_id_rank(std::size_t arc) const { return arc_rank_[arc]; }

    double toll(std::size_t arc, VehicleClass cls) const { return tolls_[arc][index(cls)]; }
    std::vector<Toll> toll_list() const;

    /// Copy of this network with one toll replaced.
    RoadNetwork with_toll(std::size_t arc, VehicleClass cls, double euro) const;

    /// Declared routes, or all simple routes of every O-D pair when none were
    /// declared. Throws InputError when more than `limit` routes exist.
    std::vector<Path> paths(std::size_t limit = 10000) const;
    bool has_declared_paths() const { return !declared_paths_.empty(); }

    /// Stable route identifier: arc ids joined by '/'.
    std::string path_id(const Path& p) const;
    /// Inverse of path_id for a given O-D pair; throws InputError when the id
    /// does not name a route of this network.
    Path resolve_path(const std::string& id) const;

    double path_length(const Path& p) const;
    void validate_path(const Path& p) const;

private:
    std::vector<std::string> nodes_;
    std::vector<Arc> arcs_;
    std::vector<ODPair> od_pairs_;
    std::vector<ClassPair> tolls_;
    std::vector<Path> declared_paths_;

    std::map<std::string, std::size_t> node_lookup_;
    std::map<std::string, std::size_t> arc_lookup_;
    std::vector<std::pair<std::size_t, std::size_t>> arc_ends_;
    std::vector<std::pair<std::size_t, std::size_t>> od_nodes_;
    std::vector<std::vector<std::size_t>> out_;
    std::vector<std::size_t> arc_rank_;
};

struct ClassParams {
    double x_e = 0.5;        // EV share of the fleet
    double m_e = 0.2;        // kWh/km
    double m_g = 0.06;       // L/km
    double lambda_g = 1.5;   // euro/L
    double tau = 10.0;       // euro/h
    double fleet_scale = 1.0;

    double x_g() const { return 1.0 - x_e; }
    double share(VehicleClass c) const { return c == VehicleClass::Electric ? x_e : x_g(); }
    double consumption(VehicleClass c) const { return c == VehicleClass::Electric ? m_e : m_g; }

    /// Throws InputError on out-of-range fields.
    void validate() const;
};

/// Arc flows per class, plus the route flows they came from when known.
struct PathFlow {
    Path path;
    ClassPair flow{0.0, 0.0};
};

struct FlowAssignment {
    std::vector<ClassPair> arc;  // indexed by arc
    std::vector<PathFlow> paths;

    FlowAssignment() = default;
    explicit FlowAssignment(std::size_t arc_count) : arc(arc_count, ClassPair{0.0, 0.0}) {}

    double total(std::size_t a) const { return arc[a][0] + arc[a][1]; }
    double of(std::size_t a, VehicleClass c) const { return arc[a][index(c)]; }
};

/// Route flows keyed by route id (see RoadNetwork::path_id).
using PathFlowMap = std::map<std::string, ClassPair>;

// --- operations -----------------------------------------------------------

/// Aggregates route flows onto arcs. Throws InputError on negative flows or
/// unknown route ids.
FlowAssignment arc_flows_from_path_flows(const RoadNetwork& net, const PathFlowMap& f);
FlowAssignment arc_flows_from_path_flows(const RoadNetwork& net, std::vector<PathFlow> f);

/// BPR congestion delay d0 * (1 + alpha * (x / C)^beta), in hours.
double travel_time(const Arc& arc, double x);
/// d/dx of travel_time.
double travel_time_derivative(const Arc& arc, double x);
/// Integral of travel_time from 0 to x.
double travel_time_integral(const Arc& arc, double x);

/// tau * d(x) + toll + length * m_s * lambda_s, in euro.
double arc_generalized_cost(const Arc& arc, double x, VehicleClass cls, const ClassParams& params,
                            double unit_price_e, double toll = 0.0);

double path_cost(const RoadNetwork& net, const Path& path, const FlowAssignment& flows,
                 VehicleClass cls, const ClassParams& params, double unit_price_e);

/// m_s * fleet_scale * sum_a x_{a,s} * l_a. For EVs this is the charging need
/// handed to the aggregator.
double total_class_energy(const RoadNetwork& net, const FlowAssignment& flows, VehicleClass cls,
                          const ClassParams& params);

struct ShortestPath {
    Path path;
    double cost = 0.0;
};

/// Minimum-cost route; among equal-cost routes (relative slack 1e-12) the
/// lexicographically smallest arc-id sequence wins. Throws InputError on
/// negative costs or when the destination is unreachable.
ShortestPath shortest_path(const RoadNetwork& net, std::size_t od, std::span<const double> arc_cost);

/// Two nodes "O" and "D" joined by one arc per entry; arcs are named a, b, c...
RoadNetwork build_parallel_network(const std::vector<double>& lengths,
                                   const std::vector<double>& speeds,
                                   const std::vector<double>& capacities, double alpha = 2.0,
                                   double beta = 4.0);
/// City crossing (30 km at 50 km/h, C = 1/2) and two ring roads
/// (15*pi km at 70 km/h, C = 1 and 1/2).
RoadNetwork build_parallel_network();

/// fleet_scale such that the largest feasible EV charging need equals
/// `fraction` of the total nonflexible energy `nonflexible_total_kwh`.
double fleet_scale_for_energy_share(const RoadNetwork& net, const ClassParams& params,
                                    double nonflexible_total_kwh, double fraction);

}  // namespace evw
