#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "evwardrop/errors.hpp"
#include "evwardrop/network.hpp"

using namespace evw;

namespace {

RoadNetwork diamond() {
    // O -> A -> D and O -> B -> D plus a cross arc A -> B.
    std::vector<Arc> arcs{
        {"oa", "O", "A", 10, 1, 50}, {"ob", "O", "B", 12, 1, 60}, {"ad", "A", "D", 10, 1, 50},
        {"bd", "B", "D", 8, 1, 40},  {"ab", "A", "B", 1, 1, 50},
    };
    return RoadNetwork({"O", "A", "B", "D"}, arcs, {{"O", "D", 1.0}});
}

}  // namespace

TEST(ParallelNetwork, Defaults) {
    const RoadNetwork net = build_parallel_network();
    ASSERT_EQ(net.arc_count(), 3u);
    EXPECT_EQ(net.arcs()[0].id, "a");
    EXPECT_NEAR(net.arcs()[0].free_flow_time(), 0.6, 1e-15);
    EXPECT_NEAR(net.arcs()[1].free_flow_time(), std::numbers::pi / 2.0 * 30.0 / 70.0, 1e-15);
    EXPECT_NEAR(net.arcs()[2].free_flow_time(), 0.6732, 1e-4);
    EXPECT_EQ(net.arcs()[1].capacity, 1.0);
    EXPECT_EQ(net.arcs()[2].capacity, 0.5);
    EXPECT_EQ(net.od_pairs().size(), 1u);
}

TEST(ParallelNetwork, TwoArcsAndBadSizes) {
    const RoadNetwork pigou = build_parallel_network({10, 10}, {50, 50}, {1, 1});
    EXPECT_EQ(pigou.arc_count(), 2u);
    EXPECT_THROW(build_parallel_network({10, 10}, {50}, {1, 1}), InputError);
}

TEST(RoadNetwork, Validation) {
    const std::vector<Arc> ok{{"a", "O", "D", 1, 1, 1}};
    EXPECT_NO_THROW(RoadNetwork({"O", "D"}, ok, {{"O", "D", 1.0}}));
    EXPECT_THROW(RoadNetwork({"O", "D"}, {{"a", "O", "D", 1, 1, 1}, {"a", "O", "D", 1, 1, 1}}, {{"O", "D", 1.0}}),
                 InputError);
    EXPECT_THROW(RoadNetwork({"O", "D"}, ok, {{"O", "D", 0.7}}), InputError);
    EXPECT_THROW(RoadNetwork({"O", "D"}, ok, {{"D", "O", 1.0}}), InputError);
    EXPECT_THROW(RoadNetwork({"O", "D"}, {{"a", "O", "X", 1, 1, 1}}, {{"O", "D", 1.0}}), InputError);
    EXPECT_THROW(RoadNetwork({"O", "D"}, {{"a", "O", "D", 1, 0, 1}}, {{"O", "D", 1.0}}), InputError);
    EXPECT_THROW(RoadNetwork({"O", "D"}, {{"a", "O", "D", 1, 1, 1, 2.0, 1.0}}, {{"O", "D", 1.0}}), InputError);
    EXPECT_THROW(RoadNetwork({"O", "D"}, ok, {{"O", "D", 1.0}}, {{"a", VehicleClass::Gasoline, -1.0}}), InputError);
    EXPECT_THROW(RoadNetwork({"O", "D"}, ok, {{"O", "D", 1.0}}, {{"zz", VehicleClass::Gasoline, 1.0}}), InputError);
}

TEST(ClassParamsTest, Validation) {
    ClassParams p;
    EXPECT_NO_THROW(p.validate());
    EXPECT_DOUBLE_EQ(p.x_g(), 0.5);
    p.x_e = 1.2;
    EXPECT_THROW(p.validate(), InputError);
    p = ClassParams{};
    p.tau = 0.0;
    EXPECT_THROW(p.validate(), InputError);
}

TEST(TravelTime, BprShape) {
    const Arc a = build_parallel_network().arcs()[0];
    EXPECT_DOUBLE_EQ(travel_time(a, 0.0), 0.6);
    EXPECT_NEAR(travel_time(a, 0.5), 0.6 * 3.0, 1e-15);
    double prev_slope = 0.0;
    for (double x = 0.01; x < 2.0; x += 0.01) {
        const double slope = (travel_time(a, x + 1e-6) - travel_time(a, x - 1e-6)) / 2e-6;
        EXPECT_GT(slope, 0.0);
        EXPECT_GT(slope, prev_slope);
        EXPECT_NEAR(travel_time_derivative(a, x), slope, 1e-6 * slope);
        prev_slope = slope;
    }
}

TEST(TravelTime, IntegralAntiderivative) {
    const Arc a = build_parallel_network().arcs()[2];
    for (double x : {0.0, 0.1, 0.5, 1.3}) {
        const double expected = a.free_flow_time() * (x + a.bpr_alpha * std::pow(x, 5) / (5.0 * std::pow(a.capacity, 4)));
        EXPECT_NEAR(travel_time_integral(a, x), expected, 1e-14 * (1.0 + expected));
    }
}

TEST(GeneralizedCost, FreeFlowValues) {
    const Arc a = build_parallel_network().arcs()[0];
    const ClassParams p;
    EXPECT_NEAR(arc_generalized_cost(a, 0.0, VehicleClass::Electric, p, 0.2), 6.0 + 30 * 0.2 * 0.2, 1e-14);
    EXPECT_NEAR(arc_generalized_cost(a, 0.0, VehicleClass::Gasoline, p, 0.2), 8.7, 1e-14);
    EXPECT_NEAR(arc_generalized_cost(a, 0.0, VehicleClass::Gasoline, p, 0.2, 0.9), 9.6, 1e-14);
    EXPECT_NEAR(arc_generalized_cost(a, 0.0, VehicleClass::Electric, p, 0.2), 7.2, 1e-14);
}

TEST(PathFlows, AggregationAndEnergy) {
    const RoadNetwork net = diamond();
    PathFlowMap f{{"oa/ad", {0.2, 0.1}}, {"ob/bd", {0.1, 0.3}}, {"oa/ab/bd", {0.2, 0.1}}};
    const FlowAssignment x = arc_flows_from_path_flows(net, f);
    const std::size_t oa = net.arc_index("oa");
    const std::size_t bd = net.arc_index("bd");
    EXPECT_NEAR(x.of(oa, VehicleClass::Electric), 0.4, 1e-15);
    EXPECT_NEAR(x.of(bd, VehicleClass::Gasoline), 0.4, 1e-15);
    EXPECT_EQ(x.total(bd), x.of(bd, VehicleClass::Electric) + x.of(bd, VehicleClass::Gasoline));
    EXPECT_EQ(x.paths.size(), 3u);

    ClassParams p;
    p.fleet_scale = 3.0;
    const double e = total_class_energy(net, x, VehicleClass::Electric, p);
    EXPECT_NEAR(e, 0.2 * 3.0 * (0.2 * 20 + 0.1 * 20 + 0.2 * 19), 1e-12);

    FlowAssignment y = x;
    for (auto& v : y.arc) v = {2.0 * v[0], 0.5 * v[1]};
    FlowAssignment mix = x;
    for (std::size_t a = 0; a < net.arc_count(); ++a)
        for (int c = 0; c < 2; ++c) mix.arc[a][c] = 0.3 * x.arc[a][c] + 0.7 * y.arc[a][c];
    EXPECT_NEAR(total_class_energy(net, mix, VehicleClass::Electric, p),
                0.3 * e + 0.7 * total_class_energy(net, y, VehicleClass::Electric, p), 1e-12);

    EXPECT_THROW(arc_flows_from_path_flows(net, PathFlowMap{{"oa/bd", {0.1, 0.0}}}), InputError);
    EXPECT_THROW(arc_flows_from_path_flows(net, PathFlowMap{{"oa/ad", {-0.1, 0.0}}}), InputError);
}

TEST(Paths, EnumerationAndIds) {
    const RoadNetwork net = diamond();
    const auto paths = net.paths();
    EXPECT_EQ(paths.size(), 3u);
    for (const Path& p : paths) {
        const Path back = net.resolve_path(net.path_id(p));
        EXPECT_EQ(back.arcs, p.arcs);
    }
    EXPECT_NEAR(net.path_length(net.resolve_path("oa/ab/bd")), 19.0, 1e-15);
}

TEST(Paths, CostIsAdditive) {
    const RoadNetwork net = diamond();
    FlowAssignment x(net.arc_count());
    x.arc[0] = {0.3, 0.2};
    const Path p = net.resolve_path("oa/ab/bd");
    const ClassParams params;
    double sum = 0.0;
    for (auto it = p.arcs.rbegin(); it != p.arcs.rend(); ++it)
        sum += arc_generalized_cost(net.arcs()[*it], x.total(*it), VehicleClass::Electric, params, 0.25);
    EXPECT_NEAR(path_cost(net, p, x, VehicleClass::Electric, params, 0.25), sum, 1e-13);
}

TEST(ShortestPathTest, ParallelCostsAndTies) {
    const RoadNetwork net = build_parallel_network();
    const std::vector<double> c1{3, 5, 5};
    EXPECT_EQ(shortest_path(net, 0, c1).path.arcs, std::vector<std::size_t>{0});
    const std::vector<double> c2{6, 5, 5};
    const ShortestPath tie = shortest_path(net, 0, c2);
    EXPECT_EQ(tie.path.arcs, std::vector<std::size_t>{1});
    EXPECT_DOUBLE_EQ(tie.cost, 5.0);
    const std::vector<double> bad{-1, 5, 5};
    EXPECT_THROW(shortest_path(net, 0, bad), InputError);
}

TEST(ShortestPathTest, MatchesEnumerationOnRandomDags) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 7;
        std::vector<std::string> nodes;
        for (int i = 0; i < n; ++i) nodes.push_back("n" + std::to_string(i));
        std::vector<Arc> arcs;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (j == i + 1 || unit(rng) < 0.4)
                    arcs.push_back({"e" + std::to_string(i) + "_" + std::to_string(j), nodes[i], nodes[j], 1, 1, 1});
        const RoadNetwork net(nodes, arcs, {{"n0", "n6", 1.0}});
        std::vector<double> cost(net.arc_count());
        for (double& c : cost) c = std::floor(unit(rng) * 4.0);  // integer costs to force ties
        const ShortestPath sp = shortest_path(net, 0, cost);

        double best = 1e300;
        std::string best_id;
        for (const Path& p : net.paths()) {
            double c = 0.0;
            for (std::size_t a : p.arcs) c += cost[a];
            std::vector<std::string> ids;
            for (std::size_t a : p.arcs) ids.push_back(net.arcs()[a].id);
            if (c < best - 1e-12) {
                best = c;
                best_id = net.path_id(p);
            } else if (std::abs(c - best) <= 1e-12) {
                std::vector<std::string> cur;
                for (std::size_t a : net.resolve_path(best_id).arcs) cur.push_back(net.arcs()[a].id);
                if (ids < cur) best_id = net.path_id(p);
            }
        }
        EXPECT_NEAR(sp.cost, best, 1e-12);
        EXPECT_EQ(net.path_id(sp.path), best_id);
    }
}

TEST(ShortestPathTest, UnreachableThrowsAtConstruction) {
    EXPECT_THROW(RoadNetwork({"O", "A", "D"}, {{"a", "O", "A", 1, 1, 1}}, {{"O", "D", 1.0}}), InputError);
}

TEST(FleetScale, MapsLongestRouteToShare) {
    const RoadNetwork net = build_parallel_network();
    const ClassParams p;
    const double longest = 15.0 * std::numbers::pi;
    const double scale = fleet_scale_for_energy_share(net, p, 42.3, 0.4);
    EXPECT_NEAR(p.m_e * p.x_e * longest * scale, 0.4 * 42.3, 1e-12);
}
