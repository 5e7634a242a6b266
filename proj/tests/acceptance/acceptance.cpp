// Acceptance checks: one [PASS]/[FAIL] line per criterion, exit status 1 if
// any criterion fails. An optional household load CSV (hourly kWh) can be
// given as the first argument or through EVW_LOAD_CSV.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "evwardrop/charging.hpp"
#include "evwardrop/equilibrium.hpp"
#include "evwardrop/incentives.hpp"
#include "evwardrop/loaddata.hpp"
#include "evwardrop/network.hpp"

using namespace evw;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
    fmt::print("[{}] criterion {}: {}\n", ok ? "PASS" : "FAIL", id, detail);
    std::fflush(stdout);
    if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

const ChargingScenario kScenario = ChargingScenario::uniform({16.7, 25.6});

ChargingScenario random_scenario(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> slots(1, 6);
    std::uniform_int_distribution<int> power(2, 3);
    std::uniform_real_distribution<double> eta(0.002, 0.05);
    std::uniform_real_distribution<double> load(0.0, 40.0);
    std::bernoulli_distribution empty(0.1);
    ChargingScenario sc;
    sc.n = power(rng);
    const std::size_t T = slots(rng);
    for (std::size_t t = 0; t < T; ++t) {
        sc.eta.push_back(eta(rng));
        sc.ell0.push_back(empty(rng) ? 0.0 : load(rng));
    }
    return sc;
}

// Minimizes sum eta_t (ell0_t + l_t)^n subject to sum l_t = L, l >= 0 by
// bisection on the common marginal cost of the charging slots.
double brute_force_value(const ChargingScenario& sc, double need) {
    const int n = sc.n;
    auto fill = [&](double mu) {
        double s = 0.0;
        for (std::size_t t = 0; t < sc.slots(); ++t)
            s += std::max(0.0, std::pow(mu / (n * sc.eta[t]), 1.0 / (n - 1)) - sc.ell0[t]);
        return s;
    };
    double lo = 0.0;
    double hi = 1.0;
    while (fill(hi) < need) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (fill(mid) < need ? lo : hi) = mid;
    }
    const double mu = 0.5 * (lo + hi);
    std::vector<double> l(sc.slots());
    for (std::size_t t = 0; t < sc.slots(); ++t)
        l[t] = std::max(0.0, std::pow(mu / (n * sc.eta[t]), 1.0 / (n - 1)) - sc.ell0[t]);
    const double s = std::accumulate(l.begin(), l.end(), 0.0);
    double v = 0.0;
    for (std::size_t t = 0; t < sc.slots(); ++t) {
        if (s > 0.0) l[t] *= need / s;
        v += sc.eta[t] * std::pow(sc.ell0[t] + l[t], n);
    }
    return v;
}

void water_filling_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const ChargingScenario sc = random_scenario(rng);
        const double total = std::accumulate(sc.ell0.begin(), sc.ell0.end(), 0.0);
        std::uniform_real_distribution<double> need(0.0, 2.0 * total + 50.0);
        for (int k = 0; k < 5; ++k) {
            const double L = need(rng);
            const double closed = schedule_charging(sc, L).value;
            const double brute = brute_force_value(sc, L);
            if (brute > 0.0) worst = std::max(worst, std::abs(closed - brute) / brute);
        }
    }
    const double secs = seconds_since(t0);
    report(1, worst <= 1e-7 && secs < 30.0,
           fmt::format("water-filling vs brute force, worst rel err {:.3g}, {:.2f} s", worst, secs));
}

void monotonicity_soundness() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(202);
    int disagreements = 0;
    int increasing = 0;
    for (int i = 0; i < 1000; ++i) {
        ChargingScenario sc = random_scenario(rng);
        if (sc.slots() == 1) sc.eta.push_back(sc.eta[0]), sc.ell0.push_back(sc.ell0[0] * 3.0);
        const ChargingModel model(sc);
        const auto& th = model.thresholds();
        const double last = th.size() >= 2 ? th[th.size() - 2] : 0.0;
        const auto scan = price_derivative_sign_scan(sc, last + 10.0, 10000);
        const bool scan_up = std::none_of(scan.begin(), scan.end(), [](const auto& p) { return p.second < 0; });
        const bool claim = is_price_increasing(sc).increasing;
        increasing += claim;
        if (scan_up != claim) ++disagreements;
    }
    const double secs = seconds_since(t0);
    report(2, disagreements == 0 && secs < 60.0,
           fmt::format("monotonicity test vs sign scan, {} disagreements ({} increasing of 1000), {:.2f} s",
                       disagreements, increasing, secs));
}

FlowAssignment random_parallel_flows(const RoadNetwork& net, const ClassParams& p, std::mt19937_64& rng) {
    std::exponential_distribution<double> expo(1.0);
    std::vector<PathFlow> routes;
    std::array<std::vector<double>, 2> w;
    for (auto& v : w) {
        double s = 0.0;
        for (std::size_t a = 0; a < net.arc_count(); ++a) s += v.emplace_back(expo(rng));
        for (double& x : v) x /= s;
    }
    for (std::size_t a = 0; a < net.arc_count(); ++a)
        routes.push_back({Path{0, {a}}, {p.x_e * w[0][a], p.x_g() * w[1][a]}});
    return arc_flows_from_path_flows(net, routes);
}

void gradient_check() {
    const RoadNetwork net = build_parallel_network();
    const ClassParams p;
    const ChargingModel model(kScenario);
    std::mt19937_64 rng(303);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const FlowAssignment x = random_parallel_flows(net, p, rng);
        const auto g = beckmann_gradient(net, x, p, model);
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t a = 1; a < net.arc_count(); ++a) {
                const double h = 1e-6;
                FlowAssignment up = x;
                FlowAssignment down = x;
                up.arc[a][c] += h;
                up.arc[0][c] -= h;
                down.arc[a][c] -= h;
                down.arc[0][c] += h;
                up.paths.clear();
                down.paths.clear();
                const double fd = (beckmann_potential(net, up, p, model) - beckmann_potential(net, down, p, model)) / (2 * h);
                const double exact = g[a][c] - g[0][c];
                const double scale = std::max({std::abs(exact), std::abs(g[a][c]), std::abs(g[0][c])});
                worst = std::max(worst, std::abs(fd - exact) / scale);
            }
    }
    report(3, worst <= 1e-5, fmt::format("gradient vs central differences at 100 points, worst rel err {:.3g}", worst));
}

void wardrop_certification() {
    const auto t0 = Clock::now();
    const RoadNetwork net = build_parallel_network();
    EquilibriumConfig cfg;
    cfg.max_iterations = 10000;
    bool converged = false;
    EquilibriumResult r;
    try {
        r = solve_equilibrium(net, ClassParams{}, kScenario, cfg);
        converged = r.converged;
    } catch (const ConvergenceError& e) {
        r = e.last_iterate();
    }
    const double secs = seconds_since(t0);
    const double x_ag = r.flows.of(0, VehicleClass::Gasoline);
    const double ratio = r.flows.total(1) / r.flows.total(2);
    const double dt = std::abs(travel_time(net.arcs()[1], r.flows.total(1)) - travel_time(net.arcs()[2], r.flows.total(2)));
    const bool ok = converged && r.relative_gap <= 1e-6 && r.wardrop_residual <= 1e-5 && std::abs(x_ag - 0.5) <= 1e-3 &&
                    std::abs(ratio - 2.0) <= 0.02 && dt <= 1e-4 && secs < 5.0;
    report(4, ok,
           fmt::format("gap {:.3g} in {} it, residual {:.3g}, x_ag {:.6f} (want 0.5), x_b/x_c {:.6f}, |d_b-d_c| {:.3g} h, "
                       "{:.2f} s",
                       r.relative_gap, r.iterations, r.wardrop_residual, x_ag, ratio, dt, secs));
}

void fuel_price_switch() {
    const auto t0 = Clock::now();
    const RoadNetwork net = build_parallel_network();
    const ClassParams p;
    const std::vector<double> grid = uniform_grid(0.5, 1.6, 0.01);
    SweepOptions opts;
    opts.threads = threads_from_env();
    const auto rs = sweep_fuel_price(net, p, kScenario, grid, opts);
    const auto& top = rs.back().flows;
    auto same_as_top = [&](const FlowAssignment& f) {
        for (std::size_t a = 0; a < net.arc_count(); ++a)
            for (std::size_t c = 0; c < 2; ++c)
                if (std::abs(f.arc[a][c] - top.arc[a][c]) > 1e-6) return false;
        return true;
    };
    auto all_ev_on_a = [&](const FlowAssignment& f) {
        return std::abs(f.of(0, VehicleClass::Electric) - p.x_e) <= 1e-6;
    };
    bool constant_ok = true;
    bool inverted_ok = true;
    double lowest_constant = grid.back();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] >= 0.69 - 1e-9 && !same_as_top(rs[i].flows)) constant_ok = false;
        if (grid[i] <= 0.66 + 1e-9 && !all_ev_on_a(rs[i].flows)) inverted_ok = false;
    }
    for (std::size_t i = grid.size(); i-- > 0 && same_as_top(rs[i].flows);) lowest_constant = grid[i];
    double ev_a_max = 0.0;
    for (std::size_t i = 0; i < grid.size() && grid[i] <= 0.66 + 1e-9; ++i)
        ev_a_max = std::max(ev_a_max, rs[i].flows.of(0, VehicleClass::Electric));
    const double secs = seconds_since(t0);
    report(5, constant_ok && inverted_ok && secs < 120.0,
           fmt::format("flows constant down to lambda_g {:.2f} (want <= 0.69); EV on arc a at lambda_g <= 0.66 "
                       "peaks at {:.4f} (want {}); {:.2f} s",
                       lowest_constant, ev_a_max, p.x_e, secs));
}

void toll_optimum() {
    const auto t0 = Clock::now();
    const RoadNetwork net = build_parallel_network();
    EnvWeights w = EnvWeights::uniform(3);
    w.gamma[0] = 2.0;
    SweepOptions opts;
    opts.threads = threads_from_env();
    const std::vector<double> shares = uniform_grid(0.05, 0.95, 0.05);
    const auto pts = sweep_ev_penetration(net, ClassParams{}, kScenario, w, shares, "a", 5.0, 0.01, opts);
    const double secs = seconds_since(t0);

    bool nonincreasing = true;
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (pts[i].tolls.best_toll > pts[i - 1].tolls.best_toll + 1e-9) nonincreasing = false;

    bool anchors = true;
    std::string listing;
    for (const auto& pt : pts) {
        listing += fmt::format(" {:.2f}:{:.2f}", pt.x_e, pt.tolls.best_toll);
        for (double anchor : {0.35, 0.5, 0.7, 0.9})
            if (std::abs(pt.x_e - anchor) < 1e-9 && std::abs(pt.tolls.best_toll - 0.9) > 0.01 + 1e-9) anchors = false;
    }

    // Plateau: t* constant (within one toll step) from some X_e in
    // [0.30, 0.40] up to 0.95.
    bool plateau = false;
    for (double start : {0.30, 0.35, 0.40}) {
        double lo = 1e300;
        double hi = -1e300;
        for (const auto& pt : pts)
            if (pt.x_e >= start - 1e-9) {
                lo = std::min(lo, pt.tolls.best_toll);
                hi = std::max(hi, pt.tolls.best_toll);
            }
        if (hi - lo <= 0.01 + 1e-9) plateau = true;
    }
    const bool ok = (anchors || plateau) && nonincreasing && secs < (opts.threads >= 4 ? 180.0 : 900.0);
    report(6, ok,
           fmt::format("t* = 0.9 at anchors: {}; nonincreasing: {}; plateau from X_e ~0.33: {}; {:.2f} s; X_e:t*{}",
                       anchors ? "yes" : "no", nonincreasing ? "yes" : "no", plateau ? "yes" : "no", secs, listing));
}

void uniqueness() {
    const RoadNetwork net = build_parallel_network();
    const ClassParams p;
    const bool regime = is_price_increasing(kScenario).increasing;
    EquilibriumConfig cfg;
    cfg.gap_tolerance = 1e-12;
    const EquilibriumResult ref = solve_equilibrium(net, p, kScenario, cfg);
    std::mt19937_64 rng(707);
    double worst = 0.0;
    auto spread = [&](const FlowAssignment& f) {
        // Arc totals are unique; per-class flows only on arc a, since the two
        // ring arcs have equal length and carry the same energy per vehicle.
        double d = std::abs(f.of(0, VehicleClass::Electric) - ref.flows.of(0, VehicleClass::Electric));
        d = std::max(d, std::abs(f.of(0, VehicleClass::Gasoline) - ref.flows.of(0, VehicleClass::Gasoline)));
        for (std::size_t a = 0; a < net.arc_count(); ++a) d = std::max(d, std::abs(f.total(a) - ref.flows.total(a)));
        return d;
    };
    for (int s = 0; s < 20; ++s) {
        const FlowAssignment start = random_parallel_flows(net, p, rng);
        const EquilibriumResult r = solve_equilibrium(net, p, kScenario, cfg, &start.paths);
        worst = std::max(worst, spread(r.flows));
    }
    const double oracle = spread(enumerate_parallel_equilibrium(net, p, kScenario, 60));
    report(7, regime && worst <= 1e-4 && oracle <= 1e-3,
           fmt::format("unique regime: {}; 20 random starts max deviation {:.3g}; brute-force oracle deviation {:.3g}",
                       regime ? "yes" : "no", worst, oracle));
}

LoadDataset synthetic_year(const std::function<std::array<double, 24>()>& shape) {
    using namespace std::chrono;
    LoadDataset ds;
    sys_days d = year_month_day{year{2019}, January, day{1}};
    const sys_days end = year_month_day{year{2020}, January, day{1}};
    for (; d < end; d += days{1}) ds.days.push_back({year_month_day{d}, shape()});
    return ds;
}

void dataset_pipeline(const std::string& csv) {
    const LoadDataset flat = synthetic_year([] {
        std::array<double, 24> h{};
        h.fill(0.6);
        return h;
    });
    bool flat_ok = true;
    for (std::size_t T = 1; T <= 24; ++T)
        for (const auto& m : monthly_increasing_fraction(flat, T))
            if (!m.fraction || *m.fraction != 1.0) flat_ok = false;

    const LoadDataset steep = synthetic_year([] {
        std::array<double, 24> h{};
        for (int i = 0; i < 24; ++i) h[i] = i < 12 ? 1.0 / 12.0 : 3.0 / 12.0;
        return h;
    });
    const double steep_year = yearly_increasing_fraction(monthly_increasing_fraction(steep, 2, 2));

    std::mt19937_64 rng(808);
    std::uniform_real_distribution<double> load(0.01, 10.0);
    int disagreements = 0;
    for (int i = 0; i < 10000; ++i) {
        const double l1 = load(rng);
        const double l2 = load(rng);
        const bool closed = std::max(l1, l2) / std::min(l1, l2) <= 1.0 + std::sqrt(2.0);
        if (closed != is_price_increasing(ChargingScenario::uniform({l1, l2})).increasing) ++disagreements;
    }

    bool ok = flat_ok && steep_year == 0.0 && disagreements == 0;
    std::string detail = fmt::format("flat year 1.0 for all T: {}; (1,3) year {:.3f}; closed form disagreements {}",
                                     flat_ok ? "yes" : "no", steep_year, disagreements);
    if (!csv.empty()) {
        try {
            const double frac = yearly_increasing_fraction(monthly_increasing_fraction(parse_load_csv(csv), 2));
            const bool near = std::abs(frac - 0.34) <= 0.03;
            ok = ok && near;
            detail += fmt::format("; {} yearly T=2 fraction {:.3f} (reference 0.34 +- 0.03)", csv, frac);
        } catch (const std::exception& e) {
            ok = false;
            detail += fmt::format("; {}: {}", csv, e.what());
        }
    } else {
        detail += "; no household load file supplied";
    }
    report(8, ok, detail);
}

void potential_continuity() {
    std::mt19937_64 rng(909);
    double worst = 0.0;
    std::size_t checked = 0;
    for (int i = 0; i < 100; ++i) {
        ChargingScenario sc = random_scenario(rng);
        if (sc.slots() == 1) sc.eta.push_back(sc.eta[0] * 1.5), sc.ell0.push_back(sc.ell0[0] + 5.0);
        const ChargingModel m(sc);
        const auto& th = m.thresholds();
        for (std::size_t t = 0; t + 1 < th.size(); ++t) {
            const double L = th[t];
            if (!(L > 0.0) || !std::isfinite(L)) continue;
            const double v1 = m.value_on_branch(L, t + 1);
            const double v2 = m.value_on_branch(L, t + 2);
            const double p1 = m.unit_price_on_branch(L, t + 1);
            const double p2 = m.unit_price_on_branch(L, t + 2);
            worst = std::max({worst, std::abs(v1 - v2) / std::abs(v1), std::abs(p1 - p2) / std::abs(p1)});
            ++checked;
        }
    }
    report(9, worst <= 1e-10,
           fmt::format("branch values at {} thresholds, worst rel mismatch {:.3g}", checked, worst));
}

}  // namespace

int main(int argc, char** argv) {
    std::string csv;
    if (argc > 1) {
        csv = argv[1];
    } else if (const char* env = std::getenv("EVW_LOAD_CSV")) {
        csv = env;
    }
    water_filling_oracle();
    monotonicity_soundness();
    gradient_check();
    wardrop_certification();
    fuel_price_switch();
    toll_optimum();
    uniqueness();
    dataset_pipeline(csv);
    potential_continuity();
    fmt::print("{} of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
