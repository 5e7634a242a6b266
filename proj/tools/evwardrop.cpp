#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "evwardrop/charging.hpp"
#include "evwardrop/equilibrium.hpp"
#include "evwardrop/errors.hpp"
#include "evwardrop/incentives.hpp"
#include "evwardrop/io.hpp"
#include "evwardrop/loaddata.hpp"
#include "evwardrop/network.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace evw;

namespace {

constexpr int kOk = 0;
constexpr int kNotConverged = 2;
constexpr int kInvalid = 3;

struct Inputs {
    std::string network_path;
    std::string scenario_path;
    std::string params_path;
    std::string out_dir = ".";
    double gap_tol = 1e-6;
    std::size_t max_iter = 100000;
};

struct Loaded {
    RoadNetwork net = build_parallel_network();
    ClassParams params;
    ChargingScenario sc = default_scenario();
    EquilibriumConfig cfg;
    std::vector<std::pair<std::string, std::string>> digests;  // role, "path sha256"
};

double round10(double v) { return std::stod(format_number(v)); }

void add_digest(Loaded& l, const std::string& role, const std::string& path) {
    l.digests.emplace_back(role, path.empty() ? "builtin" : path + " sha256:" + sha256_hex(read_text_file(path)));
}

Loaded load(const Inputs& in) {
    Loaded l;
    if (!in.network_path.empty()) {
        NetworkFile nf = load_network_file(in.network_path);
        l.net = std::move(nf.network);
        if (nf.class_params) l.params = *nf.class_params;
    }
    if (!in.params_path.empty()) l.params = load_params_file(in.params_path);
    if (!in.scenario_path.empty()) l.sc = load_scenario_file(in.scenario_path);
    l.params.validate();
    l.sc.validate();
    if (!(in.gap_tol > 0.0)) throw InputError("--gap-tol must be > 0");
    if (in.max_iter < 1) throw InputError("--max-iter must be >= 1");
    l.cfg.gap_tolerance = in.gap_tol;
    l.cfg.max_iterations = in.max_iter;
    add_digest(l, "network", in.network_path);
    add_digest(l, "scenario", in.scenario_path);
    add_digest(l, "params", in.params_path);
    return l;
}

ordered_json header_json(const Loaded& l) {
    ordered_json h;
    h["tool"] = "evwardrop";
    h["version"] = EVW_VERSION;
    ordered_json inputs = ordered_json::object();
    for (const auto& [role, d] : l.digests) inputs[role] = d;
    h["inputs"] = inputs;
    return h;
}

std::string header_csv(const Loaded& l) {
    std::string s = fmt::format("# evwardrop {}\n", EVW_VERSION);
    for (const auto& [role, d] : l.digests) s += fmt::format("# {}: {}\n", role, d);
    return s;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
}

fs::path prepare_out(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

ordered_json flows_json(const RoadNetwork& net, const FlowAssignment& f) {
    ordered_json arcs = ordered_json::array();
    for (std::size_t a = 0; a < net.arc_count(); ++a)
        arcs.push_back({{"arc_id", net.arcs()[a].id},
                        {"ev", round10(f.of(a, VehicleClass::Electric))},
                        {"gv", round10(f.of(a, VehicleClass::Gasoline))}});
    ordered_json routes = ordered_json::array();
    for (const PathFlow& pf : f.paths)
        routes.push_back({{"route", net.path_id(pf.path)},
                          {"od", pf.path.od},
                          {"ev", round10(pf.flow[0])},
                          {"gv", round10(pf.flow[1])}});
    return {{"arcs", arcs}, {"routes", routes}};
}

ordered_json result_json(const Loaded& l, const EquilibriumResult& r) {
    ordered_json j;
    j["header"] = header_json(l);
    j["converged"] = r.converged;
    j["certified"] = r.certified;
    j["unique_regime"] = r.unique_regime;
    j["local_only"] = r.local_only;
    j["iterations"] = r.iterations;
    j["relative_gap"] = round10(r.relative_gap);
    j["wardrop_residual"] = round10(r.wardrop_residual);
    j["potential"] = round10(r.potential);
    j["charging_need_kwh"] = round10(r.charging_need);
    j["unit_price_eur_per_kwh"] = round10(r.unit_price);
    j["flows"] = flows_json(l.net, r.flows);
    j["warnings"] = r.warnings;
    return j;
}

std::string flows_csv(const Loaded& l, const EquilibriumResult& r) {
    std::string s = header_csv(l) + "arc_id,class,flow,travel_time_h,cost_eur\n";
    for (std::size_t a = 0; a < l.net.arc_count(); ++a) {
        const Arc& arc = l.net.arcs()[a];
        const double x = r.flows.total(a);
        for (VehicleClass c : kAllClasses)
            s += fmt::format("{},{},{},{},{}\n", arc.id, class_tag(c), format_number(r.flows.of(a, c)),
                             format_number(travel_time(arc, x)),
                             format_number(arc_generalized_cost(arc, x, c, l.params, r.unit_price, l.net.toll(a, c))));
    }
    return s;
}

std::string flow_columns(const RoadNetwork& net) {
    std::string s;
    for (const Arc& a : net.arcs()) s += fmt::format(",x_{}_ev,x_{}_gv", a.id, a.id);
    return s;
}

std::string flow_values(const RoadNetwork& net, const FlowAssignment& f) {
    std::string s;
    for (std::size_t a = 0; a < net.arc_count(); ++a)
        s += "," + format_number(f.of(a, VehicleClass::Electric)) + "," + format_number(f.of(a, VehicleClass::Gasoline));
    return s;
}

EnvWeights weights_for(const RoadNetwork& net, const std::string& arc, double gamma) {
    EnvWeights w = EnvWeights::uniform(net.arc_count());
    if (!arc.empty()) w.gamma[net.arc_index(arc)] = gamma;
    w.validate(net);
    return w;
}

SweepOptions sweep_options(const Loaded& l) {
    SweepOptions o;
    o.solver = l.cfg;
    o.threads = threads_from_env();
    return o;
}

std::vector<std::size_t> parse_slot_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        int v = 0;
        try {
            v = std::stoi(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != item.size() || v < 1 || v > 24) throw InputError("--T: '" + item + "' is not a slot count in 1..24");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw InputError("--T: no slot counts given");
    return out;
}

void add_common(CLI::App* cmd, Inputs& in) {
    cmd->add_option("--network", in.network_path, "network JSON file (default: three-arc example)")->check(CLI::ExistingFile);
    cmd->add_option("--scenario", in.scenario_path, "charging scenario JSON file")->check(CLI::ExistingFile);
    cmd->add_option("--params", in.params_path, "class parameter JSON file")->check(CLI::ExistingFile);
    cmd->add_option("--out", in.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--gap-tol", in.gap_tol, "relative gap tolerance")->capture_default_str();
    cmd->add_option("--max-iter", in.max_iter, "maximum solver sweeps")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-class Wardrop equilibria with smart-charging electricity prices"};
    app.set_version_flag("--version", std::string(EVW_VERSION));
    app.require_subcommand(1);

    Inputs in;
    double need = 0.0;
    std::string load_path;
    std::string slot_list = "2,4,8,24";
    bool chrono = false;
    int load_n = 2;
    double load_eta = 0.01;
    std::string toll_arc = "a";
    double toll_max = 5.0;
    double toll_step = 0.01;
    double gamma = 2.0;
    double fuel_min = 0.5;
    double fuel_max = 1.6;
    double fuel_step = 0.01;
    double xe_min = 0.05;
    double xe_max = 0.95;
    double xe_step = 0.05;

    auto* solve = app.add_subcommand("solve", "solve the equilibrium; writes equilibrium.json and flows.csv");
    add_common(solve, in);

    auto* schedule = app.add_subcommand("schedule", "optimal charging schedule for a charging need (JSON on stdout)");
    add_common(schedule, in);
    schedule->add_option("--need", need, "EV charging need, kWh")->required();

    auto* check = app.add_subcommand("check-lambda", "test whether the unit price increases (JSON on stdout)");
    add_common(check, in);

    auto* loadstats = app.add_subcommand("loadstats", "monthly share of days with an increasing unit price");
    add_common(loadstats, in);
    loadstats->add_option("--input", load_path, "hourly load CSV")->required()->check(CLI::ExistingFile);
    loadstats->add_option("--T", slot_list, "comma-separated slot counts")->capture_default_str();
    loadstats->add_flag("--chrono", chrono, "bin consecutive hours instead of sorted values");
    loadstats->add_option("--n", load_n, "cost exponent")->capture_default_str();
    loadstats->add_option("--eta", load_eta, "uniform eta")->capture_default_str();

    auto* sweep_toll = app.add_subcommand("sweep-toll", "exhaustive GV toll search on one arc");
    add_common(sweep_toll, in);
    sweep_toll->add_option("--arc", toll_arc, "tolled arc id")->capture_default_str();
    sweep_toll->add_option("--max", toll_max, "largest toll, euro")->capture_default_str();
    sweep_toll->add_option("--step", toll_step, "toll increment, euro")->capture_default_str();
    sweep_toll->add_option("--gamma", gamma, "environmental weight of the tolled arc")->capture_default_str();

    auto* sweep_fuel = app.add_subcommand("sweep-fuel", "equilibria over a fuel price grid");
    add_common(sweep_fuel, in);
    sweep_fuel->add_option("--min", fuel_min, "lowest fuel price, euro/L")->capture_default_str();
    sweep_fuel->add_option("--max", fuel_max, "highest fuel price, euro/L")->capture_default_str();
    sweep_fuel->add_option("--step", fuel_step, "fuel price step")->capture_default_str();
    sweep_fuel->add_option("--arc", toll_arc, "arc carrying the environmental weight")->capture_default_str();
    sweep_fuel->add_option("--gamma", gamma, "environmental weight of that arc")->capture_default_str();

    auto* sweep_pen = app.add_subcommand("sweep-penetration", "optimal toll over an EV share grid");
    add_common(sweep_pen, in);
    sweep_pen->add_option("--xe-min", xe_min, "lowest EV share")->capture_default_str();
    sweep_pen->add_option("--xe-max", xe_max, "highest EV share")->capture_default_str();
    sweep_pen->add_option("--xe-step", xe_step, "EV share step")->capture_default_str();
    sweep_pen->add_option("--arc", toll_arc, "tolled arc id")->capture_default_str();
    sweep_pen->add_option("--max", toll_max, "largest toll, euro")->capture_default_str();
    sweep_pen->add_option("--step", toll_step, "toll increment, euro")->capture_default_str();
    sweep_pen->add_option("--gamma", gamma, "environmental weight of the tolled arc")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    Loaded l;
    try {
        l = load(in);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    }

    try {
        if (*solve) {
            const fs::path out = prepare_out(in.out_dir);
            EquilibriumResult r;
            int code = kOk;
            try {
                r = solve_equilibrium(l.net, l.params, l.sc, l.cfg);
            } catch (const ConvergenceError& e) {
                std::cerr << "error: " << e.what() << "; partial result written\n";
                r = e.last_iterate();
                code = kNotConverged;
            }
            if (code == kOk && !r.certified) {
                std::cerr << "error: converged flows fail the Wardrop check (residual " << format_number(r.wardrop_residual)
                          << ")\n";
                code = kNotConverged;
            }
            for (const std::string& w : r.warnings) std::cerr << "warning: " << w << "\n";
            write_file(out / "equilibrium.json", result_json(l, r).dump(2) + "\n");
            write_file(out / "flows.csv", flows_csv(l, r));
            return code;
        }

        if (*schedule) {
            if (!(need >= 0.0)) throw InputError("--need must be >= 0");
            const ChargingSchedule s = schedule_charging(l.sc, need);
            ordered_json j;
            j["header"] = header_json(l);
            j["need_kwh"] = round10(need);
            ordered_json slots = ordered_json::array();
            for (double v : s.ell_e) slots.push_back(round10(v));
            j["ell_e"] = slots;
            j["value_eur"] = round10(s.value);
            j["unit_price_eur_per_kwh"] = round10(s.unit_price);
            j["active_slots"] = s.active_slot_count;
            std::cout << j.dump(2) << "\n";
            return kOk;
        }

        if (*check) {
            const PriceMonotonicity m = is_price_increasing(l.sc);
            ordered_json j;
            j["header"] = header_json(l);
            j["ratio"] = round10(m.ratio);
            j["increasing"] = m.increasing;
            j["empty_cheapest_slot"] = m.empty_cheapest_slot;
            j["zero_profile"] = m.zero_profile;
            std::cout << j.dump(2) << "\n";
            return kOk;
        }

        if (*loadstats) {
            const std::vector<std::size_t> Ts = parse_slot_list(slot_list);
            if (load_n < 2) throw InputError("--n must be >= 2");
            if (!(load_eta > 0.0)) throw InputError("--eta must be > 0");
            const LoadDataset ds = parse_load_csv(load_path);
            l.digests.emplace_back("load", load_path + " sha256:" + sha256_hex(read_text_file(load_path)));
            const fs::path out = prepare_out(in.out_dir);
            std::string csv = header_csv(l) + fmt::format("# binning: {}\n", chrono ? "chronological" : "sorted") +
                              "month,T,fraction,days_counted,zero_days\n";
            for (std::size_t T : Ts) {
                const auto months = monthly_increasing_fraction(ds, T, load_n, uniform_eta(load_eta),
                                                                chrono ? Binning::Chronological : Binning::Sorted);
                for (const MonthFraction& m : months)
                    csv += fmt::format("{},{},{},{},{}\n", m.month, T, m.fraction ? format_number(*m.fraction) : "",
                                       m.days_counted, m.zero_days);
                std::cout << fmt::format("T={} yearly fraction {}\n", T, format_number(yearly_increasing_fraction(months)));
            }
            write_file(out / "loadstats.csv", csv);
            return kOk;
        }

        if (*sweep_toll) {
            const EnvWeights w = weights_for(l.net, toll_arc, gamma);
            const fs::path out = prepare_out(in.out_dir);
            const TollSweepResult r = optimize_toll(l.net, l.params, l.sc, w, toll_arc, toll_max, toll_step, sweep_options(l));
            std::string csv = header_csv(l) + fmt::format("# best_toll: {}\n# gain: {}\n", format_number(r.best_toll),
                                                          format_number(r.gain));
            csv += "toll" + flow_columns(l.net) + ",lambda_e,c_env,t_star,delta\n";
            for (std::size_t i = 0; i < r.toll_grid.size(); ++i)
                csv += format_number(r.toll_grid[i]) + flow_values(l.net, r.equilibria[i].flows) + "," +
                       format_number(r.equilibria[i].unit_price) + "," + format_number(r.env_costs[i]) + "," +
                       format_number(r.best_toll) + "," + format_number(r.gain) + "\n";
            write_file(out / "sweep_toll.csv", csv);
            std::cout << fmt::format("t* = {} euro, gain = {}\n", format_number(r.best_toll), format_number(r.gain));
            return kOk;
        }

        if (*sweep_fuel) {
            const EnvWeights w = weights_for(l.net, toll_arc, gamma);
            const std::vector<double> grid = uniform_grid(fuel_min, fuel_max, fuel_step);
            const fs::path out = prepare_out(in.out_dir);
            const auto rs = sweep_fuel_price(l.net, l.params, l.sc, grid, sweep_options(l));
            std::string csv = header_csv(l) + "lambda_g" + flow_columns(l.net) + ",lambda_e,c_env\n";
            for (std::size_t i = 0; i < grid.size(); ++i)
                csv += format_number(grid[i]) + flow_values(l.net, rs[i].flows) + "," + format_number(rs[i].unit_price) +
                       "," + format_number(environmental_cost(l.net, rs[i].flows, w)) + "\n";
            write_file(out / "sweep_fuel.csv", csv);
            return kOk;
        }

        if (*sweep_pen) {
            const EnvWeights w = weights_for(l.net, toll_arc, gamma);
            const std::vector<double> grid = uniform_grid(xe_min, xe_max, xe_step);
            const fs::path out = prepare_out(in.out_dir);
            const auto rs = sweep_ev_penetration(l.net, l.params, l.sc, w, grid, toll_arc, toll_max, toll_step,
                                                 sweep_options(l));
            std::string csv = header_csv(l) + "x_e,t_star,delta" + flow_columns(l.net) + ",lambda_e,c_env\n";
            for (const PenetrationPoint& p : rs) {
                const EquilibriumResult& best = p.tolls.equilibria[p.tolls.best_index];
                csv += format_number(p.x_e) + "," + format_number(p.tolls.best_toll) + "," + format_number(p.tolls.gain) +
                       flow_values(l.net, best.flows) + "," + format_number(best.unit_price) + "," +
                       format_number(p.tolls.best_cost) + "\n";
            }
            write_file(out / "sweep_penetration.csv", csv);
            return kOk;
        }
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNotConverged;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kOk;
}
