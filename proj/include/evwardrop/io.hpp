#pragma once

// JSON input files and artifact helpers.
//
// Network file:
//   {"nodes": ["O", "D"],
//    "arcs": [{"id": "a", "tail": "O", "head": "D", "length_km": 30,
//              "capacity": 0.5, "speed_kmh": 50, "alpha": 2, "beta": 4}],
//    "od_pairs": [{"origin": "O", "destination": "D", "demand": 1}],
//    "tolls": [{"arc_id": "a", "class": "gv", "euro": 0.9}],
//    "class_params": {"x_e": 0.5, "m_e": 0.2, "m_g": 0.06, "lambda_g": 1.5,
//                     "tau": 10, "fleet_scale": 1}}
// alpha, beta, tolls and class_params are optional; class_params fields
// default individually. Scenario file: {"n": 2, "eta": [...], "ell0": [...]}.
// Params file: the class_params object on its own.
//
// Unknown keys are rejected. Errors name the file and the JSON pointer of the
// offending field, or the line and column of a syntax error.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "evwardrop/charging.hpp"
#include "evwardrop/network.hpp"

namespace evw {

struct NetworkFile {
    RoadNetwork network;
    std::optional<ClassParams> class_params;
};

NetworkFile parse_network_json(std::string_view text, const std::string& source = "<network>");
NetworkFile load_network_file(const std::filesystem::path& path);

ChargingScenario parse_scenario_json(std::string_view text, const std::string& source = "<scenario>");
ChargingScenario load_scenario_file(const std::filesystem::path& path);

ClassParams parse_params_json(std::string_view text, const std::string& source = "<params>");
ClassParams load_params_file(const std::filesystem::path& path);

/// Scenario of the three-arc example: two slots of 16.7 and 25.6 kWh, eta = 0.01, n = 2.
ChargingScenario default_scenario();

std::string read_text_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view data);

/// 10 significant digits, locale-independent.
std::string format_number(double v);

}  // namespace evw
