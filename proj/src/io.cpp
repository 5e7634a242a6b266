#include "evwardrop/io.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "evwardrop/errors.hpp"

namespace evw {

namespace {

using nlohmann::json;

class Reader {
public:
    Reader(const json& j, std::string pointer, const std::string& source)
        : j_(j), pointer_(std::move(pointer)), source_(source) {}

    [[noreturn]] void fail(const std::string& msg) const {
        throw InputError(fmt::format("{}: {}: {}", source_, pointer_.empty() ? "/" : pointer_, msg));
    }

    const Reader& object(std::initializer_list<const char*> allowed) const {
        if (!j_.is_object()) fail("expected an object");
        for (const auto& [key, value] : j_.items())
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return key == k; }))
                child(key).fail("unknown key");
        return *this;
    }

    bool has(const char* key) const { return j_.contains(key); }

    Reader child(const std::string& key) const { return {j_.at(key), pointer_ + "/" + key, source_}; }
    Reader required(const char* key) const {
        if (!j_.contains(key)) Reader(j_, pointer_ + "/" + key, source_).fail("missing required field");
        return child(key);
    }

    std::vector<Reader> array() const {
        if (!j_.is_array()) fail("expected an array");
        std::vector<Reader> out;
        for (std::size_t i = 0; i < j_.size(); ++i) out.push_back({j_[i], pointer_ + "/" + std::to_string(i), source_});
        return out;
    }

    double number() const {
        if (!j_.is_number()) fail("expected a number");
        return j_.get<double>();
    }
    int integer() const {
        if (!j_.is_number_integer()) fail("expected an integer");
        return j_.get<int>();
    }
    std::string string() const {
        if (!j_.is_string()) fail("expected a string");
        return j_.get<std::string>();
    }
    std::vector<double> numbers() const {
        std::vector<double> out;
        for (const Reader& r : array()) out.push_back(r.number());
        return out;
    }

    void number_if(const char* key, double& out) const {
        if (has(key)) out = child(key).number();
    }

private:
    const json& j_;
    std::string pointer_;
    const std::string& source_;
};

json parse(std::string_view text, const std::string& source) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        std::size_t col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw InputError(fmt::format("{}:{}:{}: JSON syntax error", source, line, col));
    }
}

ClassParams read_params(const Reader& r) {
    r.object({"x_e", "m_e", "m_g", "lambda_g", "tau", "fleet_scale"});
    ClassParams p;
    r.number_if("x_e", p.x_e);
    r.number_if("m_e", p.m_e);
    r.number_if("m_g", p.m_g);
    r.number_if("lambda_g", p.lambda_g);
    r.number_if("tau", p.tau);
    r.number_if("fleet_scale", p.fleet_scale);
    return p;
}

template <class F>
auto with_source(const std::string& source, F&& f) {
    try {
        return f();
    } catch (const InputError& e) {
        const std::string what = e.what();
        if (what.rfind(source, 0) == 0) throw;
        throw InputError(source + ": " + what);
    }
}

}  // namespace

NetworkFile parse_network_json(std::string_view text, const std::string& source) {
    const json doc = parse(text, source);
    return with_source(source, [&] {
        const Reader root(doc, "", source);
        root.object({"nodes", "arcs", "od_pairs", "tolls", "class_params"});

        std::vector<std::string> nodes;
        for (const Reader& r : root.required("nodes").array()) nodes.push_back(r.string());

        std::vector<Arc> arcs;
        for (const Reader& r : root.required("arcs").array()) {
            r.object({"id", "tail", "head", "length_km", "capacity", "speed_kmh", "alpha", "beta"});
            Arc a;
            a.id = r.required("id").string();
            a.tail = r.required("tail").string();
            a.head = r.required("head").string();
            a.length_km = r.required("length_km").number();
            a.capacity = r.required("capacity").number();
            a.free_flow_speed = r.required("speed_kmh").number();
            r.number_if("alpha", a.bpr_alpha);
            r.number_if("beta", a.bpr_beta);
            arcs.push_back(a);
        }

        std::vector<ODPair> ods;
        for (const Reader& r : root.required("od_pairs").array()) {
            r.object({"origin", "destination", "demand"});
            ods.push_back({r.required("origin").string(), r.required("destination").string(),
                           r.required("demand").number()});
        }

        std::vector<Toll> tolls;
        if (root.has("tolls"))
            for (const Reader& r : root.child("tolls").array()) {
                r.object({"arc_id", "class", "euro"});
                Toll t;
                t.arc_id = r.required("arc_id").string();
                const Reader cls = r.required("class");
                try {
                    t.cls = parse_class_tag(cls.string());
                } catch (const InputError&) {
                    cls.fail("expected \"ev\" or \"gv\"");
                }
                t.euro = r.required("euro").number();
                tolls.push_back(t);
            }

        std::optional<ClassParams> params;
        if (root.has("class_params")) {
            params = read_params(root.child("class_params"));
            params->validate();
        }
        return NetworkFile{RoadNetwork(std::move(nodes), std::move(arcs), std::move(ods), std::move(tolls)), params};
    });
}

NetworkFile load_network_file(const std::filesystem::path& path) {
    return parse_network_json(read_text_file(path), path.string());
}

ChargingScenario parse_scenario_json(std::string_view text, const std::string& source) {
    const json doc = parse(text, source);
    return with_source(source, [&] {
        const Reader root(doc, "", source);
        root.object({"n", "eta", "ell0"});
        ChargingScenario sc;
        sc.n = root.required("n").integer();
        sc.eta = root.required("eta").numbers();
        sc.ell0 = root.required("ell0").numbers();
        sc.validate();
        return sc;
    });
}

ChargingScenario load_scenario_file(const std::filesystem::path& path) {
    return parse_scenario_json(read_text_file(path), path.string());
}

ClassParams parse_params_json(std::string_view text, const std::string& source) {
    const json doc = parse(text, source);
    return with_source(source, [&] {
        ClassParams p = read_params(Reader(doc, "", source));
        p.validate();
        return p;
    });
}

ClassParams load_params_file(const std::filesystem::path& path) {
    return parse_params_json(read_text_file(path), path.string());
}

ChargingScenario default_scenario() { return ChargingScenario::uniform({16.7, 25.6}, 0.01, 2); }

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 computation failed");
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::string format_number(double v) { return fmt::format("{:.10g}", v); }

}  // namespace evw
