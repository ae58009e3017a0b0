#include "drsim/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace drsim {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    return out;
}

double to_double(const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError("expected a number, got '" + v + "'");
    return out;
}

std::uint64_t to_u64(const std::string& v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError("expected a non-negative integer, got '" + v + "'");
    return out;
}

int to_int(const std::string& v) {
    int out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError("expected an integer, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("expected true or false, got '" + v + "'");
}

std::string num(double v) { return fmt::format("{}", v); }

using Setter = std::function<void(ScenarioConfig&, const std::string&)>;

template <class E, class F>
Setter enum_setter(E ScenarioConfig::*field, F parse) {
    return [field, parse](ScenarioConfig& c, const std::string& v) {
        try {
            c.*field = parse(v);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    };
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"scenario.n_houses", [](auto& c, auto& v) { c.n_houses = to_u64(v); }},
        {"scenario.area_side", [](auto& c, auto& v) { c.area_side_m = to_double(v); }},
        {"scenario.topology", enum_setter(&ScenarioConfig::topology, topology_from_string)},
        {"scenario.n_clusters", [](auto& c, auto& v) { c.n_clusters = to_u64(v); }},
        {"scenario.degree", [](auto& c, auto& v) { c.degree = v == "auto" ? 0 : to_u64(v); }},
        {"scenario.duration", [](auto& c, auto& v) { c.duration_s = to_double(v); }},
        {"scenario.seed", [](auto& c, auto& v) { c.seed = to_u64(v); }},
        {"scenario.supply_limit",
         [](auto& c, auto& v) {
             if (v == "auto")
                 c.supply_limit_w.reset();
             else
                 c.supply_limit_w = to_double(v);
         }},
        {"scenario.supply_trace", [](auto& c, auto& v) { c.supply_trace_path = v; }},
        {"scenario.placement",
         [](auto& c, auto& v) {
             try {
                 c.load.placement = placement_from_string(v);
             } catch (const std::invalid_argument& e) {
                 throw ConfigError(e.what());
             }
         }},
        {"scenario.spatial_clusters", [](auto& c, auto& v) { c.spatial_clusters = to_bool(v); }},
        {"control.mode", enum_setter(&ScenarioConfig::mode, control_mode_from_string)},
        {"control.actuation", enum_setter(&ScenarioConfig::actuation, actuation_from_string)},
        {"control.stale_cap", [](auto& c, auto& v) { c.stale_cap = to_int(v); }},
        {"backbone.latency", [](auto& c, auto& v) { c.backbone_latency_s = to_double(v); }},
        {"load.target_mean", [](auto& c, auto& v) { c.load.target_mean_w = to_double(v); }},
        {"load.mean_cycle", [](auto& c, auto& v) { c.load.mean_cycle_s = to_double(v); }},
        {"load.catalog", [](auto& c, auto& v) { c.load.catalog = parse_catalog(v); }},
        {"load.pinned",
         [](auto& c, auto& v) {
             c.load.pinned.clear();
             for (auto& s : split(v, ','))
                 if (!s.empty()) c.load.pinned.push_back(s);
         }},
        {"radio.tx_power_dbm", [](auto& c, auto& v) { c.radio.tx_power_dbm = to_double(v); }},
        {"radio.pathloss_exponent", [](auto& c, auto& v) { c.radio.pathloss_exponent = to_double(v); }},
        {"radio.shadowing_sigma_db", [](auto& c, auto& v) { c.radio.shadowing_sigma_db = to_double(v); }},
        {"radio.symbol_rate", [](auto& c, auto& v) { c.radio.symbol_rate = to_double(v); }},
        {"radio.bits_per_symbol", [](auto& c, auto& v) { c.radio.bits_per_symbol = to_double(v); }},
        {"radio.coding_rate", [](auto& c, auto& v) { c.radio.coding_rate = to_double(v); }},
        {"radio.packet_length", [](auto& c, auto& v) { c.radio.packet_length_bytes = to_double(v); }},
        {"radio.slot_length", [](auto& c, auto& v) { c.radio.slot_length_symbols = to_double(v); }},
        {"radio.noise_floor_dbm", [](auto& c, auto& v) { c.radio.noise_floor_dbm = to_double(v); }},
        {"radio.reference_loss_db", [](auto& c, auto& v) { c.radio.reference_loss_db = to_double(v); }},
        {"radio.success_threshold_db", [](auto& c, auto& v) { c.radio.success_threshold_db = to_double(v); }},
        {"radio.mode",
         [](auto& c, auto& v) {
             try {
                 c.radio.model = success_model_from_string(v);
             } catch (const std::invalid_argument& e) {
                 throw ConfigError(e.what());
             }
         }},
        {"radio.ideal", [](auto& c, auto& v) { c.radio.ideal = to_bool(v); }},
        {"output.trace_interval", [](auto& c, auto& v) { c.trace_interval_s = to_double(v); }},
        {"output.house_sample_interval", [](auto& c, auto& v) { c.house_sample_interval_s = to_double(v); }},
        {"output.histogram_bin", [](auto& c, auto& v) { c.histogram_bin_w = to_double(v); }},
    };
    return table;
}

}  // namespace

std::string format_catalog(const std::vector<ApplianceSpec>& catalog) {
    std::string out;
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        const auto& a = catalog[i];
        if (i) out += ", ";
        out += fmt::format("{}:{}:{}:{}", a.name, a.rated_power_w, to_string(a.priority), a.rank);
    }
    return out;
}

std::vector<ApplianceSpec> parse_catalog(const std::string& text) {
    std::vector<ApplianceSpec> out;
    for (const auto& entry : split(text, ',')) {
        if (entry.empty()) continue;
        const auto f = split(entry, ':');
        if (f.size() != 4) throw ConfigError("catalog entry '" + entry + "' must be name:watts:class:rank");
        ApplianceSpec a;
        a.name = f[0];
        a.rated_power_w = to_double(f[1]);
        try {
            a.priority = priority_from_string(f[2]);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        a.rank = to_int(f[3]);
        out.push_back(a);
    }
    try {
        validate_catalog(out);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return out;
}

std::vector<SupplyPoint> load_supply_trace(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open supply trace '" + path.string() + "'");
    std::vector<SupplyPoint> pts;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto f = split(line, ',');
        if (f.size() != 2) throw ConfigError(fmt::format("{}:{}: expected time_s,supply_w", path.string(), lineno));
        if (lineno == 1 && f[0] == "time_s") continue;
        try {
            pts.push_back({to_double(f[0]), to_double(f[1])});
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
        }
        if (pts.size() > 1 && pts[pts.size() - 2].time_s >= pts.back().time_s)
            throw ConfigError(fmt::format("{}:{}: times must increase", path.string(), lineno));
    }
    if (pts.empty()) throw ConfigError("supply trace '" + path.string() + "' has no rows");
    return pts;
}

ScenarioConfig parse_config(std::istream& is, const std::string& source, const std::filesystem::path& base_dir) {
    ScenarioConfig cfg;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    const auto& table = setters();
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(fmt::format("{}:{}: expected 'key = value'", source, lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = table.find(key);
        if (it == table.end()) throw ConfigError(fmt::format("{}:{}: unknown key '{}'", source, lineno, key));
        if (!seen.insert(key).second) throw ConfigError(fmt::format("{}:{}: duplicate key '{}'", source, lineno, key));
        try {
            it->second(cfg, value);
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("{}:{}: {}: {}", source, lineno, key, e.what()));
        }
    }
    if (!cfg.supply_trace_path.empty()) {
        std::filesystem::path p(cfg.supply_trace_path);
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        cfg.supply_trace = load_supply_trace(p);
    }
    return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
    return parse_config(is, path.string(), path.parent_path());
}

std::vector<std::pair<std::string, std::string>> config_entries(const ScenarioConfig& c) {
    std::string pinned;
    for (std::size_t i = 0; i < c.load.pinned.size(); ++i) pinned += (i ? "," : "") + c.load.pinned[i];
    return {
        {"scenario.n_houses", std::to_string(c.n_houses)},
        {"scenario.area_side", num(c.area_side_m)},
        {"scenario.topology", to_string(c.topology)},
        {"scenario.n_clusters", std::to_string(c.n_clusters)},
        {"scenario.degree", c.degree == 0 ? "auto" : std::to_string(c.degree)},
        {"scenario.duration", num(c.duration_s)},
        {"scenario.seed", std::to_string(c.seed)},
        {"scenario.supply_limit", c.supply_limit_w ? num(*c.supply_limit_w) : "auto"},
        {"scenario.supply_trace", c.supply_trace_path},
        {"scenario.placement", to_string(c.load.placement)},
        {"scenario.spatial_clusters", c.spatial_clusters ? "true" : "false"},
        {"control.mode", to_string(c.mode)},
        {"control.actuation", to_string(c.actuation)},
        {"control.stale_cap", std::to_string(c.stale_cap)},
        {"backbone.latency", num(c.backbone_latency_s)},
        {"load.target_mean", num(c.load.target_mean_w)},
        {"load.mean_cycle", num(c.load.mean_cycle_s)},
        {"load.catalog", format_catalog(c.load.catalog)},
        {"load.pinned", pinned},
        {"radio.tx_power_dbm", num(c.radio.tx_power_dbm)},
        {"radio.pathloss_exponent", num(c.radio.pathloss_exponent)},
        {"radio.shadowing_sigma_db", num(c.radio.shadowing_sigma_db)},
        {"radio.symbol_rate", num(c.radio.symbol_rate)},
        {"radio.bits_per_symbol", num(c.radio.bits_per_symbol)},
        {"radio.coding_rate", num(c.radio.coding_rate)},
        {"radio.packet_length", num(c.radio.packet_length_bytes)},
        {"radio.slot_length", num(c.radio.slot_length_symbols)},
        {"radio.noise_floor_dbm", num(c.radio.noise_floor_dbm)},
        {"radio.reference_loss_db", num(c.radio.reference_loss_db)},
        {"radio.success_threshold_db", num(c.radio.success_threshold_db)},
        {"radio.mode", to_string(c.radio.model)},
        {"radio.ideal", c.radio.ideal ? "true" : "false"},
        {"output.trace_interval", num(c.trace_interval_s)},
        {"output.house_sample_interval", num(c.house_sample_interval_s)},
        {"output.histogram_bin", num(c.histogram_bin_w)},
    };
}

std::string render_config(const ScenarioConfig& cfg) {
    std::string out;
    for (const auto& [k, v] : config_entries(cfg)) {
        if (v.empty()) continue;
        out += k + " = " + v + "\n";
    }
    return out;
}

}  // namespace drsim
