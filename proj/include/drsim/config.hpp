#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "drsim/sim.hpp"

namespace drsim {

/// Flat `dotted.key = value` text. `#` starts a comment. Unknown or repeated
/// keys are errors. A relative scenario.supply_trace is resolved against
/// `base_dir`.
ScenarioConfig parse_config(std::istream& is, const std::string& source = "<config>",
                            const std::filesystem::path& base_dir = {});
ScenarioConfig load_config(const std::filesystem::path& path);

/// Every key with its current value, in a stable order.
std::vector<std::pair<std::string, std::string>> config_entries(const ScenarioConfig& cfg);
/// Config text that parses back to `cfg`.
std::string render_config(const ScenarioConfig& cfg);

/// Two-column CSV (time_s,supply_w) with a header, sorted by time.
std::vector<SupplyPoint> load_supply_trace(const std::filesystem::path& path);

std::string format_catalog(const std::vector<ApplianceSpec>& catalog);
std::vector<ApplianceSpec> parse_catalog(const std::string& text);

}  // namespace drsim
