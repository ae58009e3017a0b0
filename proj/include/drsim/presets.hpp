#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "drsim/sim.hpp"

namespace drsim {

enum class PresetKind { scenario, throughput };

struct PresetRun {
    std::string label;
    ScenarioConfig cfg;  // seed is replaced per seed
};

struct PresetOptions {
    std::size_t seeds = 10;
    std::uint64_t base_seed = 1;
    std::optional<double> duration_s;  // overrides every run, still clamped to 10 periods
    std::optional<std::size_t> trials; // throughput trials per distance and seed
};

struct Preset {
    std::string name;
    std::string description;
    PresetKind kind = PresetKind::scenario;
    std::vector<PresetRun> runs;
    std::size_t seeds = 10;
    std::uint64_t base_seed = 1;
    std::vector<double> distances_m;  // throughput presets
    std::size_t trials = 0;
    bool write_traces = false;
    bool write_histograms = false;

    std::vector<std::uint64_t> seed_list() const;
};

const std::vector<std::string>& preset_names();

/// Throws std::invalid_argument for an unknown name.
Preset make_preset(const std::string& name, const PresetOptions& opts = {});

/// Smallest duration that is at least `wanted` and covers ten control periods
/// plus one for the start-up transient.
double duration_for(const ScenarioConfig& cfg, double wanted);

/// Runs every (run, seed) pair on `jobs` threads. Writes per-seed files under
/// `out/seed_<s>/` and across-seed aggregates plus manifest.json in `out`.
/// Returns the paths written, relative to `out`.
std::vector<std::string> run_preset(const Preset& preset, const std::filesystem::path& out, unsigned jobs,
                                    std::ostream* progress = nullptr);

}  // namespace drsim
