#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "drsim/config.hpp"
#include "drsim/metrics_io.hpp"
#include "drsim/presets.hpp"
#include "drsim/sim.hpp"

namespace fs = std::filesystem;

namespace {

std::string default_out_dir() {
    if (const char* env = std::getenv("DRSIM_OUT_DIR"); env && *env) return env;
    return "out";
}

drsim::ScenarioConfig load_or_default(const std::string& path) {
    return path.empty() ? drsim::ScenarioConfig{} : drsim::load_config(path);
}

int cmd_run(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out) {
    auto cfg = load_or_default(config);
    if (seed) cfg.seed = *seed;
    drsim::validate(cfg);
    const auto log = drsim::run(cfg);
    const auto files = drsim::write_run_outputs(cfg, log, out);
    const auto& s = log.summary;
    std::cout << fmt::format(
        "{} houses, {} clusters, {}: mean consumed {:.1f} W, supply {:.1f} W, mean overload {:.1f} W, "
        "control delay {:.3f} s\n",
        cfg.n_houses, cfg.effective_clusters(), drsim::to_string(cfg.topology), s.mean_consumed_w, s.mean_supply_w,
        s.mean_overload_w, log.delay.mean_s);
    std::cout << fmt::format("wrote {} files to {}\n", files.size(), out);
    return 0;
}

int cmd_validate(const std::string& config) {
    const auto cfg = drsim::load_config(config);
    drsim::validate(cfg);
    std::cout << fmt::format("{}: ok ({} houses, {} clusters of {}, {}, period {:.4f} s)\n", config, cfg.n_houses,
                             cfg.effective_clusters(), cfg.cluster_size(), drsim::to_string(cfg.topology),
                             cfg.control_period_s());
    return 0;
}

int cmd_frame(const std::string& config, const std::string& out) {
    const auto cfg = load_or_default(config);
    drsim::validate(cfg);
    const auto frame = drsim::build_frame(cfg.topology, cfg.n_houses, cfg.cluster_size(),
                                          cfg.radio.slot_duration_s(), cfg.mode);
    if (out.empty() || out == "-") {
        drsim::write_frame_csv(frame, std::cout);
        return 0;
    }
    fs::create_directories(fs::path(out).parent_path().empty() ? fs::path(".") : fs::path(out).parent_path());
    std::ofstream os(out);
    if (!os) throw std::runtime_error("cannot write '" + out + "'");
    drsim::write_frame_csv(frame, os);
    return 0;
}

int cmd_preset(const std::string& name, const std::string& out, const drsim::PresetOptions& opts, unsigned jobs,
               bool quiet) {
    const auto preset = drsim::make_preset(name, opts);
    const fs::path dir = fs::path(out) / name;
    const auto files = drsim::run_preset(preset, dir, jobs, quiet ? nullptr : &std::cerr);
    std::cout << fmt::format("{}: {} runs x {} seeds, wrote {} files to {}\n", name, preset.runs.size(),
                             preset.seeds, files.size(), dir.string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical demand-response control simulator"};
    app.set_version_flag("--version", drsim::kVersion);
    app.require_subcommand(1);

    std::string config;
    std::string out = default_out_dir();
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "simulate one scenario and write its CSV outputs");
    run->add_option("--config,-c", config, "scenario config file (defaults apply when omitted)")->check(CLI::ExistingFile);
    run->add_option("--seed,-s", seed, "RNG seed, overrides scenario.seed");
    run->add_option("--out,-o", out, "output directory (default: $DRSIM_OUT_DIR or ./out)");

    auto* validate = app.add_subcommand("validate", "check a scenario config without running it");
    validate->add_option("--config,-c", config, "scenario config file")->required();

    std::string preset_name;
    drsim::PresetOptions opts;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    bool list = false;
    bool quiet = false;
    std::optional<double> duration;
    std::optional<std::size_t> trials;
    auto* preset = app.add_subcommand("preset", "regenerate the data behind one figure");
    preset->add_option("name", preset_name, "fig6, fig7, fig8, fig9, fig10 or fig11");
    preset->add_option("--out,-o", out, "output root; results go to <out>/<name>");
    preset->add_option("--seeds", opts.seeds, "number of seeds")->check(CLI::PositiveNumber);
    preset->add_option("--base-seed", opts.base_seed, "first seed");
    preset->add_option("--jobs,-j", jobs, "worker threads")->check(CLI::PositiveNumber);
    preset->add_option("--duration", duration, "simulated seconds per run")->check(CLI::PositiveNumber);
    preset->add_option("--trials", trials, "link trials per distance and seed (fig6)")->check(CLI::PositiveNumber);
    preset->add_flag("--list", list, "print the preset names and exit");
    preset->add_flag("--quiet,-q", quiet, "no progress lines");

    std::string frame_out;
    auto* frame = app.add_subcommand("frame", "dump one control period's slot table as CSV");
    frame->add_option("--config,-c", config, "scenario config file")->check(CLI::ExistingFile);
    frame->add_option("--out,-o", frame_out, "CSV file (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config, seed, out);
        if (*validate) return cmd_validate(config);
        if (*frame) return cmd_frame(config, frame_out);
        if (*preset) {
            if (list) {
                for (const auto& n : drsim::preset_names()) std::cout << n << "\n";
                return 0;
            }
            if (preset_name.empty()) throw std::invalid_argument("preset name required (try --list)");
            opts.duration_s = duration;
            opts.trials = trials;
            return cmd_preset(preset_name, out, opts, jobs, quiet);
        }
    } catch (const std::exception& e) {
        std::cerr << "drsim: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
