#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "drsim/sim.hpp"

namespace drsim {

inline constexpr const char* kVersion = "1.0.0";

/// One row of delay_vs_n.csv.
struct DelayRow {
    std::string label;
    std::string topology;
    std::size_t n_houses = 0;
    std::size_t n_clusters = 0;
    std::size_t cluster_size = 0;
    std::uint64_t seed = 0;
    double period_s = 0.0;
    double mean_delay_s = 0.0;
    double response_latency_s = 0.0;
    std::size_t uncontrolled = 0;
};

/// One row of summary.csv: scalar results of a run.
struct SummaryRow {
    std::string label;
    std::string topology;
    std::size_t n_houses = 0;
    std::size_t n_clusters = 0;
    std::uint64_t seed = 0;
    double supply_w = 0.0;
    RunSummary summary;
    double mean_delay_s = 0.0;
    PacketCounters packets;
};

SummaryRow make_summary_row(const std::string& label, const ScenarioConfig& cfg, const MetricsLog& log);

void write_power_trace_csv(const MetricsLog& log, std::ostream& os);
void write_cluster_trace_csv(const MetricsLog& log, std::ostream& os);
void write_histogram_csv(const Histogram& h, std::ostream& os, const std::string& label = "");
/// Several labelled histograms in one file, padded to a common bin count.
void write_histograms_csv(std::span<const std::pair<std::string, Histogram>> hs, std::ostream& os);
void write_decisions_csv(const MetricsLog& log, std::ostream& os);
void write_delay_csv(std::span<const DelayRow> rows, std::ostream& os);
void write_throughput_csv(std::span<const ThroughputPoint> pts, std::ostream& os, std::uint64_t seed);
void write_summary_csv(std::span<const SummaryRow> rows, std::ostream& os);

/// Column names, units and descriptions of every CSV the tool writes.
nlohmann::ordered_json csv_schema();

nlohmann::ordered_json manifest(const ScenarioConfig& cfg, const std::vector<std::string>& files);

/// Writes a JSON document with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j);

/// Writes every per-run output of `run` into `dir` and returns the file names.
std::vector<std::string> write_run_outputs(const ScenarioConfig& cfg, const MetricsLog& log,
                                           const std::filesystem::path& dir);

}  // namespace drsim
