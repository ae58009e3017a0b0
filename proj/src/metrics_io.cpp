#include "drsim/metrics_io.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>

#include <fmt/format.h>

#include "drsim/config.hpp"

namespace drsim {

using nlohmann::ordered_json;

SummaryRow make_summary_row(const std::string& label, const ScenarioConfig& cfg, const MetricsLog& log) {
    SummaryRow r;
    r.label = label;
    r.topology = to_string(cfg.topology);
    r.n_houses = cfg.n_houses;
    r.n_clusters = cfg.effective_clusters();
    r.seed = cfg.seed;
    r.supply_w = cfg.supply_limit();
    r.summary = log.summary;
    r.mean_delay_s = log.delay.mean_s;
    r.packets = log.packets;
    return r;
}

void write_power_trace_csv(const MetricsLog& log, std::ostream& os) {
    os << "tick,time_s,demand_w,consumed_w,limit_w,overload_w\n";
    for (const auto& r : log.trace)
        os << fmt::format("{},{:.4f},{:.3f},{:.3f},{:.3f},{:.3f}\n", r.tick, r.time_s, r.demand_w, r.consumed_w,
                          r.limit_w, r.overload_w);
}

void write_cluster_trace_csv(const MetricsLog& log, std::ostream& os) {
    os << "tick,time_s,cluster,limit_w,reported_w,consumed_w\n";
    for (const auto& r : log.clusters)
        os << fmt::format("{},{:.4f},{},{:.3f},{:.3f},{:.3f}\n", r.tick, r.time_s, r.cluster, r.limit_w,
                          r.reported_w, r.consumed_w);
}

void write_histogram_csv(const Histogram& h, std::ostream& os, const std::string& label) {
    const std::pair<std::string, Histogram> one{label, h};
    write_histograms_csv(std::span(&one, 1), os);
}

void write_histograms_csv(std::span<const std::pair<std::string, Histogram>> hs, std::ostream& os) {
    os << "label,bin_lo_w,bin_hi_w,probability\n";
    for (const auto& [label, h] : hs) {
        for (std::size_t k = 0; k < h.probability.size(); ++k) {
            const double lo = static_cast<double>(k) * h.bin_width_w;
            os << fmt::format("{},{:.3f},{:.3f},{:.9f}\n", label, lo, lo + h.bin_width_w, h.probability[k]);
        }
    }
}

void write_decisions_csv(const MetricsLog& log, std::ostream& os) {
    os << "period,node_id,layer,limit_in_w,reported_w,limits_out_w,n_off,residual_w\n";
    for (const auto& d : log.decisions)
        os << fmt::format("{},{},{},{:.3f},{:.3f},{:.3f},{},{:.3f}\n", d.period, d.node_id, d.layer, d.limit_in_w,
                          d.reported_w, d.limits_out_w, d.n_off, d.residual_w);
}

void write_delay_csv(std::span<const DelayRow> rows, std::ostream& os) {
    os << "label,topology,n_houses,n_clusters,cluster_size,seed,period_s,mean_delay_s,response_latency_s,"
          "uncontrolled\n";
    for (const auto& r : rows)
        os << fmt::format("{},{},{},{},{},{},{:.4f},{:.4f},{:.4f},{}\n", r.label, r.topology, r.n_houses,
                          r.n_clusters, r.cluster_size, r.seed, r.period_s, r.mean_delay_s, r.response_latency_s,
                          r.uncontrolled);
}

void write_throughput_csv(std::span<const ThroughputPoint> pts, std::ostream& os, std::uint64_t seed) {
    os << "seed,distance_m,one_hop_kbps,two_hop_kbps,one_hop_expected_kbps,two_hop_expected_kbps\n";
    for (const auto& p : pts)
        os << fmt::format("{},{:.3f},{:.6f},{:.6f},{:.6f},{:.6f}\n", seed, p.distance_m, p.one_hop_kbps,
                          p.two_hop_kbps, p.one_hop_expected_kbps, p.two_hop_expected_kbps);
}

void write_summary_csv(std::span<const SummaryRow> rows, std::ostream& os) {
    os << "label,topology,n_houses,n_clusters,seed,supply_w,mean_demand_w,mean_consumed_w,mean_overload_w,"
          "max_overload_w,overload_fraction,mean_delay_s,uplink_delivery,downlink_delivery\n";
    auto ratio = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
    for (const auto& r : rows) {
        const auto& s = r.summary;
        os << fmt::format("{},{},{},{},{},{:.3f},{:.3f},{:.3f},{:.3f},{:.3f},{:.9f},{:.4f},{:.9f},{:.9f}\n", r.label,
                          r.topology, r.n_houses, r.n_clusters, r.seed, r.supply_w, s.mean_demand_w,
                          s.mean_consumed_w, s.mean_overload_w, s.max_overload_w, ratio(s.overload_ticks, s.ticks),
                          r.mean_delay_s, ratio(r.packets.uplink_delivered, r.packets.uplink_attempts),
                          ratio(r.packets.downlink_delivered, r.packets.downlink_attempts));
    }
}

namespace {

ordered_json col(const char* name, const char* unit, const char* desc) {
    return {{"name", name}, {"unit", unit}, {"description", desc}};
}

}  // namespace

ordered_json csv_schema() {
    ordered_json s;
    s["version"] = kVersion;
    s["format"] = "comma separated, header row, SI units, fixed decimals";
    s["files"]["power_trace.csv"] = {
        col("tick", "slot", "slot index at the sample"),
        col("time_s", "s", "simulated time"),
        col("demand_w", "W", "power all appliances would draw without control"),
        col("consumed_w", "W", "power actually drawn"),
        col("limit_w", "W", "supply limit in force"),
        col("overload_w", "W", "max(0, consumed_w - limit_w)"),
    };
    s["files"]["cluster_trace.csv"] = {
        col("tick", "slot", "slot index at the sample"),
        col("time_s", "s", "simulated time"),
        col("cluster", "index", "bottom-layer cluster"),
        col("limit_w", "W", "limit currently assigned to the cluster"),
        col("reported_w", "W", "demand the cluster controller currently believes"),
        col("consumed_w", "W", "power actually drawn by the cluster's houses"),
    };
    s["files"]["histogram.csv"] = {
        col("label", "text", "run the histogram belongs to"),
        col("bin_lo_w", "W", "inclusive lower bin edge"),
        col("bin_hi_w", "W", "exclusive upper bin edge"),
        col("probability", "1", "fraction of per-house samples in the bin"),
    };
    s["files"]["decisions.csv"] = {
        col("period", "count", "control period of the decision"),
        col("node_id", "index", "controller node (layer-major, root is 0)"),
        col("layer", "index", "controller layer, 1 is the root"),
        col("limit_in_w", "W", "limit the node works against"),
        col("reported_w", "W", "aggregate demand the node used"),
        col("limits_out_w", "W", "sum of limits or planned consumption handed down"),
        col("n_off", "count", "appliances shed by the decision"),
        col("residual_w", "W", "overload that shedding cannot remove"),
    };
    s["files"]["delay_vs_n.csv"] = {
        col("label", "text", "series name"),
        col("topology", "text", "centralized, centralized_2hop or distributed"),
        col("n_houses", "count", "houses in the scenario"),
        col("n_clusters", "count", "bottom-layer clusters"),
        col("cluster_size", "count", "houses per cluster"),
        col("seed", "count", "RNG seed, 0 for the across-seed mean"),
        col("period_s", "s", "control period of the frame"),
        col("mean_delay_s", "s", "mean time between consecutive closed control loops per gateway"),
        col("response_latency_s", "s", "mean time from report delivery to the matching command"),
        col("uncontrolled", "count", "gateways that never received a command"),
    };
    s["files"]["throughput_vs_d.csv"] = {
        col("seed", "count", "RNG seed, 0 for the across-seed mean"),
        col("distance_m", "m", "gateway to controller distance"),
        col("one_hop_kbps", "kbit/s", "Monte Carlo goodput, direct link"),
        col("two_hop_kbps", "kbit/s", "Monte Carlo goodput, relayed through the midpoint"),
        col("one_hop_expected_kbps", "kbit/s", "closed form without shadowing, direct link"),
        col("two_hop_expected_kbps", "kbit/s", "closed form without shadowing, relayed"),
    };
    s["files"]["summary.csv"] = {
        col("label", "text", "run or series name"),
        col("topology", "text", "centralized, centralized_2hop or distributed"),
        col("n_houses", "count", "houses in the scenario"),
        col("n_clusters", "count", "bottom-layer clusters"),
        col("seed", "count", "RNG seed, 0 for the across-seed mean"),
        col("supply_w", "W", "supply limit"),
        col("mean_demand_w", "W", "time-averaged uncontrolled demand"),
        col("mean_consumed_w", "W", "time-averaged consumption"),
        col("mean_overload_w", "W", "time-averaged overload"),
        col("max_overload_w", "W", "largest overload at any tick"),
        col("overload_fraction", "1", "fraction of ticks with positive overload"),
        col("mean_delay_s", "s", "mean control delay"),
        col("uplink_delivery", "1", "delivered over attempted uplink packets"),
        col("downlink_delivery", "1", "delivered over attempted downlink packets"),
    };
    s["files"]["frame.csv"] = {
        col("slot", "slot", "slot index within the period"),
        col("start_s", "s", "slot start time within the period"),
        col("channel", "index", "orthogonal channel, one per cluster"),
        col("kind", "text", "uplink, downlink or backbone"),
        col("gateway", "index", "gateway index within the channel, -1 for backbone"),
        col("hop", "index", "hop of a relayed transmission"),
    };
    return s;
}

ordered_json manifest(const ScenarioConfig& cfg, const std::vector<std::string>& files) {
    ordered_json m;
    m["tool"] = "drsim";
    m["version"] = kVersion;
    m["seed"] = cfg.seed;
    ordered_json echo = ordered_json::object();
    for (const auto& [k, v] : config_entries(cfg)) echo[k] = v;
    m["config"] = echo;
    m["files"] = files;
    return m;
}

void write_json(const std::filesystem::path& path, const ordered_json& j) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
    os << j.dump(2) << "\n";
    if (!os) throw std::runtime_error("error writing '" + path.string() + "'");
}

namespace {

template <class F>
void write_file(const std::filesystem::path& path, F&& body) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
    body(os);
    if (!os) throw std::runtime_error("error writing '" + path.string() + "'");
}

}  // namespace

std::vector<std::string> write_run_outputs(const ScenarioConfig& cfg, const MetricsLog& log,
                                           const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> files;
    auto emit = [&](const std::string& name, auto&& body) {
        write_file(dir / name, body);
        files.push_back(name);
    };
    emit("power_trace.csv", [&](std::ostream& os) { write_power_trace_csv(log, os); });
    emit("cluster_trace.csv", [&](std::ostream& os) { write_cluster_trace_csv(log, os); });
    emit("decisions.csv", [&](std::ostream& os) { write_decisions_csv(log, os); });
    if (!log.house_samples.empty())
        emit("histogram.csv", [&](std::ostream& os) {
            write_histogram_csv(power_histogram(log, cfg.histogram_bin_w), os, "run");
        });
    emit("delay_vs_n.csv", [&](std::ostream& os) {
        const DelayRow row{"run",          to_string(cfg.topology), cfg.n_houses,
                           cfg.effective_clusters(), cfg.cluster_size(), cfg.seed,
                           log.delay.period_s, log.delay.mean_s, log.delay.response_latency_s,
                           log.delay.uncontrolled};
        write_delay_csv(std::span(&row, 1), os);
    });
    emit("summary.csv", [&](std::ostream& os) {
        const auto row = make_summary_row("run", cfg, log);
        write_summary_csv(std::span(&row, 1), os);
    });
    emit("config.txt", [&](std::ostream& os) { os << render_config(cfg); });
    write_json(dir / "schema.json", csv_schema());
    files.push_back("schema.json");
    files.push_back("manifest.json");
    write_json(dir / "manifest.json", manifest(cfg, files));
    return files;
}

}  // namespace drsim
