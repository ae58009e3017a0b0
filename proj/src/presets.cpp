#include "drsim/presets.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "drsim/config.hpp"
#include "drsim/metrics_io.hpp"

namespace drsim {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::vector<std::uint64_t> Preset::seed_list() const {
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < seeds; ++i) out.push_back(base_seed + i);
    return out;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {"fig6", "fig7", "fig8", "fig9", "fig10", "fig11"};
    return names;
}

double duration_for(const ScenarioConfig& cfg, double wanted) {
    return std::max(wanted, 11.0 * cfg.control_period_s());
}

namespace {

constexpr double kHour = 3600.0;

ScenarioConfig scenario(Topology topo, std::size_t n, std::size_t clusters) {
    ScenarioConfig c;
    c.topology = topo;
    c.n_houses = n;
    c.n_clusters = clusters;
    return c;
}

std::vector<std::size_t> n_sweep(std::initializer_list<std::size_t> ns) { return ns; }

void add(Preset& p, std::string label, ScenarioConfig cfg, const PresetOptions& opts) {
    cfg.duration_s = duration_for(cfg, opts.duration_s.value_or(kHour));
    p.runs.push_back({std::move(label), std::move(cfg)});
}

}  // namespace

Preset make_preset(const std::string& name, const PresetOptions& opts) {
    if (opts.seeds == 0) throw std::invalid_argument("preset needs at least one seed");
    Preset p;
    p.name = name;
    p.seeds = opts.seeds;
    p.base_seed = opts.base_seed;

    const auto tens = n_sweep({500, 1000, 1500, 2000, 2500, 3000, 3500, 4000, 4500, 5000});

    if (name == "fig6") {
        p.description = "goodput against distance, direct and relayed links";
        p.kind = PresetKind::throughput;
        for (double d = 10.0; d <= 2000.0; d += 10.0) p.distances_m.push_back(d);
        p.trials = opts.trials.value_or(2000);
        ScenarioConfig c;
        c.duration_s = duration_for(c, opts.duration_s.value_or(kHour));
        p.runs.push_back({"link", c});
    } else if (name == "fig7") {
        p.description = "control delay against number of houses";
        for (std::size_t n : tens) {
            add(p, fmt::format("centralized_n{}", n), scenario(Topology::centralized, n, 1), opts);
            add(p, fmt::format("centralized_2hop_n{}", n), scenario(Topology::centralized_2hop, n, 1), opts);
            add(p, fmt::format("distributed_n{}", n), scenario(Topology::distributed, n, std::max<std::size_t>(1, n / 500)),
                opts);
        }
    } else if (name == "fig8") {
        p.description = "power traces of the centralized schemes";
        p.write_traces = true;
        for (std::size_t n : n_sweep({500, 1000, 2000, 3000, 4000, 5000})) {
            add(p, fmt::format("centralized_n{}", n), scenario(Topology::centralized, n, 1), opts);
            add(p, fmt::format("centralized_2hop_n{}", n), scenario(Topology::centralized_2hop, n, 1), opts);
        }
    } else if (name == "fig9") {
        p.description = "power traces of the distributed scheme";
        p.write_traces = true;
        for (std::size_t n : tens) {
            const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(n) / 555.0)));
            add(p, fmt::format("distributed_n{}", n), scenario(Topology::distributed, n, k), opts);
        }
    } else if (name == "fig10") {
        p.description = "overload against cluster size at 5000 houses";
        p.write_traces = true;
        add(p, "clusters_4", scenario(Topology::distributed, 5000, 4), opts);
        add(p, "clusters_9", scenario(Topology::distributed, 5000, 9), opts);
    } else if (name == "fig11") {
        p.description = "per-house power distribution";
        p.write_histograms = true;
        auto open = scenario(Topology::distributed, 5000, 9);
        open.supply_limit_w = 2.0 * 5000 * total_rated_power(open.load.catalog);
        add(p, "uncontrolled", open, opts);
        add(p, "centralized", scenario(Topology::centralized, 5000, 1), opts);
        add(p, "distributed", scenario(Topology::distributed, 5000, 9), opts);
    } else {
        std::string known;
        for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
        throw std::invalid_argument("unknown preset '" + name + "' (known: " + known + ")");
    }
    for (auto& r : p.runs) validate(r.cfg);
    return p;
}

namespace {

struct TaskResult {
    SummaryRow summary;
    DelayRow delay;
    std::vector<TraceRow> trace;
    std::optional<Histogram> histogram;
    std::vector<ThroughputPoint> throughput;
};

template <class F>
void write_file(const fs::path& path, F&& body) {
    fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
    body(os);
    if (!os) throw std::runtime_error("error writing '" + path.string() + "'");
}

std::string seed_dir(std::uint64_t seed) { return fmt::format("seed_{}", seed); }

TaskResult run_task(const Preset& preset, const PresetRun& run, std::uint64_t seed, const fs::path& out) {
    TaskResult r;
    ScenarioConfig cfg = run.cfg;
    cfg.seed = seed;
    if (preset.kind == PresetKind::throughput) {
        r.throughput = throughput_sweep(cfg.radio, preset.distances_m, preset.trials, seed);
        return r;
    }
    const MetricsLog log = drsim::run(cfg);
    r.summary = make_summary_row(run.label, cfg, log);
    r.delay = {run.label,          to_string(cfg.topology), cfg.n_houses,       cfg.effective_clusters(),
               cfg.cluster_size(), seed,                    log.delay.period_s, log.delay.mean_s,
               log.delay.response_latency_s, log.delay.uncontrolled};
    if (preset.write_traces) {
        r.trace = log.trace;
        write_file(out / seed_dir(seed) / fmt::format("power_trace_{}.csv", run.label),
                   [&](std::ostream& os) { write_power_trace_csv(log, os); });
        write_file(out / seed_dir(seed) / fmt::format("cluster_trace_{}.csv", run.label),
                   [&](std::ostream& os) { write_cluster_trace_csv(log, os); });
    }
    if (preset.write_histograms) r.histogram = power_histogram(log, cfg.histogram_bin_w);
    return r;
}

SummaryRow mean_summary(std::span<const TaskResult> rs) {
    SummaryRow m = rs.front().summary;
    m.seed = 0;
    RunSummary s;
    PacketCounters pk;
    double delay = 0.0;
    for (const auto& r : rs) {
        const auto& x = r.summary.summary;
        s.ticks += x.ticks;
        s.periods += x.periods;
        s.overload_ticks += x.overload_ticks;
        s.mean_demand_w += x.mean_demand_w;
        s.mean_consumed_w += x.mean_consumed_w;
        s.mean_supply_w += x.mean_supply_w;
        s.mean_overload_w += x.mean_overload_w;
        s.max_overload_w += x.max_overload_w;
        delay += r.summary.mean_delay_s;
        pk.uplink_attempts += r.summary.packets.uplink_attempts;
        pk.uplink_delivered += r.summary.packets.uplink_delivered;
        pk.downlink_attempts += r.summary.packets.downlink_attempts;
        pk.downlink_delivered += r.summary.packets.downlink_delivered;
    }
    const double n = static_cast<double>(rs.size());
    s.mean_demand_w /= n;
    s.mean_consumed_w /= n;
    s.mean_supply_w /= n;
    s.mean_overload_w /= n;
    s.max_overload_w /= n;
    m.summary = s;
    m.mean_delay_s = delay / n;
    m.packets = pk;
    return m;
}

DelayRow mean_delay(std::span<const TaskResult> rs) {
    DelayRow m = rs.front().delay;
    m.seed = 0;
    m.mean_delay_s = m.response_latency_s = 0.0;
    m.uncontrolled = 0;
    for (const auto& r : rs) {
        m.mean_delay_s += r.delay.mean_delay_s;
        m.response_latency_s += r.delay.response_latency_s;
        m.uncontrolled += r.delay.uncontrolled;
    }
    const double n = static_cast<double>(rs.size());
    m.mean_delay_s /= n;
    m.response_latency_s /= n;
    m.uncontrolled = static_cast<std::size_t>(std::lround(static_cast<double>(m.uncontrolled) / n));
    return m;
}

Histogram mean_histogram(std::span<const TaskResult> rs) {
    Histogram h;
    h.bin_width_w = rs.front().histogram->bin_width_w;
    for (const auto& r : rs) {
        const auto& p = r.histogram->probability;
        if (p.size() > h.probability.size()) h.probability.resize(p.size(), 0.0);
        for (std::size_t k = 0; k < p.size(); ++k) h.probability[k] += p[k];
    }
    for (auto& v : h.probability) v /= static_cast<double>(rs.size());
    return h;
}

MetricsLog mean_trace(std::span<const TaskResult> rs) {
    MetricsLog log;
    log.trace = rs.front().trace;
    for (std::size_t i = 1; i < rs.size(); ++i) {
        const auto& t = rs[i].trace;
        const std::size_t n = std::min(t.size(), log.trace.size());
        log.trace.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            log.trace[k].demand_w += t[k].demand_w;
            log.trace[k].consumed_w += t[k].consumed_w;
            log.trace[k].limit_w += t[k].limit_w;
            log.trace[k].overload_w += t[k].overload_w;
        }
    }
    const double n = static_cast<double>(rs.size());
    for (auto& row : log.trace) {
        row.demand_w /= n;
        row.consumed_w /= n;
        row.limit_w /= n;
        row.overload_w /= n;
    }
    return log;
}

}  // namespace

std::vector<std::string> run_preset(const Preset& preset, const fs::path& out, unsigned jobs, std::ostream* progress) {
    const auto seeds = preset.seed_list();
    const std::size_t n_tasks = preset.runs.size() * seeds.size();
    std::vector<TaskResult> results(n_tasks);
    std::vector<std::exception_ptr> errors(n_tasks);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> finished{0};
    std::mutex progress_mu;
    fs::create_directories(out);

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_tasks) return;
            const auto& run = preset.runs[i / seeds.size()];
            const auto seed = seeds[i % seeds.size()];
            try {
                results[i] = run_task(preset, run, seed, out);
            } catch (...) {
                errors[i] = std::current_exception();
            }
            const auto done = ++finished;
            if (progress) {
                std::lock_guard lock(progress_mu);
                *progress << fmt::format("[{}/{}] {} {} seed {}\n", done, n_tasks, preset.name, run.label, seed);
            }
        }
    };
    jobs = std::clamp<unsigned>(jobs, 1, static_cast<unsigned>(std::max<std::size_t>(1, n_tasks)));
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<std::string> files;
    auto emit = [&](const fs::path& rel, auto&& body) {
        write_file(out / rel, body);
        files.push_back(rel.generic_string());
    };
    auto result = [&](std::size_t run, std::size_t seed) -> const TaskResult& {
        return results[run * seeds.size() + seed];
    };
    auto across_seeds = [&](std::size_t run) {
        return std::span<const TaskResult>(results.data() + run * seeds.size(), seeds.size());
    };

    if (preset.kind == PresetKind::throughput) {
        std::vector<ThroughputPoint> mean(preset.distances_m.size());
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const auto& pts = result(0, s).throughput;
            emit(fs::path(seed_dir(seeds[s])) / "throughput_vs_d.csv",
                 [&](std::ostream& os) { write_throughput_csv(pts, os, seeds[s]); });
            for (std::size_t k = 0; k < pts.size(); ++k) {
                mean[k].distance_m = pts[k].distance_m;
                mean[k].one_hop_kbps += pts[k].one_hop_kbps / static_cast<double>(seeds.size());
                mean[k].two_hop_kbps += pts[k].two_hop_kbps / static_cast<double>(seeds.size());
                mean[k].one_hop_expected_kbps = pts[k].one_hop_expected_kbps;
                mean[k].two_hop_expected_kbps = pts[k].two_hop_expected_kbps;
            }
        }
        emit("throughput_vs_d.csv", [&](std::ostream& os) { write_throughput_csv(mean, os, 0); });
    } else {
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            std::vector<SummaryRow> sums;
            std::vector<DelayRow> delays;
            std::vector<std::pair<std::string, Histogram>> hists;
            for (std::size_t r = 0; r < preset.runs.size(); ++r) {
                sums.push_back(result(r, s).summary);
                delays.push_back(result(r, s).delay);
                if (result(r, s).histogram) hists.emplace_back(preset.runs[r].label, *result(r, s).histogram);
                if (preset.write_traces) {
                    files.push_back((fs::path(seed_dir(seeds[s])) / fmt::format("power_trace_{}.csv", preset.runs[r].label))
                                        .generic_string());
                    files.push_back(
                        (fs::path(seed_dir(seeds[s])) / fmt::format("cluster_trace_{}.csv", preset.runs[r].label))
                            .generic_string());
                }
            }
            const fs::path dir = seed_dir(seeds[s]);
            emit(dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(sums, os); });
            emit(dir / "delay_vs_n.csv", [&](std::ostream& os) { write_delay_csv(delays, os); });
            if (!hists.empty()) emit(dir / "histogram.csv", [&](std::ostream& os) { write_histograms_csv(hists, os); });
        }
        std::vector<SummaryRow> sums;
        std::vector<DelayRow> delays;
        std::vector<std::pair<std::string, Histogram>> hists;
        for (std::size_t r = 0; r < preset.runs.size(); ++r) {
            const auto rs = across_seeds(r);
            sums.push_back(mean_summary(rs));
            delays.push_back(mean_delay(rs));
            if (preset.write_histograms) hists.emplace_back(preset.runs[r].label, mean_histogram(rs));
            if (preset.write_traces)
                emit(fmt::format("power_trace_{}.csv", preset.runs[r].label),
                     [&](std::ostream& os) { write_power_trace_csv(mean_trace(rs), os); });
        }
        emit("summary.csv", [&](std::ostream& os) { write_summary_csv(sums, os); });
        emit("delay_vs_n.csv", [&](std::ostream& os) { write_delay_csv(delays, os); });
        if (!hists.empty()) emit("histogram.csv", [&](std::ostream& os) { write_histograms_csv(hists, os); });
    }

    write_json(out / "schema.json", csv_schema());
    files.push_back("schema.json");
    files.push_back("manifest.json");

    ordered_json m;
    m["tool"] = "drsim";
    m["version"] = kVersion;
    m["preset"] = preset.name;
    m["description"] = preset.description;
    m["seeds"] = seeds;
    if (preset.kind == PresetKind::throughput) {
        m["trials_per_distance"] = preset.trials;
        m["distances_m"] = preset.distances_m;
    }
    ordered_json runs = ordered_json::array();
    for (const auto& r : preset.runs) {
        ordered_json cfg = ordered_json::object();
        for (const auto& [k, v] : config_entries(r.cfg))
            if (k != "scenario.seed") cfg[k] = v;
        runs.push_back({{"label", r.label}, {"config", cfg}});
    }
    m["runs"] = runs;
    m["files"] = files;
    write_json(out / "manifest.json", m);
    return files;
}

}  // namespace drsim
