#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "drsim/control.hpp"
#include "drsim/link_model.hpp"
#include "drsim/load_model.hpp"
#include "drsim/tdma.hpp"

namespace drsim {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SupplyPoint {
    double time_s = 0.0;
    double supply_w = 0.0;
};

struct ScenarioConfig {
    double area_side_m = 1000.0;
    std::size_t n_houses = 500;
    Topology topology = Topology::distributed;
    std::size_t n_clusters = 1;
    std::size_t degree = 0;  // 0: same as the cluster size
    ControlMode mode = ControlMode::batch;
    Actuation actuation = Actuation::gateway;
    int stale_cap = kDefaultStaleCap;
    std::optional<double> supply_limit_w;  // default 0.9 * n_houses * target mean
    std::string supply_trace_path;         // optional piecewise-constant supply
    std::vector<SupplyPoint> supply_trace;
    double duration_s = 3600.0;
    std::uint64_t seed = 1;
    RadioConfig radio;
    double backbone_latency_s = 0.0;
    LoadConfig load;
    bool spatial_clusters = true;  // give each cluster a compact patch of the area
    double trace_interval_s = 1.0;
    double house_sample_interval_s = 60.0;
    double histogram_bin_w = 10.0;

    std::size_t effective_clusters() const;
    std::size_t cluster_size() const;
    std::size_t effective_degree() const;
    double supply_limit() const;
    /// Control period for this topology (seconds).
    double control_period_s() const;
    double supply_at(double t) const;
};

/// Throws ConfigError describing the first violated constraint.
void validate(const ScenarioConfig& cfg);

struct TraceRow {
    std::size_t tick = 0;
    double time_s = 0.0;
    double demand_w = 0.0;
    double consumed_w = 0.0;
    double limit_w = 0.0;
    double overload_w = 0.0;
};

struct ClusterRow {
    std::size_t tick = 0;
    double time_s = 0.0;
    std::size_t cluster = 0;
    double limit_w = 0.0;
    double reported_w = 0.0;
    double consumed_w = 0.0;
};

struct DelayStats {
    double period_s = 0.0;
    double mean_s = 0.0;              // over every closed loop of every gateway
    double response_latency_s = 0.0;  // uplink delivery to matching command
    std::vector<double> per_gateway_mean_s;  // 0 where no loop ever closed twice
    std::vector<std::size_t> closures;
    std::size_t uncontrolled = 0;  // gateways that never received a fresh command
};

struct PacketCounters {
    std::size_t uplink_attempts = 0;
    std::size_t uplink_delivered = 0;
    std::size_t downlink_attempts = 0;
    std::size_t downlink_delivered = 0;
};

struct RunSummary {
    std::size_t ticks = 0;
    std::size_t periods = 0;
    double mean_demand_w = 0.0;
    double mean_consumed_w = 0.0;
    double mean_supply_w = 0.0;
    double mean_overload_w = 0.0;
    double max_overload_w = 0.0;
    std::size_t overload_ticks = 0;
};

struct MetricsLog {
    double slot_duration_s = 0.0;
    std::size_t n_houses = 0;
    std::size_t n_clusters = 0;
    std::vector<TraceRow> trace;
    std::vector<ClusterRow> clusters;
    std::vector<double> house_samples;  // per-house instantaneous power snapshots
    DelayStats delay;
    PacketCounters packets;
    RunSummary summary;
    std::vector<DecisionRecord> decisions;
};

/// Reorders houses so contiguous index blocks of the tree's clusters cover
/// compact column/row patches of the area. Ids are renumbered.
void order_houses_for_clusters(std::vector<HouseGateway>& houses, const ControlTree& tree);

/// Slot-accurate simulation of one scenario.
class Simulation {
public:
    explicit Simulation(ScenarioConfig cfg);
    ~Simulation();
    Simulation(Simulation&&) noexcept;
    Simulation& operator=(Simulation&&) noexcept;

    bool done() const;
    /// Advance one slot.
    void step();
    /// Run to the end and return the metrics.
    MetricsLog finish();

    std::size_t tick() const;
    double time_s() const;
    const ScenarioConfig& config() const;
    const Frame& frame() const;
    const ControlNetwork& network() const;
    std::span<const HouseGateway> houses() const;
    std::span<const Link> links() const;
    double total_consumed() const;
    double total_demand() const;

    /// Root demand aggregated through the tree of controllers.
    double tree_reported_demand();
    /// Same quantity summed directly over every gateway record.
    double flat_reported_demand() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

MetricsLog run(const ScenarioConfig& cfg);

DelayStats measure_control_delay(const ScenarioConfig& cfg);

struct Histogram {
    double bin_width_w = 10.0;
    std::vector<double> probability;  // bin k covers [k*w, (k+1)*w)

    double bin_center(std::size_t k) const { return (static_cast<double>(k) + 0.5) * bin_width_w; }
    std::size_t bin_of(double w) const { return static_cast<std::size_t>(w / bin_width_w); }
};

Histogram power_histogram(std::span<const double> samples, double bin_width_w = 10.0);
Histogram power_histogram(const MetricsLog& log, double bin_width_w = 10.0);

struct ThroughputPoint {
    double distance_m = 0.0;
    double one_hop_kbps = 0.0;
    double two_hop_kbps = 0.0;
    double one_hop_expected_kbps = 0.0;  // no shadowing, closed form
    double two_hop_expected_kbps = 0.0;
};

/// Monte Carlo goodput per distance, averaging over shadowing and fading.
/// Uses common random numbers across distances.
std::vector<ThroughputPoint> throughput_sweep(const RadioConfig& radio, std::span<const double> distances,
                                              std::size_t trials, std::uint64_t seed);

}  // namespace drsim
