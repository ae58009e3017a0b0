#include "drsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>

namespace drsim {

// ---------------------------------------------------------------------------
// ScenarioConfig

std::size_t ScenarioConfig::effective_clusters() const {
    return topology == Topology::distributed ? n_clusters : 1;
}

std::size_t ScenarioConfig::cluster_size() const {
    const std::size_t k = std::max<std::size_t>(1, effective_clusters());
    return (n_houses + k - 1) / k;
}

std::size_t ScenarioConfig::effective_degree() const {
    return degree != 0 ? degree : std::max<std::size_t>(2, cluster_size());
}

double ScenarioConfig::supply_limit() const {
    return supply_limit_w ? *supply_limit_w : 0.9 * static_cast<double>(n_houses) * load.target_mean_w;
}

double ScenarioConfig::control_period_s() const {
    const std::size_t per_channel = topology == Topology::distributed ? cluster_size() : n_houses;
    return 2.0 * static_cast<double>(per_channel) * hops_of(topology) * radio.slot_duration_s();
}

double ScenarioConfig::supply_at(double t) const {
    if (supply_trace.empty()) return supply_limit();
    auto it = std::upper_bound(supply_trace.begin(), supply_trace.end(), t,
                               [](double v, const SupplyPoint& p) { return v < p.time_s; });
    if (it == supply_trace.begin()) return supply_trace.front().supply_w;
    return std::prev(it)->supply_w;
}

void validate(const ScenarioConfig& cfg) {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (cfg.n_houses == 0) fail("scenario.n_houses must be >= 1");
    if (!(cfg.area_side_m > 0.0)) fail("scenario.area_side must be > 0");
    if (cfg.n_clusters == 0) fail("scenario.n_clusters must be >= 1");
    if (cfg.topology != Topology::distributed && cfg.n_clusters != 1)
        fail("centralized topologies use a single controller; scenario.n_clusters must be 1");
    if (cfg.effective_clusters() > cfg.n_houses) fail("scenario.n_clusters exceeds scenario.n_houses");
    if (cfg.effective_clusters() > 1 && cfg.effective_degree() < 2) fail("scenario.degree must be >= 2");
    if (cfg.stale_cap < 0) fail("control.stale_cap must be >= 0");
    if (!(cfg.supply_limit() > 0.0)) fail("scenario.supply_limit must be > 0");
    for (const auto& p : cfg.supply_trace)
        if (!(p.supply_w > 0.0)) fail("supply trace values must be > 0");
    if (!(cfg.backbone_latency_s >= 0.0)) fail("backbone.latency must be >= 0");
    if (!(cfg.trace_interval_s > 0.0)) fail("output.trace_interval must be > 0");
    if (!(cfg.house_sample_interval_s > 0.0)) fail("output.house_sample_interval must be > 0");
    if (!(cfg.histogram_bin_w > 0.0)) fail("output.histogram_bin must be > 0");
    try {
        cfg.radio.validate();
        validate_catalog(cfg.load.catalog);
        calibrate_duty(cfg.load.catalog, cfg.load.target_mean_w, cfg.load.pinned);
        if (!(cfg.load.mean_cycle_s > 0.0)) fail("load.mean_cycle must be > 0");
        build_tree(cfg.n_houses, cfg.effective_clusters(), cfg.effective_degree());
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        fail(e.what());
    }
    if (cfg.duration_s < 10.0 * cfg.control_period_s() * (1.0 - 1e-12))
        fail("scenario.duration must cover at least 10 control periods (" +
             std::to_string(10.0 * cfg.control_period_s()) + " s)");
}

// ---------------------------------------------------------------------------

void order_houses_for_clusters(std::vector<HouseGateway>& houses, const ControlTree& tree) {
    const std::size_t k = tree.n_clusters();
    if (k <= 1 || houses.size() != tree.n_houses()) return;
    const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(k))));
    std::sort(houses.begin(), houses.end(), [](const HouseGateway& a, const HouseGateway& b) {
        return a.position().x != b.position().x ? a.position().x < b.position().x : a.id() < b.id();
    });
    std::size_t cluster = 0;
    std::size_t begin = 0;
    for (std::size_t c = 0; c < cols && cluster < k; ++c) {
        const std::size_t in_col = k / cols + (c < k % cols ? 1 : 0);
        std::size_t end = begin;
        for (std::size_t i = 0; i < in_col && cluster < k; ++i, ++cluster)
            end += tree.node(tree.cluster_node(cluster)).gateway_count();
        std::sort(houses.begin() + static_cast<std::ptrdiff_t>(begin), houses.begin() + static_cast<std::ptrdiff_t>(end),
                  [](const HouseGateway& a, const HouseGateway& b) {
                      return a.position().y != b.position().y ? a.position().y < b.position().y : a.id() < b.id();
                  });
        begin = end;
    }
    for (std::size_t i = 0; i < houses.size(); ++i) houses[i].set_id(i);
}

// ---------------------------------------------------------------------------

namespace {

struct SwitchEvent {
    std::int64_t tick;
    std::uint32_t house;
    std::uint32_t appliance;
    bool operator>(const SwitchEvent& o) const {
        if (tick != o.tick) return tick > o.tick;
        if (house != o.house) return house > o.house;
        return appliance > o.appliance;
    }
};

struct InFlight {
    bool ok = false;
    std::uint32_t mask = 0;
    Command cmd;
};

struct PendingLimits {
    std::int64_t arrival;
    std::vector<double> limits;
};

}  // namespace

struct Simulation::Impl {
    ScenarioConfig cfg;
    double slot = 0.0;
    std::int64_t total_ticks = 0;
    std::int64_t tick = 0;
    std::int64_t trace_every = 1;
    std::int64_t sample_every = 1;
    std::int64_t latency_ticks = 0;
    std::size_t period = 0;

    std::vector<HouseGateway> houses;
    std::unique_ptr<ControlNetwork> network;
    Frame frame;
    std::vector<Link> links;
    std::vector<Stream> fading;
    std::vector<InFlight> inflight;
    std::vector<std::size_t> channel_first;
    std::priority_queue<SwitchEvent, std::vector<SwitchEvent>, std::greater<>> events;
    std::deque<PendingLimits> pending;

    std::vector<double> house_power;
    std::vector<double> house_demand;
    std::vector<double> cluster_power;
    std::vector<std::size_t> cluster_of;
    double consumed = 0.0;
    double demand = 0.0;

    std::vector<std::int64_t> last_closure;
    std::vector<std::int64_t> report_tick;
    std::vector<std::uint32_t> sent_mask;
    std::vector<std::int64_t> delay_ticks_sum;
    std::vector<std::size_t> delay_count;
    std::vector<std::size_t> closures;
    std::int64_t latency_sum = 0;
    std::size_t latency_count = 0;

    double sum_demand = 0.0;
    double sum_consumed = 0.0;
    double sum_supply = 0.0;
    double sum_overload = 0.0;

    MetricsLog log;

    explicit Impl(ScenarioConfig c) : cfg(std::move(c)) {
        validate(cfg);
        slot = cfg.radio.slot_duration_s();
        total_ticks = static_cast<std::int64_t>(std::llround(cfg.duration_s / slot));
        trace_every = std::max<std::int64_t>(1, std::llround(cfg.trace_interval_s / slot));
        sample_every = std::max<std::int64_t>(1, std::llround(cfg.house_sample_interval_s / slot));
        latency_ticks = std::llround(cfg.backbone_latency_s / slot);

        auto tree = build_tree(cfg.n_houses, cfg.effective_clusters(), cfg.effective_degree());
        houses = make_houses(cfg.n_houses, cfg.area_side_m, cfg.load, cfg.seed);
        if (cfg.spatial_clusters) order_houses_for_clusters(houses, tree);

        std::vector<Position> controller(tree.n_clusters());
        for (std::size_t k = 0; k < tree.n_clusters(); ++k) {
            const auto& node = tree.node(tree.cluster_node(k));
            if (cfg.topology != Topology::distributed) {
                controller[k] = {cfg.area_side_m / 2.0, cfg.area_side_m / 2.0};
                continue;
            }
            Position sum{};
            for (std::size_t g = node.first_gateway; g < node.last_gateway; ++g) {
                sum.x += houses[g].position().x;
                sum.y += houses[g].position().y;
            }
            const auto n = static_cast<double>(node.gateway_count());
            controller[k] = {sum.x / n, sum.y / n};
        }

        cluster_of.resize(cfg.n_houses);
        links.reserve(cfg.n_houses);
        for (std::size_t g = 0; g < cfg.n_houses; ++g) {
            cluster_of[g] = tree.cluster_of(g);
            const auto p = houses[g].position();
            const auto c = controller[cluster_of[g]];
            const double d = std::max(1.0, std::hypot(p.x - c.x, p.y - c.y));
            Stream shadow(cfg.seed, stream_ns::shadowing | g);
            links.emplace_back(d, hops_of(cfg.topology), cfg.radio, shadow);
        }

        frame = build_frame(cfg.topology, cfg.n_houses, tree.cluster_size(), slot, cfg.mode);
        const double supply0 = cfg.supply_at(0.0);
        network = std::make_unique<ControlNetwork>(std::move(tree), houses, cfg.actuation, supply0, cfg.stale_cap);

        const std::size_t per_channel = frame.channel_sizes.front();
        for (std::size_t c = 0; c < frame.n_channels(); ++c) {
            fading.emplace_back(cfg.seed, stream_ns::fading | c);
            channel_first.push_back(c * per_channel);
        }
        inflight.assign(frame.n_channels(), InFlight{});

        house_power.resize(cfg.n_houses);
        house_demand.resize(cfg.n_houses);
        cluster_power.assign(network->n_clusters(), 0.0);
        for (std::size_t g = 0; g < cfg.n_houses; ++g) {
            house_power[g] = houses[g].instantaneous_power();
            house_demand[g] = houses[g].demand();
            consumed += house_power[g];
            demand += house_demand[g];
            cluster_power[cluster_of[g]] += house_power[g];
            const auto apps = houses[g].appliances();
            for (std::size_t k = 0; k < apps.size(); ++k) schedule(g, k);
        }

        last_closure.assign(cfg.n_houses, -1);
        report_tick.assign(cfg.n_houses, -1);
        sent_mask.assign(cfg.n_houses, 0);
        delay_ticks_sum.assign(cfg.n_houses, 0);
        delay_count.assign(cfg.n_houses, 0);
        closures.assign(cfg.n_houses, 0);

        log.slot_duration_s = slot;
        log.n_houses = cfg.n_houses;
        log.n_clusters = network->n_clusters();
    }

    void schedule(std::size_t g, std::size_t k) {
        const double t = houses[g].appliances()[k].state.next_switch_s;
        if (!std::isfinite(t)) return;
        const std::int64_t at = std::llround(t / slot);
        if (at > total_ticks) return;
        events.push({at, static_cast<std::uint32_t>(g), static_cast<std::uint32_t>(k)});
    }

    void refresh_house(std::size_t g) {
        const double p = houses[g].instantaneous_power();
        const double d = houses[g].demand();
        consumed += p - house_power[g];
        demand += d - house_demand[g];
        cluster_power[cluster_of[g]] += p - house_power[g];
        house_power[g] = p;
        house_demand[g] = d;
    }

    void resync_totals() {
        consumed = std::accumulate(house_power.begin(), house_power.end(), 0.0);
        demand = std::accumulate(house_demand.begin(), house_demand.end(), 0.0);
        std::fill(cluster_power.begin(), cluster_power.end(), 0.0);
        for (std::size_t g = 0; g < house_power.size(); ++g) cluster_power[cluster_of[g]] += house_power[g];
    }

    void log_bottom(std::size_t k) {
        const auto& cc = network->cluster(k);
        const auto& d = cc.last_decision();
        const auto id = network->tree().cluster_node(k);
        log.decisions.push_back({period, id, network->tree().layers(), cc.limit(), cc.aggregate(),
                                 d.planned_consumption_w, d.n_off, d.residual_overload_w});
    }

    void backbone_exchange(double now, bool last_of_period) {
        network->set_supply(cfg.supply_at(now));
        network->refresh_reports();
        const bool record = cfg.mode == ControlMode::batch || last_of_period;
        auto limits = network->allocate_top_down(record ? &log.decisions : nullptr, period);
        if (latency_ticks == 0)
            network->set_cluster_limits(limits);
        else
            pending.push_back({tick + latency_ticks, std::move(limits)});
        if (cfg.mode == ControlMode::batch) {
            for (std::size_t k = 0; k < network->n_clusters(); ++k) {
                network->cluster(k).decide();
                log_bottom(k);
            }
        }
    }

    void step() {
        const double now = static_cast<double>(tick) * slot;
        const auto s = static_cast<std::size_t>(tick % static_cast<std::int64_t>(frame.period_slots));

        while (!events.empty() && events.top().tick <= tick) {
            const auto ev = events.top();
            events.pop();
            auto& a = houses[ev.house].appliances()[ev.appliance];
            a.advance_to(a.state.next_switch_s);
            refresh_house(ev.house);
            schedule(ev.house, ev.appliance);
        }

        while (!pending.empty() && pending.front().arrival <= tick) {
            network->set_cluster_limits(pending.front().limits);
            pending.pop_front();
        }

        if (frame.is_backbone_slot(s)) backbone_exchange(now, s == frame.backbone_slots.back());

        for (std::size_t c = 0; c < frame.n_channels(); ++c) {
            const auto* a = frame.at(c, s);
            if (!a) continue;
            const std::size_t g = channel_first[c] + a->gateway;
            const std::size_t local = a->gateway;
            auto& cc = network->cluster(cluster_of[g]);
            auto& fl = inflight[c];
            if (a->hop == 0) {
                if (a->direction == Direction::uplink) {
                    fl.mask = houses[g].on_mask();
                    sent_mask[g] = fl.mask;
                } else {
                    fl.cmd = cfg.mode == ControlMode::iterative ? cc.decide_for(local) : cc.command(local);
                }
                fl.ok = links[g].try_hop(0, cfg.radio, fading[c]);
            } else if (fl.ok) {
                fl.ok = links[g].try_hop(a->hop, cfg.radio, fading[c]);
            }
            if (!a->completes) continue;

            if (a->direction == Direction::uplink) {
                ++log.packets.uplink_attempts;
                if (fl.ok) {
                    ++log.packets.uplink_delivered;
                    cc.receive(local, fl.mask);
                    report_tick[g] = tick + 1;
                }
            } else {
                ++log.packets.downlink_attempts;
                if (fl.ok) {
                    ++log.packets.downlink_delivered;
                    apply_command(houses[g], fl.cmd, cfg.actuation, sent_mask[g]);
                    refresh_house(g);
                    const auto& r = cc.report(local);
                    if (r.known && r.age == 0) {
                        const std::int64_t closed = tick + 1;
                        if (last_closure[g] >= 0) {
                            delay_ticks_sum[g] += closed - last_closure[g];
                            ++delay_count[g];
                        }
                        last_closure[g] = closed;
                        ++closures[g];
                        latency_sum += closed - report_tick[g];
                        ++latency_count;
                    }
                }
            }
        }

        if (s + 1 == frame.period_slots) {
            if (cfg.mode == ControlMode::iterative)
                for (std::size_t k = 0; k < network->n_clusters(); ++k) log_bottom(k);
            for (std::size_t k = 0; k < network->n_clusters(); ++k) network->cluster(k).end_period();
            ++period;
        }

        const double supply = cfg.supply_at(now);
        if (tick % trace_every == 0) resync_totals();
        const double overload = std::max(0.0, consumed - supply);
        sum_demand += demand;
        sum_consumed += consumed;
        sum_supply += supply;
        sum_overload += overload;
        log.summary.max_overload_w = std::max(log.summary.max_overload_w, overload);
        if (overload > 0.0) ++log.summary.overload_ticks;

        if (tick % trace_every == 0) {
            log.trace.push_back({static_cast<std::size_t>(tick), now, demand, consumed, supply, overload});
            for (std::size_t k = 0; k < network->n_clusters(); ++k)
                log.clusters.push_back({static_cast<std::size_t>(tick), now, k, network->cluster(k).limit(),
                                        network->cluster(k).aggregate(), cluster_power[k]});
        }
        if (tick % sample_every == 0) log.house_samples.insert(log.house_samples.end(), house_power.begin(), house_power.end());
        ++tick;
    }

    MetricsLog finish() {
        while (tick < total_ticks) step();
        auto& sm = log.summary;
        sm.ticks = static_cast<std::size_t>(tick);
        sm.periods = period;
        const double n = tick > 0 ? static_cast<double>(tick) : 1.0;
        sm.mean_demand_w = sum_demand / n;
        sm.mean_consumed_w = sum_consumed / n;
        sm.mean_supply_w = sum_supply / n;
        sm.mean_overload_w = sum_overload / n;

        auto& d = log.delay;
        d.period_s = frame.period_s();
        d.per_gateway_mean_s.assign(cfg.n_houses, 0.0);
        d.closures = closures;
        std::int64_t all_ticks = 0;
        std::size_t all_count = 0;
        for (std::size_t g = 0; g < cfg.n_houses; ++g) {
            if (closures[g] == 0) ++d.uncontrolled;
            if (delay_count[g] == 0) continue;
            d.per_gateway_mean_s[g] =
                static_cast<double>(delay_ticks_sum[g]) / static_cast<double>(delay_count[g]) * slot;
            all_ticks += delay_ticks_sum[g];
            all_count += delay_count[g];
        }
        d.mean_s = all_count ? static_cast<double>(all_ticks) / static_cast<double>(all_count) * slot : 0.0;
        d.response_latency_s =
            latency_count ? static_cast<double>(latency_sum) / static_cast<double>(latency_count) * slot : 0.0;
        return std::move(log);
    }
};

Simulation::Simulation(ScenarioConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}
Simulation::~Simulation() = default;
Simulation::Simulation(Simulation&&) noexcept = default;
Simulation& Simulation::operator=(Simulation&&) noexcept = default;

bool Simulation::done() const { return impl_->tick >= impl_->total_ticks; }
void Simulation::step() { impl_->step(); }
MetricsLog Simulation::finish() { return impl_->finish(); }
std::size_t Simulation::tick() const { return static_cast<std::size_t>(impl_->tick); }
double Simulation::time_s() const { return static_cast<double>(impl_->tick) * impl_->slot; }
const ScenarioConfig& Simulation::config() const { return impl_->cfg; }
const Frame& Simulation::frame() const { return impl_->frame; }
const ControlNetwork& Simulation::network() const { return *impl_->network; }
std::span<const HouseGateway> Simulation::houses() const { return impl_->houses; }
std::span<const Link> Simulation::links() const { return impl_->links; }
double Simulation::total_consumed() const { return impl_->consumed; }
double Simulation::total_demand() const { return impl_->demand; }

double Simulation::tree_reported_demand() {
    impl_->network->refresh_reports();
    return impl_->network->tree().root().reported_consumption;
}

double Simulation::flat_reported_demand() const {
    double s = 0.0;
    const auto& net = *impl_->network;
    for (std::size_t k = 0; k < net.n_clusters(); ++k)
        for (std::size_t j = 0; j < net.cluster(k).size(); ++j)
            s += effective_value(net.cluster(k).report(j), impl_->cfg.stale_cap);
    return s;
}

MetricsLog run(const ScenarioConfig& cfg) { return Simulation(cfg).finish(); }

DelayStats measure_control_delay(const ScenarioConfig& cfg) { return run(cfg).delay; }

// ---------------------------------------------------------------------------

Histogram power_histogram(std::span<const double> samples, double bin_width_w) {
    if (samples.empty()) throw std::invalid_argument("power_histogram: no samples");
    if (!(bin_width_w > 0.0)) throw std::invalid_argument("power_histogram: bin width must be > 0");
    Histogram h;
    h.bin_width_w = bin_width_w;
    double max_w = 0.0;
    for (double w : samples) {
        if (!(w >= 0.0)) throw std::invalid_argument("power_histogram: negative sample");
        max_w = std::max(max_w, w);
    }
    h.probability.assign(h.bin_of(max_w) + 1, 0.0);
    std::vector<std::size_t> counts(h.probability.size(), 0);
    for (double w : samples) ++counts[h.bin_of(w)];
    const auto n = static_cast<double>(samples.size());
    for (std::size_t k = 0; k < counts.size(); ++k) h.probability[k] = static_cast<double>(counts[k]) / n;
    return h;
}

Histogram power_histogram(const MetricsLog& log, double bin_width_w) {
    if (log.house_samples.empty()) throw std::invalid_argument("power_histogram: empty metrics log");
    return power_histogram(log.house_samples, bin_width_w);
}

std::vector<ThroughputPoint> throughput_sweep(const RadioConfig& radio, std::span<const double> distances,
                                              std::size_t trials, std::uint64_t seed) {
    if (trials == 0) throw std::invalid_argument("throughput_sweep: trials must be >= 1");
    const double ceiling = radio.goodput_ceiling_bps() / 1000.0;
    std::vector<ThroughputPoint> out;
    out.reserve(distances.size());
    for (double d : distances) {
        if (!(d > 0.0)) throw std::invalid_argument("throughput_sweep: distances must be > 0");
        // Same stream for every distance: each trial sees the same draws.
        Stream one(seed, stream_ns::sweep | 1);
        Stream two(seed, stream_ns::sweep | 2);
        std::size_t ok1 = 0;
        std::size_t ok2 = 0;
        for (std::size_t i = 0; i < trials; ++i) {
            const double z = radio.shadowing_sigma_db * one.normal();
            Stream fade1 = one;  // fading draw follows the shadowing draw
            if (packet_trial(d, z, radio, fade1).success) ++ok1;
            one();
            one();

            bool both = true;
            for (int h = 0; h < 2; ++h) {
                const double zh = radio.shadowing_sigma_db * two.normal();
                Stream fade2 = two;
                both = packet_trial(d / 2.0, zh, radio, fade2).success && both;
                two();
                two();
            }
            if (both) ++ok2;
        }
        ThroughputPoint p;
        p.distance_m = d;
        p.one_hop_kbps = ceiling * static_cast<double>(ok1) / static_cast<double>(trials);
        p.two_hop_kbps = ceiling / 2.0 * static_cast<double>(ok2) / static_cast<double>(trials);
        p.one_hop_expected_kbps = expected_throughput_kbps(d, radio, 1);
        p.two_hop_expected_kbps = expected_throughput_kbps(d, radio, 2);
        out.push_back(p);
    }
    return out;
}

}  // namespace drsim
