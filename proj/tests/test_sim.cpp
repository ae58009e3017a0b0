#include <doctest.h>

#include <cmath>

#include "drsim/sim.hpp"

using namespace drsim;

namespace {

/// Scenario whose loads never switch during the run.
ScenarioConfig static_scenario(std::size_t n, std::size_t clusters) {
    ScenarioConfig c;
    c.n_houses = n;
    c.n_clusters = clusters;
    c.topology = Topology::distributed;
    c.radio.ideal = true;
    c.load.mean_cycle_s = 1e15;
    c.trace_interval_s = c.radio.slot_duration_s();
    c.duration_s = 20.0 * c.control_period_s();
    return c;
}

double initial_demand(const ScenarioConfig& cfg) {
    Simulation probe(cfg);
    return probe.total_demand();
}

}  // namespace

TEST_CASE("scenario defaults") {
    ScenarioConfig c;
    c.n_houses = 5000;
    c.n_clusters = 9;
    CHECK(c.supply_limit() == doctest::Approx(0.9 * 5000 * 1200));
    CHECK(c.cluster_size() == 556);
    CHECK(c.effective_degree() == 556);
    CHECK(c.control_period_s() == doctest::Approx(2 * 556 * 0.0192));
    c.topology = Topology::centralized;
    c.n_clusters = 1;
    CHECK(c.control_period_s() == doctest::Approx(2 * 5000 * 0.0192));
    c.topology = Topology::centralized_2hop;
    CHECK(c.control_period_s() == doctest::Approx(4 * 5000 * 0.0192));
}

TEST_CASE("validation") {
    ScenarioConfig c;
    CHECK_NOTHROW(validate(c));
    c.n_houses = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = ScenarioConfig{};
    c.supply_limit_w = 0.0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = ScenarioConfig{};
    c.duration_s = 5.0 * c.control_period_s();
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = ScenarioConfig{};
    c.topology = Topology::centralized;
    c.n_clusters = 3;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = ScenarioConfig{};
    c.load.target_mean_w = 2000.0;
    CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("static over-limit load is brought under the limit within two periods") {
    for (auto act : {Actuation::gateway, Actuation::appliance}) {
        for (auto mode : {ControlMode::batch, ControlMode::iterative}) {
            CAPTURE(to_string(act));
            CAPTURE(to_string(mode));
            auto cfg = static_scenario(16, 4);
            cfg.actuation = act;
            cfg.mode = mode;
            cfg.supply_limit_w = initial_demand(cfg) - 50.0;
            const auto log = run(cfg);
            const double t0 = cfg.control_period_s();
            CHECK(log.trace.front().overload_w > 0.0);
            for (const auto& r : log.trace)
                if (r.time_s >= 2.0 * t0) CHECK(r.overload_w == 0.0);
        }
    }
}

TEST_CASE("ample supply never sheds") {
    auto cfg = static_scenario(40, 4);
    cfg.load.mean_cycle_s = 900.0;
    cfg.duration_s = 120.0;
    cfg.supply_limit_w = 40 * 1300.0;
    cfg.radio.ideal = false;
    const auto log = run(cfg);
    for (const auto& d : log.decisions) CHECK(d.n_off == 0);
    for (const auto& r : log.trace) CHECK(r.consumed_w == r.demand_w);
    CHECK(log.summary.mean_overload_w == 0.0);
}

TEST_CASE("overload is the positive part of consumption over the limit") {
    ScenarioConfig cfg;
    cfg.n_houses = 300;
    cfg.n_clusters = 3;
    cfg.duration_s = 300.0;
    const auto log = run(cfg);
    REQUIRE(!log.trace.empty());
    for (const auto& r : log.trace) CHECK(r.overload_w == std::max(0.0, r.consumed_w - r.limit_w));
    bool positive = false;
    for (const auto& r : log.trace) positive = positive || r.overload_w > 0.0;
    CHECK(positive);
}

TEST_CASE("root demand equals the sum of gateway records at every tick") {
    for (auto topo : {Topology::distributed, Topology::centralized}) {
        ScenarioConfig cfg;
        cfg.topology = topo;
        cfg.n_houses = 60;
        cfg.n_clusters = topo == Topology::distributed ? 6 : 1;
        cfg.degree = 2;
        cfg.duration_s = 40.0 * cfg.control_period_s();
        Simulation sim(cfg);
        std::size_t checked = 0;
        while (!sim.done()) {
            sim.step();
            const double flat = sim.flat_reported_demand();
            CHECK(sim.tree_reported_demand() == doctest::Approx(flat).epsilon(1e-12));
            ++checked;
        }
        CHECK(checked == sim.tick());
    }
}

TEST_CASE("consumption bookkeeping matches the houses") {
    ScenarioConfig cfg;
    cfg.n_houses = 80;
    cfg.n_clusters = 2;
    cfg.duration_s = 60.0;
    Simulation sim(cfg);
    while (!sim.done()) {
        sim.step();
        if (sim.tick() % 97 != 0) continue;
        double consumed = 0.0;
        double demand = 0.0;
        for (const auto& h : sim.houses()) {
            consumed += h.instantaneous_power();
            demand += h.demand();
        }
        CHECK(sim.total_consumed() == doctest::Approx(consumed));
        CHECK(sim.total_demand() == doctest::Approx(demand));
    }
}

TEST_CASE("runs are deterministic per seed") {
    ScenarioConfig cfg;
    cfg.n_houses = 200;
    cfg.n_clusters = 2;
    cfg.duration_s = 200.0;
    const auto a = run(cfg);
    const auto b = run(cfg);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].consumed_w == b.trace[i].consumed_w);
        CHECK(a.trace[i].demand_w == b.trace[i].demand_w);
    }
    CHECK(a.house_samples == b.house_samples);
    CHECK(a.delay.mean_s == b.delay.mean_s);
    cfg.seed = 2;
    const auto c = run(cfg);
    CHECK(c.house_samples != a.house_samples);
}

TEST_CASE("ideal control delay equals the period") {
    struct Case {
        Topology topo;
        std::size_t n;
        std::size_t clusters;
        std::size_t slots;
    };
    for (const auto& c : {Case{Topology::centralized, 16, 1, 32}, Case{Topology::centralized_2hop, 16, 1, 64},
                          Case{Topology::distributed, 16, 4, 8}, Case{Topology::distributed, 100, 4, 50}}) {
        for (auto mode : {ControlMode::batch, ControlMode::iterative}) {
            ScenarioConfig cfg;
            cfg.topology = c.topo;
            cfg.n_houses = c.n;
            cfg.n_clusters = c.clusters;
            cfg.mode = mode;
            cfg.radio.ideal = true;
            cfg.duration_s = 12.0 * cfg.control_period_s();
            const auto d = measure_control_delay(cfg);
            CHECK(d.mean_s == doctest::Approx(c.slots * 0.0192).epsilon(1e-12));
            CHECK(d.uncontrolled == 0);
            for (double g : d.per_gateway_mean_s) CHECK(g == doctest::Approx(c.slots * 0.0192).epsilon(1e-12));
        }
    }
}

TEST_CASE("lossy links lengthen the delay") {
    ScenarioConfig cfg;
    cfg.topology = Topology::centralized;
    cfg.n_houses = 200;
    cfg.duration_s = 40.0 * cfg.control_period_s();
    const auto d = measure_control_delay(cfg);
    CHECK(d.mean_s >= cfg.control_period_s() - 1e-9);
}

TEST_CASE("supply trace is piecewise constant") {
    ScenarioConfig cfg;
    cfg.n_houses = 500;
    cfg.supply_trace = {{0.0, 500000.0}, {100.0, 400000.0}, {200.0, 600000.0}};
    CHECK(cfg.supply_at(0.0) == 500000.0);
    CHECK(cfg.supply_at(99.9) == 500000.0);
    CHECK(cfg.supply_at(100.0) == 400000.0);
    CHECK(cfg.supply_at(1e6) == 600000.0);
    cfg.duration_s = 300.0;
    const auto log = run(cfg);
    for (const auto& r : log.trace) CHECK(r.limit_w == cfg.supply_at(r.time_s));
}

TEST_CASE("histogram") {
    CHECK_THROWS(power_histogram(std::vector<double>{}));
    const std::vector<double> zeros(100, 0.0);
    const auto h = power_histogram(zeros);
    REQUIRE(!h.probability.empty());
    CHECK(h.probability[0] == 1.0);
    for (std::size_t k = 1; k < h.probability.size(); ++k) CHECK(h.probability[k] == 0.0);

    const std::vector<double> mixed{0.0, 268.0, 268.0, 1099.0};
    const auto m = power_histogram(mixed, 10.0);
    CHECK(m.probability[m.bin_of(268.0)] == doctest::Approx(0.5));
    CHECK(m.probability[m.bin_of(1099.0)] == doctest::Approx(0.25));
    double total = 0.0;
    for (double p : m.probability) total += p;
    CHECK(total == doctest::Approx(1.0));
    CHECK(m.bin_center(m.bin_of(1099.0)) == doctest::Approx(1095.0));

    MetricsLog empty;
    CHECK_THROWS(power_histogram(empty));
}

TEST_CASE("uncontrolled houses average near the calibrated mean") {
    ScenarioConfig cfg;
    cfg.n_houses = 500;
    cfg.supply_limit_w = 1e9;
    cfg.duration_s = 1800.0;
    const auto log = run(cfg);
    double mean = 0.0;
    for (double w : log.house_samples) mean += w;
    mean /= static_cast<double>(log.house_samples.size());
    CHECK(mean == doctest::Approx(1200.0).epsilon(0.05));
}

TEST_CASE("spatial ordering keeps clusters contiguous and compact") {
    ScenarioConfig cfg;
    cfg.n_houses = 900;
    cfg.n_clusters = 9;
    cfg.duration_s = 100.0;
    Simulation sim(cfg);
    const auto houses = sim.houses();
    for (std::size_t i = 0; i < houses.size(); ++i) CHECK(houses[i].id() == i);
    // Average distance to the cluster controller stays well below that of a
    // random split of the square.
    double sum = 0.0;
    for (const auto& l : sim.links()) sum += l.distance();
    CHECK(sum / static_cast<double>(houses.size()) < 250.0);
}
