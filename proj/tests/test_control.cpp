#include <doctest.h>

#include <cmath>
#include <numeric>

#include "drsim/control.hpp"
#include "support.hpp"

using namespace drsim;
using drsim::testing::Gen;

namespace {

std::vector<ApplianceLoad> catalog_loads(std::uint32_t on_mask = 0b1111) {
    std::vector<ApplianceLoad> out;
    const auto cat = default_catalog();
    for (std::size_t k = 0; k < cat.size(); ++k) out.push_back({cat[k].rated_power_w, (on_mask >> k & 1u) != 0, cat[k].priority});
    return out;
}

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("build_tree shapes") {
    SUBCASE("16 houses in 4 clusters of 4") {
        const auto t = build_tree(16, 4, 4);
        CHECK(t.layers() == 2);
        CHECK(t.cluster_size() == 4);
        CHECK(t.n_clusters() == 4);
        CHECK(t.layer_size(1) == 1);
        CHECK(t.root().children.size() == 4);
    }
    SUBCASE("one cluster is a single controller") {
        for (std::size_t d : {2u, 5u, 100u}) {
            const auto t = build_tree(500, 1, d);
            CHECK(t.layers() == 1);
            CHECK(t.nodes().size() == 1);
            CHECK(t.root().is_bottom());
            CHECK(t.root().gateway_count() == 500);
        }
    }
    SUBCASE("5000 houses in 9 clusters") {
        const auto t = build_tree(5000, 9, 9);
        CHECK(t.layers() == 2);
        CHECK(t.cluster_size() == 556);
        std::size_t covered = 0;
        for (std::size_t k = 0; k < t.n_clusters(); ++k) {
            const auto& n = t.node(t.cluster_node(k));
            CHECK(n.first_gateway == covered);
            CHECK(n.gateway_count() <= 556);
            covered = n.last_gateway;
        }
        CHECK(covered == 5000);
    }
    SUBCASE("deeper trees respect the degree") {
        const auto t = build_tree(1000, 20, 3);
        CHECK(t.layers() == layer_count(20, 3));
        CHECK(t.layers() == 4);
        CHECK(t.layer_size(1) == 1);
        for (const auto& n : t.nodes()) CHECK(n.children.size() <= 3);
        for (std::size_t g = 0; g < 1000; ++g) {
            const auto& n = t.node(t.cluster_node(t.cluster_of(g)));
            CHECK(g >= n.first_gateway);
            CHECK(g < n.last_gateway);
        }
    }
    SUBCASE("invalid sizes") {
        CHECK_THROWS_AS(build_tree(0, 1, 2), std::invalid_argument);
        CHECK_THROWS_AS(build_tree(10, 0, 2), std::invalid_argument);
        CHECK_THROWS_AS(build_tree(10, 2, 1), std::invalid_argument);
        CHECK_THROWS_AS(build_tree(10, 11, 4), std::invalid_argument);
        CHECK_THROWS_AS(build_tree(10, 6, 4), std::invalid_argument);  // clusters of 2 leave the sixth empty
        CHECK_NOTHROW(build_tree(10, 4, 4));
    }
}

TEST_CASE("initial limits split the supply equally over clusters") {
    auto t = build_tree(5000, 9, 3);
    t.initialize_limits(9000.0);
    for (std::size_t k = 0; k < t.n_clusters(); ++k) CHECK(t.node(t.cluster_node(k)).assigned_limit == doctest::Approx(1000.0));
    CHECK(t.root().assigned_limit == 9000.0);
    for (const auto& n : t.nodes()) {
        if (n.is_bottom()) continue;
        double s = 0.0;
        for (auto c : n.children) s += t.node(c).assigned_limit;
        CHECK(s == doctest::Approx(n.assigned_limit));
    }
}

TEST_CASE("allocate_limits examples") {
    const std::vector<double> uni{1200, 1200, 1200, 1200};
    for (double s : allocate_limits(4320.0, uni)) CHECK(s == doctest::Approx(1080.0));

    const std::vector<double> c{100, 200, 300};
    const auto s = allocate_limits(540.0, c);
    CHECK(s[0] == doctest::Approx(80.0));
    CHECK(s[1] == doctest::Approx(180.0));
    CHECK(s[2] == doctest::Approx(280.0));
    const auto grid = testing::allocate_grid(540.0, c, 540);
    for (std::size_t i = 0; i < 3; ++i) CHECK(s[i] == doctest::Approx(grid[i]).epsilon(1e-9));

    const std::vector<double> skew{10, 500};
    const auto k = allocate_limits(400.0, skew);
    CHECK(k[0] == 0.0);
    CHECK(k[1] == doctest::Approx(400.0));
    const auto kg = testing::allocate_grid(400.0, skew, 4000);
    CHECK(kg[0] == doctest::Approx(0.0));

    const std::vector<double> same{3, 700, 12, 90};
    const auto id = allocate_limits(sum(same), same);
    for (std::size_t i = 0; i < same.size(); ++i) CHECK(id[i] == doctest::Approx(same[i]));

    CHECK_THROWS_AS(allocate_limits(10.0, std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(allocate_limits(-1.0, uni), std::invalid_argument);
}

TEST_CASE("allocate_limits equals the support-enumeration oracle") {
    Gen g(101);
    for (int i = 0; i < 1000; ++i) {
        const auto c = g.demands(g.size(1, 6));
        const double S = g.parent_limit(c);
        const auto s = allocate_limits(S, c);
        const auto o = testing::allocate_oracle(S, c);
        REQUIRE(s.size() == c.size());
        for (std::size_t j = 0; j < c.size(); ++j) {
            CHECK(std::abs(s[j] - o[j]) <= 1e-6);
            CHECK(s[j] >= 0.0);
        }
        CHECK(std::abs(sum(s) - S) <= 1e-9 * std::max(1.0, S));
    }
}

TEST_CASE("allocate_limits never loses to a dense grid on small instances") {
    Gen g(202);
    for (int i = 0; i < 100; ++i) {
        const auto c = g.demands(g.size(2, 3));
        const double S = g.parent_limit(c);
        const auto s = allocate_limits(S, c);
        const auto grid = testing::allocate_grid(S, c, c.size() == 2 ? 2000 : 300);
        CHECK(testing::squared_gap(s, c) <= testing::squared_gap(grid, c) + 1e-9);
    }
}

TEST_CASE("allocate_limits is monotone in demand and symmetric on ties") {
    Gen g(303);
    for (int i = 0; i < 500; ++i) {
        const auto c = g.demands(g.size(2, 12));
        const auto s = allocate_limits(g.parent_limit(c), c);
        for (std::size_t a = 0; a < c.size(); ++a)
            for (std::size_t b = 0; b < c.size(); ++b) {
                if (c[a] >= c[b]) CHECK(s[a] >= s[b] - 1e-9);
                if (c[a] == c[b]) CHECK(s[a] == doctest::Approx(s[b]));
            }
    }
}

TEST_CASE("allocate_limits conserves large instances") {
    Gen g(404);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> c(g.size(50, 600));
        for (auto& v : c) v = g.real(0.0, 1300.0);
        const double S = g.real(0.0, 1.2 * sum(c));
        const auto s = allocate_limits(S, c);
        CHECK(std::abs(sum(s) - S) <= 1e-9 * std::max(1.0, S));
    }
}

TEST_CASE("select_turnoff examples") {
    const auto loads = catalog_loads();
    SUBCASE("1080 W") {
        const auto d = select_turnoff(1080.0, loads);
        CHECK(d.n_off == 2);
        CHECK(d.shed == std::vector<bool>{true, true, false, false});
        CHECK(d.residual_overload == doctest::Approx(19.0));
        CHECK(d.consumption_after == doctest::Approx(1099.0));
        CHECK(d.setpoints == std::vector<double>{0.0, 0.0, 268.0, 831.0});
    }
    SUBCASE("1250 W") {
        const auto d = select_turnoff(1250.0, loads);
        CHECK(d.n_off == 1);
        CHECK(d.consumption_after == 1240.0);
        CHECK(d.residual_overload == 0.0);
    }
    SUBCASE("already under the limit") {
        const auto d = select_turnoff(1300.0, loads);
        CHECK(d.n_off == 0);
        CHECK(d.residual_overload == 0.0);
    }
    SUBCASE("off appliances are skipped") {
        const auto d = select_turnoff(1000.0, catalog_loads(0b1110));  // lamp off
        CHECK(d.n_off == 1);
        CHECK(d.shed == std::vector<bool>{false, true, false, false});
    }
}

TEST_CASE("select_turnoff equals exhaustive prefix search") {
    Gen g(505);
    for (int i = 0; i < 1000; ++i) {
        const auto loads = g.appliance_list(g.size(0, 20));
        double total = 0.0;
        for (const auto& l : loads) total += l.on ? l.power_w : 0.0;
        const double limit = g.real(0.0, total + 100.0);
        const auto d = select_turnoff(limit, loads);
        const auto o = testing::turnoff_oracle(limit, loads);
        CHECK(d.n_off == o.n_off);
        CHECK(d.shed == o.shed);
        CHECK(d.residual_overload == doctest::Approx(o.residual));
    }
}

TEST_CASE("high priority appliances are never shed") {
    Gen g(606);
    for (int i = 0; i < 500; ++i) {
        const auto loads = g.appliance_list(g.size(1, 20));
        const double limit = g.coin(0.3) ? 0.0 : g.real(0.0, 3000.0);
        const auto d = select_turnoff(limit, loads);
        double high = 0.0;
        for (std::size_t k = 0; k < loads.size(); ++k) {
            if (loads[k].priority == PriorityClass::high) CHECK_FALSE(d.shed[k]);
            if (loads[k].on && loads[k].priority == PriorityClass::high) high += loads[k].power_w;
        }
        // Residual only when the protected load alone is over the limit.
        if (d.residual_overload > 0.0) CHECK(high > limit);
        CHECK(d.residual_overload == doctest::Approx(std::max(0.0, d.consumption_after - limit)));
    }
}

TEST_CASE("aggregate_report") {
    CHECK(aggregate_report(std::vector<double>{100, 200, 300}) == 600.0);
    CHECK(aggregate_report(std::vector<double>{}) == 0.0);

    std::vector<ChildReport> r{{100, 0, true, 0}, {200, 0, true, 0}, {150, 1, true, 0}};
    CHECK(aggregate_report(r) == 450.0);

    SUBCASE("past the age cap the assigned limit stands in") {
        r[2].age = kDefaultStaleCap + 1;
        r[2].assigned_limit = 120.0;
        CHECK(aggregate_report(r) == 420.0);
        r[2].age = kDefaultStaleCap;
        CHECK(aggregate_report(r) == 450.0);
    }
    SUBCASE("never heard from") {
        r[2].known = false;
        r[2].assigned_limit = 95.0;
        CHECK(aggregate_report(r) == 395.0);
    }
}

namespace {

struct SixteenGateways {
    std::vector<HouseGateway> houses;
    ControlNetwork net;
};

// 16 single-appliance gateways in 4 clusters of 4; every fourth appliance is
// protected.
SixteenGateways sixteen_gateways(Actuation act, double supply) {
    std::vector<HouseGateway> houses;
    for (std::size_t i = 0; i < 16; ++i) {
        ApplianceSpec s;
        s.name = "a" + std::to_string(i);
        s.rated_power_w = 50.0 + 25.0 * static_cast<double>(i % 5);
        s.priority = i % 4 == 3 ? PriorityClass::high : PriorityClass::low;
        s.rank = 0;
        houses.emplace_back(i, Position{}, std::vector<Appliance>{testing::static_appliance(s, true)});
    }
    ControlNetwork net(build_tree(16, 4, 4), houses, act, supply);
    return {std::move(houses), std::move(net)};
}

double total_power(std::span<const HouseGateway> hs) {
    double s = 0.0;
    for (const auto& h : hs) s += h.instantaneous_power();
    return s;
}

std::vector<std::uint32_t> shed_state(std::span<const HouseGateway> hs) {
    std::vector<std::uint32_t> out;
    for (const auto& h : hs) out.push_back(h.forced_mask());
    return out;
}

}  // namespace

TEST_CASE("16-appliance example settles within two control periods") {
    for (auto act : {Actuation::appliance, Actuation::gateway}) {
        for (auto mode : {ControlMode::batch, ControlMode::iterative}) {
            CAPTURE(to_string(act));
            CAPTURE(to_string(mode));
            auto [houses, net] = sixteen_gateways(act, 900.0);
            const double demand = total_power(houses);
            REQUIRE(demand > 900.0);
            std::vector<std::vector<std::uint32_t>> states;
            std::vector<std::vector<double>> limits;
            for (int p = 0; p < 5; ++p) {
                net.control_round(houses, mode);
                states.push_back(shed_state(houses));
                std::vector<double> l;
                for (std::size_t k = 0; k < net.n_clusters(); ++k) l.push_back(net.cluster(k).limit());
                limits.push_back(l);
            }
            for (int p = 2; p < 5; ++p) {
                CHECK(states[p] == states[1]);
                for (std::size_t k = 0; k < 4; ++k) CHECK(limits[p][k] == doctest::Approx(limits[1][k]));
            }
            if (act == Actuation::appliance) CHECK(total_power(houses) <= 900.0 + 1e-9);
        }
    }
}

TEST_CASE("batch and iterative reach the same fixed point on static loads") {
    Gen g(707);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<HouseGateway> base;
        const std::size_t n = g.size(4, 40);
        for (std::size_t i = 0; i < n; ++i) base.push_back(testing::static_house(i, static_cast<std::uint32_t>(g.integer(0, 15))));
        double demand = 0.0;
        for (const auto& h : base) demand += h.demand();
        const double supply = g.real(0.5, 1.1) * demand;
        const std::size_t clusters = g.size(1, std::min<std::size_t>(4, n / 2));
        for (auto act : {Actuation::appliance, Actuation::gateway}) {
            auto a = base;
            auto b = base;
            ControlNetwork batch(build_tree(n, clusters, 2), a, act, supply);
            ControlNetwork iter(build_tree(n, clusters, 2), b, act, supply);
            for (int p = 0; p < 4; ++p) {
                batch.control_round(a, ControlMode::batch);
                iter.control_round(b, ControlMode::iterative);
            }
            CHECK(shed_state(a) == shed_state(b));
            for (std::size_t k = 0; k < batch.n_clusters(); ++k)
                CHECK(batch.cluster(k).limit() == doctest::Approx(iter.cluster(k).limit()));
        }
    }
}

TEST_CASE("no turn-offs when demand is within the supply") {
    Gen g(808);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<HouseGateway> houses;
        for (std::size_t i = 0; i < 24; ++i) houses.push_back(testing::static_house(i, static_cast<std::uint32_t>(g.integer(0, 15))));
        for (auto act : {Actuation::appliance, Actuation::gateway}) {
            for (auto mode : {ControlMode::batch, ControlMode::iterative}) {
                auto hs = houses;
                ControlNetwork net(build_tree(24, 3, 3), hs, act, 24 * 1300.0);
                net.control_round(hs, mode);
                for (const auto& h : hs) CHECK(h.forced_mask() == 0u);
            }
        }
    }
}

TEST_CASE("global objective with ideal communication") {
    Gen g(909);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = g.size(4, 60);
        std::vector<HouseGateway> houses;
        for (std::size_t i = 0; i < n; ++i) houses.push_back(testing::static_house(i, static_cast<std::uint32_t>(g.integer(0, 15))));
        double demand = 0.0;
        for (const auto& h : houses) demand += h.demand();
        const double supply = g.real(0.3, 1.0) * demand;
        const std::size_t clusters = g.size(1, std::min<std::size_t>(6, n));
        for (auto act : {Actuation::appliance, Actuation::gateway}) {
            auto hs = houses;
            ControlNetwork net(build_tree(n, clusters, 3), hs, act, supply);
            for (int p = 0; p < 3; ++p) net.control_round(hs, ControlMode::batch);
            double after = 0.0;
            double residual = 0.0;
            for (std::size_t k = 0; k < net.n_clusters(); ++k) {
                const auto& cc = net.cluster(k);
                const auto& node = net.tree().node(net.tree().cluster_node(k));
                residual += cc.last_decision().residual_overload_w;
                double high = 0.0;
                double cluster_power = 0.0;
                for (std::size_t j = node.first_gateway; j < node.last_gateway; ++j) {
                    cluster_power += hs[j].instantaneous_power();
                    for (const auto& a : hs[j].appliances())
                        if (a.state.on && a.spec.priority == PriorityClass::high) high += a.spec.rated_power_w;
                }
                after += cluster_power;
                if (act == Actuation::appliance && cc.last_decision().residual_overload_w > 0.0)
                    CHECK(high > cc.limit());
                if (act == Actuation::gateway) {
                    // Each gateway is its own bottom decision here.
                    for (std::size_t j = node.first_gateway; j < node.last_gateway; ++j) {
                        double hj = 0.0;
                        for (const auto& a : hs[j].appliances())
                            if (a.state.on && a.spec.priority == PriorityClass::high) hj += a.spec.rated_power_w;
                        const double lim = cc.command(j - node.first_gateway).limit_w;
                        if (hs[j].instantaneous_power() > lim + 1e-9) CHECK(hj > lim);
                    }
                }
            }
            CHECK(after <= supply + residual + 1e-6);
        }
    }
}

TEST_CASE("stale gateways are held at their stand-in value") {
    auto cat = default_catalog();
    ClusterController cc({cat, cat, cat}, Actuation::gateway);
    cc.initialize(3000.0);
    cc.set_limit(3000.0);
    cc.receive(0, 0b1111);
    cc.receive(1, 0b1111);
    cc.receive(2, 0b1111);
    CHECK(cc.aggregate() == 3900.0);
    cc.decide();
    cc.end_period();
    const double held = cc.report(2).assigned_limit;
    for (int p = 0; p < kDefaultStaleCap + 2; ++p) {
        cc.receive(0, 0b1111);
        cc.receive(1, 0b1111);
        cc.decide();
        cc.end_period();
    }
    CHECK_FALSE(is_usable(cc.report(2)));
    CHECK(cc.report(2).assigned_limit == doctest::Approx(held));
    CHECK(cc.aggregate() == doctest::Approx(2600.0 + held));
}

TEST_CASE("decision records cover every controller") {
    auto houses = std::vector<HouseGateway>{};
    for (std::size_t i = 0; i < 27; ++i) houses.push_back(testing::static_house(i, 0b1111));
    ControlNetwork net(build_tree(27, 9, 3), houses, Actuation::gateway, 27 * 1000.0);
    std::vector<DecisionRecord> log;
    net.control_round(houses, ControlMode::batch, &log);
    CHECK(log.size() == net.tree().nodes().size());
    for (const auto& r : log) CHECK(r.period == 0);
    net.control_round(houses, ControlMode::iterative, &log);
    CHECK(log.back().period == 1);
}
