#pragma once

// Independent reference implementations and random instance generators used
// by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "drsim/control.hpp"
#include "drsim/load_model.hpp"
#include "drsim/rng.hpp"

namespace drsim::testing {

/// Exact minimizer of sum (s_i - c_i)^2 s.t. sum s = S, s >= 0, by trying
/// every support set. For a fixed support A the constrained optimum is
/// s_i = c_i + (S - sum_A c) / |A| on A and 0 elsewhere; the global optimum is
/// the best feasible support.
inline std::vector<double> allocate_oracle(double S, std::span<const double> c) {
    const std::size_t n = c.size();
    std::vector<double> best(n, 0.0);
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        double sum = 0.0;
        int count = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1u) {
                sum += c[i];
                ++count;
            }
        const double shift = (S - sum) / count;
        std::vector<double> s(n, 0.0);
        bool ok = true;
        double cost = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask >> i & 1u) {
                s[i] = c[i] + shift;
                if (s[i] < -1e-12) ok = false;
            }
            cost += (s[i] - c[i]) * (s[i] - c[i]);
        }
        if (ok && cost < best_cost) {
            best_cost = cost;
            best = s;
        }
    }
    return best;
}

/// Coarse grid search over the feasible set for two or three children.
/// Returns the best grid point; the step is S / steps.
inline std::vector<double> allocate_grid(double S, std::span<const double> c, int steps) {
    const std::size_t n = c.size();
    std::vector<double> best;
    double best_cost = std::numeric_limits<double>::infinity();
    const double h = S / steps;
    auto consider = [&](const std::vector<double>& s) {
        double cost = 0.0;
        for (std::size_t i = 0; i < n; ++i) cost += (s[i] - c[i]) * (s[i] - c[i]);
        if (cost < best_cost) {
            best_cost = cost;
            best = s;
        }
    };
    if (n == 2) {
        for (int a = 0; a <= steps; ++a) consider({a * h, S - a * h});
    } else if (n == 3) {
        for (int a = 0; a <= steps; ++a)
            for (int b = 0; a + b <= steps; ++b) consider({a * h, b * h, S - (a + b) * h});
    }
    return best;
}

inline double squared_gap(std::span<const double> s, std::span<const double> c) {
    double cost = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) cost += (s[i] - c[i]) * (s[i] - c[i]);
    return cost;
}

struct TurnoffOracle {
    std::size_t n_off = 0;
    std::vector<bool> shed;
    double residual = 0.0;
};

/// Tries every prefix count of eligible (on, low) appliances in list order
/// and keeps the feasible one with the smallest squared gap to the limit.
/// When none is feasible every eligible appliance is shed.
inline TurnoffOracle turnoff_oracle(double limit, std::span<const ApplianceLoad> loads) {
    std::vector<std::size_t> eligible;
    double total = 0.0;
    for (std::size_t i = 0; i < loads.size(); ++i) {
        if (loads[i].on) total += loads[i].power_w;
        if (loads[i].on && loads[i].priority == PriorityClass::low) eligible.push_back(i);
    }
    TurnoffOracle best;
    double best_gap = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t k = 0; k <= eligible.size(); ++k) {
        double after = total;
        for (std::size_t j = 0; j < k; ++j) after -= loads[eligible[j]].power_w;
        if (after > limit) continue;
        const double gap = (limit - after) * (limit - after);
        if (gap < best_gap) {
            best_gap = gap;
            best.n_off = k;
            found = true;
        }
    }
    if (!found) best.n_off = eligible.size();
    best.shed.assign(loads.size(), false);
    double after = total;
    for (std::size_t j = 0; j < best.n_off; ++j) {
        best.shed[eligible[j]] = true;
        after -= loads[eligible[j]].power_w;
    }
    best.residual = std::max(0.0, after - limit);
    return best;
}

// ---------------------------------------------------------------------------
// Generators

struct Gen {
    Stream rng;
    explicit Gen(std::uint64_t seed) : rng(seed, 0xC0FFEE) {}

    std::size_t size(std::size_t lo, std::size_t hi) {
        return lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(hi - lo + 1));
    }
    double real(double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }
    int integer(int lo, int hi) { return lo + static_cast<int>(rng.uniform() * (hi - lo + 1)); }
    bool coin(double p = 0.5) { return rng.uniform() < p; }

    /// Integer demands in [0, 1000], occasionally with repeated values.
    std::vector<double> demands(std::size_t n) {
        std::vector<double> c(n);
        for (auto& v : c) v = integer(0, 1000);
        if (n > 1 && coin(0.2)) c[1] = c[0];
        return c;
    }

    /// A parent limit that is sometimes far below, near, or above the total.
    double parent_limit(std::span<const double> c) {
        const double sum = std::accumulate(c.begin(), c.end(), 0.0);
        switch (integer(0, 3)) {
            case 0: return real(0.0, 0.2 * sum + 1.0);
            case 1: return real(0.5 * sum, 1.5 * sum + 1.0);
            case 2: return sum;
            default: return integer(0, 6000);
        }
    }

    /// Rank-sorted list: lows first, then highs, random powers and states.
    std::vector<ApplianceLoad> appliance_list(std::size_t n) {
        const std::size_t n_low = size(0, n);
        std::vector<ApplianceLoad> out;
        for (std::size_t i = 0; i < n; ++i)
            out.push_back({static_cast<double>(integer(1, 1500)), coin(0.7),
                           i < n_low ? PriorityClass::low : PriorityClass::high});
        return out;
    }
};

// ---------------------------------------------------------------------------
// Static houses for control tests

/// Appliance that never switches by itself.
inline Appliance static_appliance(const ApplianceSpec& spec, bool on) {
    Appliance a;
    a.spec = spec;
    a.process = SwitchProcess{0.0, 0.0, 0};
    a.state.on = on;
    a.state.next_switch_s = std::numeric_limits<double>::infinity();
    return a;
}

/// House with the default catalog; bit k of `on_mask` turns on the k-th
/// entry in rank order (lamp, television, refrigerator, air conditioner).
inline HouseGateway static_house(std::size_t id, std::uint32_t on_mask,
                                 const std::vector<ApplianceSpec>& catalog = default_catalog()) {
    std::vector<Appliance> apps;
    for (std::size_t k = 0; k < catalog.size(); ++k) apps.push_back(static_appliance(catalog[k], on_mask >> k & 1u));
    return HouseGateway(id, {0.0, 0.0}, std::move(apps));
}

inline double high_priority_on(std::span<const ApplianceLoad> loads) {
    double h = 0.0;
    for (const auto& l : loads)
        if (l.on && l.priority == PriorityClass::high) h += l.power_w;
    return h;
}

}  // namespace drsim::testing
