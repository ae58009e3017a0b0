#include "drsim/control.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace drsim {

const char* to_string(ControlMode m) { return m == ControlMode::batch ? "batch" : "iterative"; }

ControlMode control_mode_from_string(const std::string& s) {
    if (s == "batch") return ControlMode::batch;
    if (s == "iterative") return ControlMode::iterative;
    throw std::invalid_argument("unknown control mode '" + s + "'");
}

const char* to_string(Actuation a) { return a == Actuation::gateway ? "gateway" : "appliance"; }

Actuation actuation_from_string(const std::string& s) {
    if (s == "gateway") return Actuation::gateway;
    if (s == "appliance") return Actuation::appliance;
    throw std::invalid_argument("unknown actuation '" + s + "'");
}

// ---------------------------------------------------------------------------

int layer_count(std::size_t n_clusters, std::size_t degree) {
    if (n_clusters == 0) throw std::invalid_argument("layer_count: n_clusters must be >= 1");
    int layers = 1;
    std::size_t reach = 1;
    while (reach < n_clusters) {
        if (degree < 2) throw std::invalid_argument("layer_count: degree must be >= 2");
        reach *= degree;
        ++layers;
    }
    return layers;
}

std::size_t ControlTree::layer_size(int layer) const {
    if (layer < 1 || layer > layers()) throw std::out_of_range("layer out of range");
    const auto l = static_cast<std::size_t>(layer);
    const std::size_t end = l + 1 < layer_offsets_.size() ? layer_offsets_[l + 1] : nodes_.size();
    return end - layer_offsets_[l];
}

std::size_t ControlTree::layer_node(int layer, std::size_t i) const {
    if (i >= layer_size(layer)) throw std::out_of_range("node index out of range");
    return layer_offsets_[static_cast<std::size_t>(layer)] + i;
}

std::size_t ControlTree::cluster_of(std::size_t gateway) const {
    if (gateway >= n_houses_) throw std::out_of_range("gateway index out of range");
    return gateway / cluster_size_;
}

void ControlTree::initialize_limits(double supply) {
    const int bottom = layers();
    const double share = supply / static_cast<double>(n_clusters());
    for (std::size_t k = 0; k < n_clusters(); ++k) node(cluster_node(k)).assigned_limit = share;
    for (int l = bottom - 1; l >= 1; --l) {
        for (std::size_t i = 0; i < layer_size(l); ++i) {
            auto& n = node(layer_node(l, i));
            n.assigned_limit = 0.0;
            for (auto c : n.children) n.assigned_limit += node(c).assigned_limit;
        }
    }
    root().assigned_limit = supply;
}

ControlTree build_tree(std::size_t n_houses, std::size_t n_clusters, std::size_t degree) {
    if (n_houses == 0) throw std::invalid_argument("build_tree: n_houses must be >= 1");
    if (n_clusters == 0) throw std::invalid_argument("build_tree: n_clusters must be >= 1");
    if (n_clusters > 1 && degree < 2)
        throw std::invalid_argument("build_tree: degree must be >= 2 with more than one cluster");
    const std::size_t ncs = (n_houses + n_clusters - 1) / n_clusters;
    if ((n_clusters - 1) * ncs >= n_houses)
        throw std::invalid_argument("build_tree: contiguous assignment leaves an empty cluster");

    // Layer sizes bottom-up, then flipped so layer 1 is the root.
    std::vector<std::size_t> sizes{n_clusters};
    while (sizes.back() > 1) sizes.push_back((sizes.back() + degree - 1) / degree);
    std::reverse(sizes.begin(), sizes.end());

    ControlTree t;
    t.degree_ = degree;
    t.cluster_size_ = ncs;
    t.n_houses_ = n_houses;
    t.layer_offsets_.assign(sizes.size() + 1, 0);
    std::size_t total = 0;
    for (std::size_t l = 0; l < sizes.size(); ++l) {
        t.layer_offsets_[l + 1] = total;
        total += sizes[l];
    }
    t.nodes_.resize(total);

    const int L = static_cast<int>(sizes.size());
    for (int l = 1; l <= L; ++l) {
        const std::size_t count = sizes[static_cast<std::size_t>(l - 1)];
        for (std::size_t i = 0; i < count; ++i) {
            auto& n = t.nodes_[t.layer_offsets_[static_cast<std::size_t>(l)] + i];
            n.id = t.layer_offsets_[static_cast<std::size_t>(l)] + i;
            n.layer = l;
            if (l > 1) n.parent = t.layer_offsets_[static_cast<std::size_t>(l - 1)] + i / degree;
            if (l < L) {
                const std::size_t below = sizes[static_cast<std::size_t>(l)];
                for (std::size_t c = i * degree; c < std::min((i + 1) * degree, below); ++c)
                    n.children.push_back(t.layer_offsets_[static_cast<std::size_t>(l + 1)] + c);
            } else {
                n.first_gateway = i * ncs;
                n.last_gateway = std::min((i + 1) * ncs, n_houses);
            }
        }
    }
    return t;
}

// ---------------------------------------------------------------------------

std::vector<double> allocate_limits(double parent_limit, std::span<const double> demands) {
    if (demands.empty()) throw std::invalid_argument("allocate_limits: no children");
    if (!(parent_limit >= 0.0) || !std::isfinite(parent_limit))
        throw std::invalid_argument("allocate_limits: parent limit must be finite and >= 0");
    for (double c : demands)
        if (!(c >= 0.0) || !std::isfinite(c))
            throw std::invalid_argument("allocate_limits: demands must be finite and >= 0");

    const std::size_t n = demands.size();
    std::vector<bool> active(n, true);
    std::size_t n_active = n;
    double shift = 0.0;
    // The shift only decreases as children are clamped, so a clamped child
    // never becomes positive again and the loop reaches the KKT point.
    for (;;) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (active[i]) sum += demands[i];
        shift = (parent_limit - sum) / static_cast<double>(n_active);
        bool clamped = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (active[i] && demands[i] + shift < 0.0) {
                active[i] = false;
                --n_active;
                clamped = true;
            }
        }
        if (!clamped) break;
    }
    std::vector<double> limits(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        if (active[i]) limits[i] = demands[i] + shift;
    return limits;
}

TurnoffDecision select_turnoff(double limit, std::span<const ApplianceLoad> appliances) {
    TurnoffDecision d;
    d.shed.assign(appliances.size(), false);
    d.setpoints.assign(appliances.size(), 0.0);
    double consumption = 0.0;
    for (const auto& a : appliances)
        if (a.on) consumption += a.power_w;
    d.consumption_before = consumption;
    for (std::size_t i = 0; i < appliances.size() && consumption > limit; ++i) {
        const auto& a = appliances[i];
        if (a.on && a.priority == PriorityClass::low) {
            d.shed[i] = true;
            consumption -= a.power_w;
            ++d.n_off;
        }
    }
    for (std::size_t i = 0; i < appliances.size(); ++i)
        d.setpoints[i] = (appliances[i].on && !d.shed[i]) ? appliances[i].power_w : 0.0;
    d.consumption_after = consumption;
    d.residual_overload = std::max(0.0, consumption - limit);
    return d;
}

// ---------------------------------------------------------------------------

bool is_usable(const ChildReport& r, int stale_cap) { return r.known && r.age <= stale_cap; }

double effective_value(const ChildReport& r, int stale_cap) {
    return is_usable(r, stale_cap) ? r.watts : r.assigned_limit;
}

double aggregate_report(std::span<const double> child_reports) {
    return std::accumulate(child_reports.begin(), child_reports.end(), 0.0);
}

double aggregate_report(std::span<const ChildReport> child_reports, int stale_cap) {
    double s = 0.0;
    for (const auto& r : child_reports) s += effective_value(r, stale_cap);
    return s;
}

// ---------------------------------------------------------------------------

namespace {

double demand_of_catalog(const std::vector<ApplianceSpec>& cat) {
    double s = 0.0;
    for (const auto& a : cat) s += a.rated_power_w;
    return s;
}

}  // namespace

ClusterController::ClusterController(std::vector<std::vector<ApplianceSpec>> gateway_catalogs,
                                     Actuation actuation, int stale_cap)
    : catalogs_(std::move(gateway_catalogs)), actuation_(actuation), stale_cap_(stale_cap) {
    for (std::size_t g = 0; g < catalogs_.size(); ++g) {
        if (catalogs_[g].size() > kMaxAppliancesPerHouse)
            throw std::invalid_argument("too many appliances per gateway");
        for (std::size_t k = 0; k < catalogs_[g].size(); ++k) order_.push_back({g, k});
    }
    std::stable_sort(order_.begin(), order_.end(), [this](const Slot& a, const Slot& b) {
        const int ra = catalogs_[a.gateway][a.appliance].rank;
        const int rb = catalogs_[b.gateway][b.appliance].rank;
        if (ra != rb) return ra < rb;
        if (a.gateway != b.gateway) return a.gateway < b.gateway;
        return a.appliance < b.appliance;
    });
    reports_.assign(catalogs_.size(), ChildReport{});
    masks_.assign(catalogs_.size(), 0);
    fresh_.assign(catalogs_.size(), false);
    commands_.assign(catalogs_.size(), Command{});
    for (const auto& cat : catalogs_) full_power_.push_back(demand_of_catalog(cat));
}

void ClusterController::initialize(double limit) {
    limit_ = limit;
    const double share = catalogs_.empty() ? 0.0 : limit / static_cast<double>(catalogs_.size());
    for (std::size_t j = 0; j < reports_.size(); ++j) {
        reports_[j] = ChildReport{};
        reports_[j].assigned_limit = std::min(share, full_power_[j]);
        commands_[j] = Command{share, 0};
    }
}

double ClusterController::demand_of(std::size_t local, std::uint32_t mask) const {
    double s = 0.0;
    const auto& cat = catalogs_[local];
    for (std::size_t k = 0; k < cat.size(); ++k)
        if ((mask >> k) & 1u) s += cat[k].rated_power_w;
    return s;
}

void ClusterController::receive(std::size_t local, std::uint32_t on_mask) {
    auto& r = reports_.at(local);
    masks_[local] = on_mask;
    r.watts = demand_of(local, on_mask);
    r.age = 0;
    r.known = true;
    fresh_[local] = true;
}

void ClusterController::end_period() {
    for (std::size_t j = 0; j < reports_.size(); ++j) {
        if (!fresh_[j] && reports_[j].age <= stale_cap_) ++reports_[j].age;
        fresh_[j] = false;
    }
}

double ClusterController::aggregate() const { return aggregate_report(reports_, stale_cap_); }

ClusterDecision ClusterController::decide() {
    if (actuation_ == Actuation::gateway)
        decide_gateway_mode();
    else
        decide_appliance_mode();
    return decision_;
}

Command ClusterController::decide_for(std::size_t local) {
    decide();
    return commands_.at(local);
}

void ClusterController::decide_gateway_mode() {
    // Stale children are held at their stand-in value; the rest share what
    // is left of the cluster limit.
    double fixed = 0.0;
    scratch_demands_.clear();
    for (std::size_t j = 0; j < reports_.size(); ++j) {
        if (is_usable(reports_[j], stale_cap_))
            scratch_demands_.push_back(reports_[j].watts);
        else
            fixed += reports_[j].assigned_limit;
    }
    decision_ = ClusterDecision{};
    decision_.limit_w = limit_;
    std::vector<double> limits;
    if (!scratch_demands_.empty()) limits = allocate_limits(std::max(0.0, limit_ - fixed), scratch_demands_);

    double planned = fixed;
    double residual = 0.0;
    std::size_t u = 0;
    for (std::size_t j = 0; j < reports_.size(); ++j) {
        if (!is_usable(reports_[j], stale_cap_)) {
            commands_[j] = Command{reports_[j].assigned_limit, 0};
            continue;
        }
        const double s = limits[u++];
        commands_[j] = Command{s, 0};
        reports_[j].assigned_limit = std::min(s, full_power_[j]);
        // Predict what the gateway will do with the reported state.
        scratch_loads_.clear();
        const auto& cat = catalogs_[j];
        for (std::size_t k = 0; k < cat.size(); ++k)
            scratch_loads_.push_back({cat[k].rated_power_w, ((masks_[j] >> k) & 1u) != 0, cat[k].priority});
        const auto td = select_turnoff(s, scratch_loads_);
        planned += td.consumption_after;
        residual += td.residual_overload;
        decision_.n_off += td.n_off;
    }
    decision_.planned_consumption_w = planned;
    decision_.residual_overload_w = residual;
}

void ClusterController::decide_appliance_mode() {
    scratch_loads_.clear();
    scratch_slots_.clear();
    for (const auto& s : order_) {
        if (!is_usable(reports_[s.gateway], stale_cap_)) continue;
        const auto& spec = catalogs_[s.gateway][s.appliance];
        scratch_loads_.push_back({spec.rated_power_w, ((masks_[s.gateway] >> s.appliance) & 1u) != 0, spec.priority});
        scratch_slots_.push_back(s);
    }
    // Stale gateways enter as one fixed, non-sheddable load each.
    constexpr std::size_t kFixed = static_cast<std::size_t>(-1);
    for (std::size_t j = 0; j < reports_.size(); ++j) {
        if (is_usable(reports_[j], stale_cap_)) continue;
        scratch_loads_.push_back({reports_[j].assigned_limit, true, PriorityClass::high});
        scratch_slots_.push_back({j, kFixed});
    }

    const auto td = select_turnoff(limit_, scratch_loads_);

    for (std::size_t j = 0; j < reports_.size(); ++j)
        if (is_usable(reports_[j], stale_cap_)) commands_[j] = Command{0.0, 0};
    for (std::size_t i = 0; i < scratch_slots_.size(); ++i) {
        const auto& s = scratch_slots_[i];
        if (s.appliance == kFixed) continue;
        if (td.shed[i]) commands_[s.gateway].shed_mask |= 1u << s.appliance;
        commands_[s.gateway].limit_w += td.setpoints[i];
    }
    for (std::size_t j = 0; j < reports_.size(); ++j) {
        if (is_usable(reports_[j], stale_cap_))
            reports_[j].assigned_limit = commands_[j].limit_w;
        else
            commands_[j] = Command{reports_[j].assigned_limit, 0};
    }
    decision_ = ClusterDecision{limit_, td.consumption_after, td.n_off, td.residual_overload};
}

TurnoffDecision apply_command(HouseGateway& house, const Command& cmd, Actuation actuation) {
    return apply_command(house, cmd, actuation, house.on_mask());
}

TurnoffDecision apply_command(HouseGateway& house, const Command& cmd, Actuation actuation,
                              std::uint32_t basis_mask) {
    auto apps = house.appliances();
    if (actuation == Actuation::appliance) {
        std::uint32_t low = 0;
        for (std::size_t k = 0; k < apps.size(); ++k)
            if (apps[k].spec.priority == PriorityClass::low) low |= 1u << k;
        const std::uint32_t mask = cmd.shed_mask & low;
        house.apply_shed(mask);
        TurnoffDecision d;
        d.n_off = static_cast<std::size_t>(std::popcount(mask));
        d.consumption_before = house.demand();
        d.consumption_after = house.instantaneous_power();
        return d;
    }
    std::vector<ApplianceLoad> loads;
    loads.reserve(apps.size());
    for (std::size_t k = 0; k < apps.size(); ++k)
        loads.push_back({apps[k].spec.rated_power_w, ((basis_mask >> k) & 1u) != 0, apps[k].spec.priority});
    auto d = select_turnoff(cmd.limit_w, loads);
    std::uint32_t mask = 0;
    for (std::size_t k = 0; k < apps.size(); ++k)
        if (d.shed[k]) mask |= 1u << k;
    house.apply_shed(mask);
    return d;
}

// ---------------------------------------------------------------------------

ControlNetwork::ControlNetwork(ControlTree tree, std::span<const HouseGateway> houses,
                               Actuation actuation, double supply_limit, int stale_cap)
    : tree_(std::move(tree)), actuation_(actuation) {
    if (houses.size() != tree_.n_houses())
        throw std::invalid_argument("ControlNetwork: house count does not match the tree");
    tree_.initialize_limits(supply_limit);
    clusters_.reserve(tree_.n_clusters());
    for (std::size_t k = 0; k < tree_.n_clusters(); ++k) {
        const auto& node = tree_.node(tree_.cluster_node(k));
        std::vector<std::vector<ApplianceSpec>> cats;
        for (std::size_t g = node.first_gateway; g < node.last_gateway; ++g) {
            std::vector<ApplianceSpec> c;
            for (const auto& a : houses[g].appliances()) c.push_back(a.spec);
            cats.push_back(std::move(c));
        }
        clusters_.emplace_back(std::move(cats), actuation, stale_cap);
        clusters_.back().initialize(node.assigned_limit);
    }
}

void ControlNetwork::refresh_reports() {
    const int L = tree_.layers();
    for (std::size_t k = 0; k < clusters_.size(); ++k)
        tree_.node(tree_.cluster_node(k)).reported_consumption = clusters_[k].aggregate();
    for (int l = L - 1; l >= 1; --l) {
        for (std::size_t i = 0; i < tree_.layer_size(l); ++i) {
            auto& n = tree_.node(tree_.layer_node(l, i));
            n.reported_consumption = 0.0;
            for (auto c : n.children) n.reported_consumption += tree_.node(c).reported_consumption;
        }
    }
}

std::vector<double> ControlNetwork::allocate_top_down(std::vector<DecisionRecord>* log, std::size_t period) {
    const int L = tree_.layers();
    std::vector<double> demands;
    for (int l = 1; l < L; ++l) {
        for (std::size_t i = 0; i < tree_.layer_size(l); ++i) {
            auto& n = tree_.node(tree_.layer_node(l, i));
            demands.clear();
            for (auto c : n.children) demands.push_back(tree_.node(c).reported_consumption);
            const auto limits = allocate_limits(n.assigned_limit, demands);
            double out = 0.0;
            for (std::size_t c = 0; c < n.children.size(); ++c) {
                tree_.node(n.children[c]).assigned_limit = limits[c];
                out += limits[c];
            }
            if (log) log->push_back({period, n.id, n.layer, n.assigned_limit, n.reported_consumption, out, 0, 0.0});
        }
    }
    std::vector<double> bottom(clusters_.size());
    for (std::size_t k = 0; k < clusters_.size(); ++k)
        bottom[k] = tree_.node(tree_.cluster_node(k)).assigned_limit;
    return bottom;
}

void ControlNetwork::set_cluster_limits(std::span<const double> limits) {
    if (limits.size() != clusters_.size()) throw std::invalid_argument("cluster limit count mismatch");
    for (std::size_t k = 0; k < clusters_.size(); ++k) clusters_[k].set_limit(limits[k]);
}

void ControlNetwork::control_round(std::span<HouseGateway> houses, ControlMode mode,
                                   std::vector<DecisionRecord>* log) {
    const auto first_of = [this](std::size_t k) { return tree_.node(tree_.cluster_node(k)).first_gateway; };
    if (mode == ControlMode::batch) {
        for (std::size_t k = 0; k < clusters_.size(); ++k)
            for (std::size_t j = 0; j < clusters_[k].size(); ++j)
                clusters_[k].receive(j, houses[first_of(k) + j].on_mask());
        refresh_reports();
        set_cluster_limits(allocate_top_down(log, period_));
        for (std::size_t k = 0; k < clusters_.size(); ++k) {
            clusters_[k].decide();
            for (std::size_t j = 0; j < clusters_[k].size(); ++j)
                apply_command(houses[first_of(k) + j], clusters_[k].command(j), actuation_);
        }
    } else {
        for (std::size_t j = 0; j < tree_.cluster_size(); ++j) {
            for (std::size_t k = 0; k < clusters_.size(); ++k)
                if (j < clusters_[k].size()) clusters_[k].receive(j, houses[first_of(k) + j].on_mask());
            refresh_reports();
            set_cluster_limits(allocate_top_down());
            for (std::size_t k = 0; k < clusters_.size(); ++k)
                if (j < clusters_[k].size())
                    apply_command(houses[first_of(k) + j], clusters_[k].decide_for(j), actuation_);
        }
        if (log) {
            refresh_reports();
            allocate_top_down(log, period_);
        }
    }
    if (log) {
        for (std::size_t k = 0; k < clusters_.size(); ++k) {
            const auto& n = tree_.node(tree_.cluster_node(k));
            const auto& d = clusters_[k].last_decision();
            log->push_back({period_, n.id, n.layer, clusters_[k].limit(), clusters_[k].aggregate(),
                            d.planned_consumption_w, d.n_off, d.residual_overload_w});
        }
    }
    for (auto& c : clusters_) c.end_period();
    ++period_;
}

}  // namespace drsim
