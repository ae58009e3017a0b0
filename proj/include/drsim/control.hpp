#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drsim/load_model.hpp"

namespace drsim {

enum class ControlMode { batch, iterative };

/// Who picks the appliances to shed.
///  - gateway:   the cluster controller allocates per-house limits and each
///               home gateway runs the turn-off selection locally.
///  - appliance: the cluster controller runs the turn-off selection over
///               every reported appliance in its cluster and sends each
///               gateway the resulting on/off set-points.
enum class Actuation { gateway, appliance };

const char* to_string(ControlMode m);
ControlMode control_mode_from_string(const std::string& s);
const char* to_string(Actuation a);
Actuation actuation_from_string(const std::string& s);

inline constexpr int kDefaultStaleCap = 10;

// ---------------------------------------------------------------------------
// Control tree

struct ControllerNode {
    std::size_t id = 0;
    int layer = 1;  // 1 is the top layer
    std::optional<std::size_t> parent;
    std::vector<std::size_t> children;  // child node ids; empty at the bottom layer
    std::size_t first_gateway = 0;      // bottom layer only: gateways [first, last)
    std::size_t last_gateway = 0;
    double assigned_limit = 0.0;
    double reported_consumption = 0.0;

    bool is_bottom() const { return children.empty(); }
    std::size_t gateway_count() const { return last_gateway - first_gateway; }
};

class ControlTree {
public:
    int layers() const { return static_cast<int>(layer_offsets_.size()) - 1; }
    std::size_t degree() const { return degree_; }
    std::size_t cluster_size() const { return cluster_size_; }
    std::size_t n_clusters() const { return layer_size(layers()); }
    std::size_t n_houses() const { return n_houses_; }

    std::span<const ControllerNode> nodes() const { return nodes_; }
    const ControllerNode& node(std::size_t id) const { return nodes_.at(id); }
    ControllerNode& node(std::size_t id) { return nodes_.at(id); }
    const ControllerNode& root() const { return nodes_.front(); }
    ControllerNode& root() { return nodes_.front(); }

    std::size_t layer_size(int layer) const;
    /// Node id of the i-th node in `layer` (1-based layers).
    std::size_t layer_node(int layer, std::size_t i) const;
    /// Node id of the k-th bottom-layer cluster.
    std::size_t cluster_node(std::size_t k) const { return layer_node(layers(), k); }
    std::size_t cluster_of(std::size_t gateway) const;

    /// Equal split of `supply` over bottom clusters; upper nodes get the sum
    /// of their descendants and the root gets `supply`.
    void initialize_limits(double supply);

private:
    friend ControlTree build_tree(std::size_t, std::size_t, std::size_t);

    std::size_t degree_ = 0;
    std::size_t cluster_size_ = 0;
    std::size_t n_houses_ = 0;
    std::vector<std::size_t> layer_offsets_;  // node id range of each layer; [0] unused
    std::vector<ControllerNode> nodes_;
};

/// Smallest L with degree^(L-1) >= n_clusters.
int layer_count(std::size_t n_clusters, std::size_t degree);

/// Gateways are assigned to clusters contiguously by index with
/// N_cs = ceil(n_houses / n_clusters). Throws std::invalid_argument on zero
/// sizes, degree < 2 with more than one cluster, or an empty cluster.
ControlTree build_tree(std::size_t n_houses, std::size_t n_clusters, std::size_t degree);

// ---------------------------------------------------------------------------
// Optimizations

/// Limits s minimizing sum (s_i - c_i)^2 subject to sum s_i = parent_limit
/// and s_i >= 0.
std::vector<double> allocate_limits(double parent_limit, std::span<const double> demands);

struct ApplianceLoad {
    double power_w = 0.0;
    bool on = false;
    PriorityClass priority = PriorityClass::high;
};

struct TurnoffDecision {
    std::size_t n_off = 0;
    std::vector<bool> shed;          // per input entry
    std::vector<double> setpoints;   // 0 for shed entries, current power otherwise
    double consumption_before = 0.0;
    double consumption_after = 0.0;
    double residual_overload = 0.0;  // max(0, consumption_after - limit)
};

/// Sheds the fewest low-priority, currently-on appliances (in list order)
/// that brings consumption to or below `limit`. The list must be sorted by
/// ascending priority rank. High-priority entries are never shed; when the
/// limit is unreachable every eligible entry is shed and the excess is
/// reported as residual overload.
TurnoffDecision select_turnoff(double limit, std::span<const ApplianceLoad> appliances);

// ---------------------------------------------------------------------------
// Reports

struct ChildReport {
    double watts = 0.0;
    int age = 0;                  // control periods since the last fresh report
    bool known = false;           // at least one report has arrived
    double assigned_limit = 0.0;  // stand-in once the report is too old
};

/// Value the parent uses for a child: the last report while it is younger
/// than the cap, the assigned limit otherwise.
double effective_value(const ChildReport& r, int stale_cap = kDefaultStaleCap);
bool is_usable(const ChildReport& r, int stale_cap = kDefaultStaleCap);

double aggregate_report(std::span<const double> child_reports);
double aggregate_report(std::span<const ChildReport> child_reports, int stale_cap = kDefaultStaleCap);

// ---------------------------------------------------------------------------
// Bottom-layer controller

struct Command {
    double limit_w = 0.0;         // gateway actuation
    std::uint32_t shed_mask = 0;  // appliance actuation
};

struct ClusterDecision {
    double limit_w = 0.0;
    double planned_consumption_w = 0.0;
    std::size_t n_off = 0;
    double residual_overload_w = 0.0;
};

/// Bottom-layer sub-controller. Knows the appliance list of every gateway it
/// supervises and keeps the latest report of each.
class ClusterController {
public:
    ClusterController() = default;
    ClusterController(std::vector<std::vector<ApplianceSpec>> gateway_catalogs, Actuation actuation,
                      int stale_cap = kDefaultStaleCap);

    std::size_t size() const { return catalogs_.size(); }
    Actuation actuation() const { return actuation_; }

    /// Seeds every child's stand-in value with an equal split of `limit`.
    void initialize(double limit);

    void set_limit(double w) { limit_ = w; }
    double limit() const { return limit_; }

    /// Fresh report from gateway `local`: bit k of `on_mask` is appliance k.
    void receive(std::size_t local, std::uint32_t on_mask);
    /// Ages every child that did not report this period.
    void end_period();

    const ChildReport& report(std::size_t local) const { return reports_.at(local); }
    std::uint32_t reported_mask(std::size_t local) const { return masks_.at(local); }

    /// Sum of effective child values.
    double aggregate() const;

    /// Full decision from current knowledge; commands are kept for dispatch.
    ClusterDecision decide();
    /// Iterative variant: recompute with current knowledge and return only
    /// the command for `local`.
    Command decide_for(std::size_t local);

    const Command& command(std::size_t local) const { return commands_.at(local); }
    const ClusterDecision& last_decision() const { return decision_; }

private:
    double demand_of(std::size_t local, std::uint32_t mask) const;
    void decide_gateway_mode();
    void decide_appliance_mode();

    std::vector<std::vector<ApplianceSpec>> catalogs_;
    struct Slot {
        std::size_t gateway;
        std::size_t appliance;
    };
    std::vector<Slot> order_;  // every (gateway, appliance) sorted by (rank, gateway, appliance)
    Actuation actuation_ = Actuation::gateway;
    int stale_cap_ = kDefaultStaleCap;
    double limit_ = 0.0;
    std::vector<ChildReport> reports_;
    std::vector<std::uint32_t> masks_;
    std::vector<bool> fresh_;
    std::vector<Command> commands_;
    std::vector<double> full_power_;  // every appliance on
    ClusterDecision decision_;
    std::vector<ApplianceLoad> scratch_loads_;
    std::vector<Slot> scratch_slots_;
    std::vector<double> scratch_demands_;
};

/// Gateway-side handling of a delivered command. In gateway mode the local
/// turn-off selection runs on `basis_mask`, the on-set the gateway last
/// reported, so it acts on the same state the controller planned for.
/// Returns the local turn-off decision (n_off and residual against the limit).
TurnoffDecision apply_command(HouseGateway& house, const Command& cmd, Actuation actuation,
                              std::uint32_t basis_mask);
/// Same, using the house's current on-set as the basis.
TurnoffDecision apply_command(HouseGateway& house, const Command& cmd, Actuation actuation);

// ---------------------------------------------------------------------------
// Tree + controllers

struct DecisionRecord {
    std::size_t period = 0;
    std::size_t node_id = 0;
    int layer = 0;
    double limit_in_w = 0.0;
    double reported_w = 0.0;
    double limits_out_w = 0.0;  // sum of limits handed to children
    std::size_t n_off = 0;
    double residual_w = 0.0;
};

class ControlNetwork {
public:
    ControlNetwork(ControlTree tree, std::span<const HouseGateway> houses, Actuation actuation,
                   double supply_limit, int stale_cap = kDefaultStaleCap);

    const ControlTree& tree() const { return tree_; }
    ClusterController& cluster(std::size_t k) { return clusters_.at(k); }
    const ClusterController& cluster(std::size_t k) const { return clusters_.at(k); }
    std::size_t n_clusters() const { return clusters_.size(); }
    Actuation actuation() const { return actuation_; }

    void set_supply(double w) { tree_.root().assigned_limit = w; }
    double supply() const { return tree_.root().assigned_limit; }

    /// Bottom-up: cluster aggregates into node reported_consumption.
    void refresh_reports();
    /// Top-down allocation from the root limit. Updates every non-bottom
    /// node's children and returns the new per-cluster limits (the clusters
    /// themselves are not touched).
    std::vector<double> allocate_top_down(std::vector<DecisionRecord>* log = nullptr,
                                          std::size_t period = 0);
    void set_cluster_limits(std::span<const double> limits);

    /// One full control period over an ideal channel.
    void control_round(std::span<HouseGateway> houses, ControlMode mode,
                       std::vector<DecisionRecord>* log = nullptr);

    std::size_t periods() const { return period_; }

private:
    ControlTree tree_;
    Actuation actuation_;
    std::vector<ClusterController> clusters_;
    std::size_t period_ = 0;
};

}  // namespace drsim
