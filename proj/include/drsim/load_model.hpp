#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "drsim/rng.hpp"

namespace drsim {

enum class PriorityClass { high, low };

const char* to_string(PriorityClass c);
PriorityClass priority_from_string(const std::string& s);

/// One catalog entry. Lower rank is shed first; within a house ranks are
/// unique and every low-class appliance ranks below every high-class one.
struct ApplianceSpec {
    std::string name;
    double rated_power_w = 0.0;
    PriorityClass priority = PriorityClass::high;
    int rank = 0;
    double duty_target = 1.0;
};

class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Air-conditioner, refrigerator, television, lamp. Sorted by rank ascending
/// (lamp first), and all duty targets at 1.0 until calibrated.
std::vector<ApplianceSpec> default_catalog();

/// Throws std::invalid_argument if the catalog violates the per-house
/// invariants (positive power, unique ranks, low strictly below high).
void validate_catalog(std::span<const ApplianceSpec> catalog);

double total_rated_power(std::span<const ApplianceSpec> catalog);

/// Duty fractions d_k with sum(d_k * P_k) == target_mean.
///
/// Appliances named in `pinned` run at duty 1.0 and the remaining ones share
/// a common fraction. If the target is below the pinned load alone, the
/// pinned appliances are scaled down and the rest are held off.
std::vector<double> calibrate_duty(std::span<const ApplianceSpec> catalog, double target_mean_w,
                                   std::span<const std::string> pinned);
std::vector<double> calibrate_duty(std::span<const ApplianceSpec> catalog, double target_mean_w);

/// Copy of `catalog` with duty_target replaced and entries sorted by rank.
std::vector<ApplianceSpec> with_duties(std::span<const ApplianceSpec> catalog,
                                       std::span<const double> duties);

/// Two-state on/off switch with exponential holding times.
struct SwitchProcess {
    double rate_on_per_hour = 0.0;   // off -> on
    double rate_off_per_hour = 0.0;  // on -> off
    std::uint64_t stream_id = 0;

    /// Rates giving stationary on-probability `duty` and mean on+off cycle
    /// `mean_cycle_s`.
    static SwitchProcess from_duty(double duty, double mean_cycle_s, std::uint64_t stream_id);

    double stationary_on_probability() const;
};

struct ApplianceState {
    bool on = false;
    bool forced_off = false;
    double next_switch_s = 0.0;  // absolute time of the next stochastic toggle
};

struct Appliance {
    ApplianceSpec spec;
    SwitchProcess process;
    ApplianceState state;
    Stream rng;

    double demand_w() const { return state.on ? spec.rated_power_w : 0.0; }
    double power_w() const { return state.on && !state.forced_off ? spec.rated_power_w : 0.0; }

    /// Toggle through every switch event with time <= until_s.
    /// Returns the number of toggles.
    int advance_to(double until_s);
};

struct Position {
    double x = 0.0;
    double y = 0.0;
};

enum class Placement { uniform, grid };

const char* to_string(Placement p);
Placement placement_from_string(const std::string& s);

/// Per-house aggregation point: measures the house's output power and
/// actuates its appliances. Appliances are kept sorted by rank.
class HouseGateway {
public:
    HouseGateway() = default;
    HouseGateway(std::size_t id, Position pos, std::vector<Appliance> appliances);

    std::size_t id() const { return id_; }
    void set_id(std::size_t id) { id_ = id; }
    Position position() const { return position_; }

    std::span<Appliance> appliances() { return appliances_; }
    std::span<const Appliance> appliances() const { return appliances_; }

    /// Sum of rated power over appliances that are on and not shed.
    double instantaneous_power() const;
    /// Power the house would draw with nothing shed.
    double demand() const;

    /// Bit k set means appliance k is on (ignoring forced_off).
    std::uint32_t on_mask() const;
    std::uint32_t forced_mask() const;

    /// Replace the shed set. Bits on high-priority appliances are rejected
    /// with std::invalid_argument.
    void apply_shed(std::uint32_t mask);
    void release_all() { apply_shed(0); }

    double clock() const { return clock_; }
    /// Advance every appliance to `t` (absolute seconds).
    void advance_to(double t);

private:
    std::size_t id_ = 0;
    Position position_{};
    std::vector<Appliance> appliances_;
    double clock_ = 0.0;
};

struct LoadConfig {
    std::vector<ApplianceSpec> catalog = default_catalog();
    std::vector<std::string> pinned = {"refrigerator"};
    double target_mean_w = 1200.0;
    double mean_cycle_s = 900.0;
    Placement placement = Placement::uniform;
};

/// Build `n` houses in an `area_side` square, one of each catalog entry per
/// house, with duties calibrated to `cfg.target_mean_w`. Appliances start in
/// their stationary distribution.
std::vector<HouseGateway> make_houses(std::size_t n, double area_side_m, const LoadConfig& cfg,
                                      std::uint64_t seed);

/// Advance every house by dt seconds.
void step_loads(std::span<HouseGateway> houses, double dt);

inline constexpr std::size_t kMaxAppliancesPerHouse = 32;

}  // namespace drsim
