#include "drsim/load_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace drsim {

const char* to_string(PriorityClass c) { return c == PriorityClass::high ? "high" : "low"; }

PriorityClass priority_from_string(const std::string& s) {
    if (s == "high") return PriorityClass::high;
    if (s == "low") return PriorityClass::low;
    throw std::invalid_argument("unknown priority class '" + s + "'");
}

const char* to_string(Placement p) { return p == Placement::uniform ? "uniform" : "grid"; }

Placement placement_from_string(const std::string& s) {
    if (s == "uniform") return Placement::uniform;
    if (s == "grid") return Placement::grid;
    throw std::invalid_argument("unknown placement '" + s + "'");
}

std::vector<ApplianceSpec> default_catalog() {
    return {
        {"lamp", 60.0, PriorityClass::low, 0, 1.0},
        {"television", 141.0, PriorityClass::low, 1, 1.0},
        {"refrigerator", 268.0, PriorityClass::high, 2, 1.0},
        {"air_conditioner", 831.0, PriorityClass::high, 3, 1.0},
    };
}

void validate_catalog(std::span<const ApplianceSpec> catalog) {
    if (catalog.empty()) throw std::invalid_argument("appliance catalog is empty");
    if (catalog.size() > kMaxAppliancesPerHouse)
        throw std::invalid_argument("too many appliances per house");
    int max_low = std::numeric_limits<int>::min();
    int min_high = std::numeric_limits<int>::max();
    std::vector<int> ranks;
    for (const auto& a : catalog) {
        if (!(a.rated_power_w > 0.0) || !std::isfinite(a.rated_power_w))
            throw std::invalid_argument("appliance '" + a.name + "' needs rated power > 0");
        if (!(a.duty_target >= 0.0 && a.duty_target <= 1.0))
            throw std::invalid_argument("appliance '" + a.name + "' duty outside [0,1]");
        ranks.push_back(a.rank);
        if (a.priority == PriorityClass::low)
            max_low = std::max(max_low, a.rank);
        else
            min_high = std::min(min_high, a.rank);
    }
    std::sort(ranks.begin(), ranks.end());
    if (std::adjacent_find(ranks.begin(), ranks.end()) != ranks.end())
        throw std::invalid_argument("appliance priority ranks must be unique");
    if (max_low >= min_high)
        throw std::invalid_argument("every low-priority appliance must rank below every high-priority one");
}

double total_rated_power(std::span<const ApplianceSpec> catalog) {
    double s = 0.0;
    for (const auto& a : catalog) s += a.rated_power_w;
    return s;
}

std::vector<double> calibrate_duty(std::span<const ApplianceSpec> catalog, double target_mean_w,
                                   std::span<const std::string> pinned) {
    validate_catalog(catalog);
    const double total = total_rated_power(catalog);
    if (!(target_mean_w > 0.0)) throw CalibrationError("target mean power must be positive");
    if (target_mean_w > total * (1.0 + 1e-12))
        throw CalibrationError("target mean power exceeds total rated power of the catalog");

    std::vector<bool> is_pinned(catalog.size(), false);
    double pinned_w = 0.0;
    for (std::size_t k = 0; k < catalog.size(); ++k) {
        is_pinned[k] = std::find(pinned.begin(), pinned.end(), catalog[k].name) != pinned.end();
        if (is_pinned[k]) pinned_w += catalog[k].rated_power_w;
    }
    const double free_w = total - pinned_w;

    std::vector<double> duty(catalog.size(), 0.0);
    if (target_mean_w >= pinned_w && free_w > 0.0) {
        const double f = std::min(1.0, (target_mean_w - pinned_w) / free_w);
        for (std::size_t k = 0; k < catalog.size(); ++k) duty[k] = is_pinned[k] ? 1.0 : f;
    } else {
        // Pinned load alone meets or exceeds the target.
        const double f = std::min(1.0, target_mean_w / pinned_w);
        for (std::size_t k = 0; k < catalog.size(); ++k) duty[k] = is_pinned[k] ? f : 0.0;
    }
    return duty;
}

std::vector<double> calibrate_duty(std::span<const ApplianceSpec> catalog, double target_mean_w) {
    const std::string pinned[] = {"refrigerator"};
    return calibrate_duty(catalog, target_mean_w, pinned);
}

std::vector<ApplianceSpec> with_duties(std::span<const ApplianceSpec> catalog,
                                       std::span<const double> duties) {
    if (duties.size() != catalog.size())
        throw std::invalid_argument("duty vector length does not match catalog");
    std::vector<ApplianceSpec> out(catalog.begin(), catalog.end());
    for (std::size_t k = 0; k < out.size(); ++k) out[k].duty_target = duties[k];
    std::stable_sort(out.begin(), out.end(),
                     [](const ApplianceSpec& a, const ApplianceSpec& b) { return a.rank < b.rank; });
    return out;
}

SwitchProcess SwitchProcess::from_duty(double duty, double mean_cycle_s, std::uint64_t stream_id) {
    if (!(duty >= 0.0 && duty <= 1.0)) throw std::invalid_argument("duty outside [0,1]");
    if (!(mean_cycle_s > 0.0)) throw std::invalid_argument("mean cycle must be positive");
    SwitchProcess p;
    p.stream_id = stream_id;
    const double cycle_h = mean_cycle_s / 3600.0;
    // mean on-time = duty * cycle, mean off-time = (1 - duty) * cycle
    p.rate_off_per_hour = duty >= 1.0 ? 0.0 : 1.0 / (duty * cycle_h);
    p.rate_on_per_hour = duty <= 0.0 ? 0.0 : 1.0 / ((1.0 - duty) * cycle_h);
    if (duty <= 0.0) p.rate_off_per_hour = 1.0 / cycle_h;
    if (duty >= 1.0) p.rate_on_per_hour = 1.0 / cycle_h;
    return p;
}

double SwitchProcess::stationary_on_probability() const {
    if (rate_off_per_hour <= 0.0) return rate_on_per_hour > 0.0 ? 1.0 : 0.0;
    if (rate_on_per_hour <= 0.0) return 0.0;
    return rate_on_per_hour / (rate_on_per_hour + rate_off_per_hour);
}

int Appliance::advance_to(double until_s) {
    int toggles = 0;
    while (state.next_switch_s <= until_s) {
        state.on = !state.on;
        ++toggles;
        const double rate = (state.on ? process.rate_off_per_hour : process.rate_on_per_hour) / 3600.0;
        state.next_switch_s += rng.exponential(rate);
    }
    return toggles;
}

HouseGateway::HouseGateway(std::size_t id, Position pos, std::vector<Appliance> appliances)
    : id_(id), position_(pos), appliances_(std::move(appliances)) {
    if (appliances_.size() > kMaxAppliancesPerHouse)
        throw std::invalid_argument("too many appliances per house");
}

double HouseGateway::instantaneous_power() const {
    double s = 0.0;
    for (const auto& a : appliances_) s += a.power_w();
    return s;
}

double HouseGateway::demand() const {
    double s = 0.0;
    for (const auto& a : appliances_) s += a.demand_w();
    return s;
}

std::uint32_t HouseGateway::on_mask() const {
    std::uint32_t m = 0;
    for (std::size_t k = 0; k < appliances_.size(); ++k)
        if (appliances_[k].state.on) m |= 1u << k;
    return m;
}

std::uint32_t HouseGateway::forced_mask() const {
    std::uint32_t m = 0;
    for (std::size_t k = 0; k < appliances_.size(); ++k)
        if (appliances_[k].state.forced_off) m |= 1u << k;
    return m;
}

void HouseGateway::apply_shed(std::uint32_t mask) {
    for (std::size_t k = 0; k < appliances_.size(); ++k) {
        const bool shed = (mask >> k) & 1u;
        if (shed && appliances_[k].spec.priority == PriorityClass::high)
            throw std::invalid_argument("cannot shed high-priority appliance '" +
                                        appliances_[k].spec.name + "'");
        appliances_[k].state.forced_off = shed;
    }
}

void HouseGateway::advance_to(double t) {
    for (auto& a : appliances_) a.advance_to(t);
    clock_ = t;
}

std::vector<HouseGateway> make_houses(std::size_t n, double area_side_m, const LoadConfig& cfg,
                                      std::uint64_t seed) {
    const auto duties = calibrate_duty(cfg.catalog, cfg.target_mean_w, cfg.pinned);
    const auto catalog = with_duties(cfg.catalog, duties);

    std::vector<HouseGateway> houses;
    houses.reserve(n);
    Stream place(seed, stream_ns::placement);
    const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    const double pitch = cols > 0 ? area_side_m / static_cast<double>(cols) : area_side_m;

    for (std::size_t h = 0; h < n; ++h) {
        Position pos;
        if (cfg.placement == Placement::uniform) {
            pos.x = place.uniform() * area_side_m;
            pos.y = place.uniform() * area_side_m;
        } else {
            pos.x = (static_cast<double>(h % cols) + 0.5) * pitch;
            pos.y = (static_cast<double>(h / cols) + 0.5) * pitch;
        }
        std::vector<Appliance> apps;
        apps.reserve(catalog.size());
        for (std::size_t k = 0; k < catalog.size(); ++k) {
            const std::uint64_t sid = stream_ns::appliance | (static_cast<std::uint64_t>(h) << 8) | k;
            Appliance a;
            a.spec = catalog[k];
            a.process = SwitchProcess::from_duty(catalog[k].duty_target, cfg.mean_cycle_s, sid);
            a.rng = Stream(seed, sid);
            a.state.on = a.rng.uniform() < catalog[k].duty_target;
            const double rate = (a.state.on ? a.process.rate_off_per_hour : a.process.rate_on_per_hour) / 3600.0;
            a.state.next_switch_s = a.rng.exponential(rate);
            apps.push_back(std::move(a));
        }
        houses.emplace_back(h, pos, std::move(apps));
    }
    return houses;
}

void step_loads(std::span<HouseGateway> houses, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_loads: dt must be positive");
    for (auto& h : houses) h.advance_to(h.clock() + dt);
}

}  // namespace drsim
