#include "drsim/link_model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace drsim {

const char* to_string(SuccessModel m) { return m == SuccessModel::threshold ? "threshold" : "ber"; }

SuccessModel success_model_from_string(const std::string& s) {
    if (s == "threshold") return SuccessModel::threshold;
    if (s == "ber") return SuccessModel::ber;
    throw std::invalid_argument("unknown success model '" + s + "'");
}

double RadioConfig::goodput_ceiling_bps() const {
    // One packet per slot, uplink and downlink slots alternate.
    return packet_length_bytes * 8.0 / (2.0 * slot_duration_s());
}

void RadioConfig::validate() const {
    if (!(symbol_rate > 0.0)) throw std::invalid_argument("radio.symbol_rate must be > 0");
    if (!(slot_length_symbols > 0.0)) throw std::invalid_argument("radio.slot_length must be > 0");
    if (!(packet_length_bytes > 0.0)) throw std::invalid_argument("radio.packet_length must be > 0");
    if (!(bits_per_symbol > 0.0)) throw std::invalid_argument("radio.bits_per_symbol must be > 0");
    if (!(coding_rate > 0.0 && coding_rate <= 1.0)) throw std::invalid_argument("radio.coding_rate must be in (0,1]");
    if (!(shadowing_sigma_db >= 0.0)) throw std::invalid_argument("radio.shadowing_sigma_db must be >= 0");
    if (!(pathloss_exponent > 0.0)) throw std::invalid_argument("radio.pathloss_exponent must be > 0");
    if (std::isnan(tx_power_dbm) || tx_power_dbm == std::numeric_limits<double>::infinity())
        throw std::invalid_argument("radio.tx_power_dbm must be a number");
    const double coded_symbols = packet_length_bytes * 8.0 / (coding_rate * bits_per_symbol);
    if (coded_symbols > slot_length_symbols)
        throw std::invalid_argument("coded packet does not fit in one slot");
}

double mean_snr_db(double distance_m, const RadioConfig& cfg, double shadowing_db) {
    if (!(distance_m > 0.0)) throw std::invalid_argument("mean_snr_db: distance must be > 0");
    return cfg.tx_power_dbm - cfg.reference_loss_db - 10.0 * cfg.pathloss_exponent * std::log10(distance_m) +
           shadowing_db - cfg.noise_floor_dbm;
}

double bfsk_bit_error(double snr_linear) { return 0.5 * std::exp(-0.5 * snr_linear); }

double coded_packet_error(double snr_linear, const RadioConfig& cfg) {
    const double p = bfsk_bit_error(snr_linear);
    const double pc = std::min(1.0, 16.0 * p * p);
    return 1.0 - std::pow(1.0 - pc, 8.0 * cfg.packet_length_bytes);
}

double success_probability(double snr_db, const RadioConfig& cfg) {
    if (cfg.ideal) return 1.0;
    if (snr_db == -std::numeric_limits<double>::infinity()) return 0.0;
    const double mean_lin = std::pow(10.0, snr_db / 10.0);
    if (cfg.model == SuccessModel::threshold) {
        const double th_lin = std::pow(10.0, cfg.success_threshold_db / 10.0);
        return std::exp(-th_lin / mean_lin);
    }
    // E_g[1 - PER(mean * g)] with g ~ Exp(1); substitute g = -ln(u).
    constexpr int n = 4096;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = (i + 0.5) / n;
        acc += 1.0 - coded_packet_error(-std::log(u) * mean_lin, cfg);
    }
    return acc / n;
}

PacketTrial packet_trial(double distance_m, double shadowing_db, const RadioConfig& cfg, Stream& rng) {
    PacketTrial t;
    t.distance_m = distance_m;
    t.shadowing_db = shadowing_db;
    if (cfg.ideal) {
        t.success = true;
        return t;
    }
    t.fading_gain = rng.rayleigh_power();
    const double mean = mean_snr_db(distance_m, cfg, shadowing_db);
    if (cfg.model == SuccessModel::threshold) {
        t.success = mean + 10.0 * std::log10(t.fading_gain) >= cfg.success_threshold_db;
    } else {
        const double gamma = std::pow(10.0, mean / 10.0) * t.fading_gain;
        t.success = rng.uniform() >= coded_packet_error(gamma, cfg);
    }
    return t;
}

bool packet_success(double distance_m, const RadioConfig& cfg, Stream& rng, double shadowing_db) {
    return packet_trial(distance_m, shadowing_db, cfg, rng).success;
}

Link::Link(double distance_m, int hops, const RadioConfig& cfg, Stream& shadowing_rng)
    : distance_m_(distance_m), hops_(hops) {
    if (hops != 1 && hops != 2) throw std::invalid_argument("Link: hops must be 1 or 2");
    if (!(distance_m > 0.0)) throw std::invalid_argument("Link: distance must be > 0");
    shadowing_.assign(static_cast<std::size_t>(hops), 0.0);
    for (auto& s : shadowing_) s = cfg.shadowing_sigma_db * shadowing_rng.normal();
}

bool Link::try_hop(int hop, const RadioConfig& cfg, Stream& fading_rng) const {
    return packet_trial(hop_distance(), shadowing_db(hop), cfg, fading_rng).success;
}

double Link::delivery_probability(const RadioConfig& cfg) const {
    double p = 1.0;
    for (int h = 0; h < hops_; ++h) p *= success_probability(mean_snr_db(hop_distance(), cfg, shadowing_db(h)), cfg);
    return p;
}

double expected_throughput_kbps(double distance_m, const RadioConfig& cfg, int hops) {
    if (hops != 1 && hops != 2) throw std::invalid_argument("expected_throughput: hops must be 1 or 2");
    const double p = success_probability(mean_snr_db(distance_m / hops, cfg), cfg);
    const double ceiling = cfg.goodput_ceiling_bps() / 1000.0;
    return hops == 1 ? ceiling * p : ceiling / 2.0 * p * p;
}

}  // namespace drsim
