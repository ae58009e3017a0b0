#pragma once

#include <span>
#include <string>
#include <vector>

#include "drsim/rng.hpp"

namespace drsim {

enum class SuccessModel { threshold, ber };

const char* to_string(SuccessModel m);
SuccessModel success_model_from_string(const std::string& s);

/// Radio and air-interface parameters of the gateway-controller links.
struct RadioConfig {
    double tx_power_dbm = 24.0;  // ~250 mW
    double pathloss_exponent = 3.2;
    double shadowing_sigma_db = 8.0;
    double symbol_rate = 50e3;  // symbols/s
    double bits_per_symbol = 1.0;
    double coding_rate = 0.5;
    double packet_length_bytes = 32.0;
    double slot_length_symbols = 960.0;
    double noise_floor_dbm = -115.0;
    double reference_loss_db = 31.5;  // at 1 m
    double success_threshold_db = 10.0;
    SuccessModel model = SuccessModel::threshold;
    bool ideal = false;  // every packet succeeds

    double slot_duration_s() const { return slot_length_symbols / symbol_rate; }
    /// Delivered payload rate when every slot succeeds and half the slots
    /// carry uplink traffic (bits/s).
    double goodput_ceiling_bps() const;

    /// Throws std::invalid_argument on out-of-range fields.
    void validate() const;
};

/// Mean SNR in dB at distance d for a given shadowing realization.
double mean_snr_db(double distance_m, const RadioConfig& cfg, double shadowing_db = 0.0);

/// Probability a single slot succeeds given the mean SNR (averaged over
/// Rayleigh fading).
double success_probability(double mean_snr_db_value, const RadioConfig& cfg);

/// Bit error probability of noncoherent binary FSK at linear SNR gamma.
double bfsk_bit_error(double snr_linear);
/// Packet error rate for the rate-1/2 coded packet at linear SNR gamma.
double coded_packet_error(double snr_linear, const RadioConfig& cfg);

struct PacketTrial {
    double distance_m = 0.0;
    double shadowing_db = 0.0;
    double fading_gain = 1.0;
    bool success = false;
};

/// One slot over a link of length d: fresh Rayleigh draw against the given
/// shadowing.
PacketTrial packet_trial(double distance_m, double shadowing_db, const RadioConfig& cfg, Stream& rng);
bool packet_success(double distance_m, const RadioConfig& cfg, Stream& rng, double shadowing_db = 0.0);

/// A link with a fixed shadowing realization (quasi-static environment).
class Link {
public:
    Link() = default;
    /// `hops` == 2 places a relay at the geometric midpoint; each hop gets
    /// its own shadowing draw.
    Link(double distance_m, int hops, const RadioConfig& cfg, Stream& shadowing_rng);

    double distance() const { return distance_m_; }
    int hops() const { return hops_; }
    double shadowing_db(int hop) const { return shadowing_[static_cast<std::size_t>(hop)]; }
    double hop_distance() const { return distance_m_ / hops_; }

    /// Slot-level trial of one hop.
    bool try_hop(int hop, const RadioConfig& cfg, Stream& fading_rng) const;
    /// Success probability of a full (all hops) delivery.
    double delivery_probability(const RadioConfig& cfg) const;

private:
    double distance_m_ = 1.0;
    int hops_ = 1;
    std::vector<double> shadowing_{0.0};
};

/// Goodput in kbit/s at distance d with no shadowing, hops in {1, 2}.
double expected_throughput_kbps(double distance_m, const RadioConfig& cfg, int hops);

}  // namespace drsim
