#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "drsim/control.hpp"

namespace drsim {

enum class Topology { centralized, centralized_2hop, distributed };

const char* to_string(Topology t);
Topology topology_from_string(const std::string& s);
inline int hops_of(Topology t) { return t == Topology::centralized_2hop ? 2 : 1; }

enum class Direction { uplink, downlink };

struct SlotAssignment {
    std::size_t slot = 0;
    std::size_t channel = 0;
    std::size_t gateway = 0;  // index within the channel
    Direction direction = Direction::uplink;
    int hop = 0;
    bool completes = true;  // last hop of the logical transmission
};

/// Round-Robin guaranteed-time-slot frame. Each channel is one controller's
/// wireless cell; distributed clusters run on orthogonal channels in
/// lockstep, so every channel shares the same period.
struct Frame {
    Topology topology = Topology::centralized;
    ControlMode mode = ControlMode::batch;
    double slot_duration_s = 0.0192;
    std::size_t period_slots = 0;
    std::vector<std::size_t> channel_sizes;
    std::vector<SlotAssignment> assignments;  // sorted by (slot, channel)
    /// Parent-layer exchanges (delay-free backbone) happen at the start of
    /// these slots, after the previous slot's deliveries.
    std::vector<std::size_t> backbone_slots;

    double period_s() const { return static_cast<double>(period_slots) * slot_duration_s; }
    std::size_t n_channels() const { return channel_sizes.size(); }

    /// Assignment of `channel` at `slot`, or nullptr for an idle slot.
    const SlotAssignment* at(std::size_t channel, std::size_t slot) const;
    bool is_backbone_slot(std::size_t slot) const;

    // channel-major lookup table into `assignments`
    std::vector<std::size_t> table;
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
};

/// Frame for `n` gateways. For the distributed topology gateways are split
/// contiguously into channels of `n_cs`; the other topologies ignore n_cs.
///   centralized       t0 = 2 * n * T_slot
///   centralized_2hop  t0 = 4 * n * T_slot
///   distributed       t0 = 2 * n_cs * T_slot
Frame build_frame(Topology topology, std::size_t n, std::size_t n_cs, double slot_duration_s = 0.0192,
                  ControlMode mode = ControlMode::batch);

/// Timing-chart dump: slot,start_s,channel,kind,gateway,hop
void write_frame_csv(const Frame& frame, std::ostream& os);

}  // namespace drsim
