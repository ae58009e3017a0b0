#include "drsim/tdma.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

namespace drsim {

const char* to_string(Topology t) {
    switch (t) {
        case Topology::centralized: return "centralized";
        case Topology::centralized_2hop: return "centralized_2hop";
        case Topology::distributed: return "distributed";
    }
    return "?";
}

Topology topology_from_string(const std::string& s) {
    if (s == "centralized") return Topology::centralized;
    if (s == "centralized_2hop") return Topology::centralized_2hop;
    if (s == "distributed") return Topology::distributed;
    throw std::invalid_argument("unknown topology '" + s + "'");
}

const SlotAssignment* Frame::at(std::size_t channel, std::size_t slot) const {
    const std::size_t idx = table.at(channel * period_slots + slot);
    return idx == npos ? nullptr : &assignments[idx];
}

bool Frame::is_backbone_slot(std::size_t slot) const {
    return std::binary_search(backbone_slots.begin(), backbone_slots.end(), slot);
}

Frame build_frame(Topology topology, std::size_t n, std::size_t n_cs, double slot_duration_s, ControlMode mode) {
    if (n == 0) throw std::invalid_argument("build_frame: n must be >= 1");
    if (topology == Topology::distributed && n_cs == 0)
        throw std::invalid_argument("build_frame: n_cs must be >= 1 for the distributed topology");
    if (!(slot_duration_s > 0.0)) throw std::invalid_argument("build_frame: slot duration must be > 0");

    Frame f;
    f.topology = topology;
    f.mode = mode;
    f.slot_duration_s = slot_duration_s;
    const std::size_t per_channel = topology == Topology::distributed ? std::min(n_cs, n) : n;
    const auto hops = static_cast<std::size_t>(hops_of(topology));
    for (std::size_t first = 0; first < n; first += per_channel)
        f.channel_sizes.push_back(std::min(per_channel, n - first));
    f.period_slots = 2 * per_channel * hops;

    for (std::size_t c = 0; c < f.channel_sizes.size(); ++c) {
        for (std::size_t g = 0; g < f.channel_sizes[c]; ++g) {
            for (std::size_t h = 0; h < hops; ++h) {
                std::size_t up = 0;
                std::size_t down = 0;
                if (mode == ControlMode::batch) {
                    up = g * hops + h;
                    down = per_channel * hops + g * hops + h;
                } else {
                    up = 2 * g * hops + h;
                    down = (2 * g + 1) * hops + h;
                }
                const bool last = h + 1 == hops;
                f.assignments.push_back({up, c, g, Direction::uplink, static_cast<int>(h), last});
                f.assignments.push_back({down, c, g, Direction::downlink, static_cast<int>(h), last});
            }
        }
    }
    if (mode == ControlMode::batch) {
        f.backbone_slots.push_back(per_channel * hops);
    } else {
        for (std::size_t g = 0; g < per_channel; ++g) f.backbone_slots.push_back((2 * g + 1) * hops);
    }

    std::sort(f.assignments.begin(), f.assignments.end(), [](const SlotAssignment& a, const SlotAssignment& b) {
        return a.slot != b.slot ? a.slot < b.slot : a.channel < b.channel;
    });
    f.table.assign(f.channel_sizes.size() * f.period_slots, Frame::npos);
    for (std::size_t i = 0; i < f.assignments.size(); ++i) {
        const auto& a = f.assignments[i];
        auto& cell = f.table[a.channel * f.period_slots + a.slot];
        if (cell != Frame::npos) throw std::logic_error("build_frame: two links share a slot");
        cell = i;
    }
    return f;
}

void write_frame_csv(const Frame& frame, std::ostream& os) {
    os << "slot,start_s,channel,kind,gateway,hop\n";
    std::size_t next = 0;
    for (std::size_t s = 0; s < frame.period_slots; ++s) {
        const double start = static_cast<double>(s) * frame.slot_duration_s;
        if (frame.is_backbone_slot(s)) {
            for (std::size_t c = 0; c < frame.n_channels(); ++c)
                os << fmt::format("{},{:.4f},{},backbone,-1,0\n", s, start, c);
        }
        while (next < frame.assignments.size() && frame.assignments[next].slot == s) {
            const auto& a = frame.assignments[next++];
            os << fmt::format("{},{:.4f},{},{},{},{}\n", s, start, a.channel,
                              a.direction == Direction::uplink ? "uplink" : "downlink", a.gateway, a.hop);
        }
    }
}

}  // namespace drsim
