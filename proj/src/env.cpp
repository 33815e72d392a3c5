#include "env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dsa {

EventChainSet::EventChainSet(std::vector<double> p_, std::vector<double> q_,
                             std::vector<std::uint8_t> state_)
    : p(std::move(p_)), q(std::move(q_)), state(std::move(state_)) {
    if (p.size() != q.size() || p.size() != state.size())
        throw std::invalid_argument("EventChainSet: mismatched vector lengths");
    for (std::size_t m = 0; m < p.size(); ++m) {
        if (!(p[m] >= 0.0 && p[m] <= 1.0) || !(q[m] >= 0.0 && q[m] <= 1.0))
            throw std::invalid_argument(
                "EventChainSet: switching probability outside [0,1] for event " +
                std::to_string(m + 1));
        if (state[m] != 0 && state[m] != 1)
            throw std::invalid_argument("EventChainSet: state entries must be 0 or 1");
    }
}

EventChainSet EventChainSet::uniform(int num_events, double p, double q) {
    return EventChainSet(std::vector<double>(num_events, p),
                         std::vector<double>(num_events, q),
                         std::vector<std::uint8_t>(num_events, 0));
}

double EventChainSet::stationary_activity(int m) const {
    double denom = p[m] + q[m];
    if (denom == 0.0) return 0.5;
    return p[m] / denom;
}

void transition_events(EventChainSet& chains, Rng& rng) {
    for (std::size_t m = 0; m < chains.state.size(); ++m) {
        if (chains.state[m] == 0) {
            if (rng.bernoulli(chains.p[m])) chains.state[m] = 1;
        } else {
            if (rng.bernoulli(chains.q[m])) chains.state[m] = 0;
        }
    }
}

void redraw_stationary(EventChainSet& chains, Rng& rng) {
    for (std::size_t m = 0; m < chains.state.size(); ++m)
        chains.state[m] = rng.bernoulli(chains.stationary_activity(static_cast<int>(m))) ? 1 : 0;
}

Topology Topology::from_monitored(std::vector<std::vector<int>> monitored,
                                  int num_events) {
    Topology topo;
    topo.monitored = std::move(monitored);
    topo.watchers.assign(num_events, {});
    for (std::size_t k = 0; k < topo.monitored.size(); ++k) {
        auto& events = topo.monitored[k];
        if (events.empty())
            throw std::invalid_argument("Topology: device " + std::to_string(k + 1) +
                                        " monitors no events");
        std::sort(events.begin(), events.end());
        if (std::adjacent_find(events.begin(), events.end()) != events.end())
            throw std::invalid_argument("Topology: duplicate event for device " +
                                        std::to_string(k + 1));
        for (int m : events) {
            if (m < 1 || m > num_events)
                throw std::invalid_argument("Topology: event id " + std::to_string(m) +
                                            " out of range");
            topo.watchers[m - 1].push_back(static_cast<int>(k + 1));
        }
    }
    return topo;
}

void RewardParams::validate() const {
    if (!(C < B && B <= 0.0 && 0.0 < A))
        throw std::invalid_argument("RewardParams: require C < B <= 0 < A");
}

std::vector<std::uint8_t> observe(const EventChainSet& chains,
                                  const Topology& topology, int device) {
    if (device < 1 || device > topology.num_devices())
        throw std::invalid_argument("observe: unknown device " + std::to_string(device));
    const auto& events = topology.monitored[device - 1];
    std::vector<std::uint8_t> obs(events.size());
    for (std::size_t j = 0; j < events.size(); ++j)
        obs[j] = chains.state[events[j] - 1];
    return obs;
}

FrameOutcome resolve_frame(std::span<const DeviceAction> actions,
                           const EventChainSet& chains,
                           const Topology& topology, int num_slots) {
    const int K = topology.num_devices();
    const int M = topology.num_events();
    if (static_cast<int>(actions.size()) != K)
        throw std::invalid_argument("resolve_frame: one action per device required");

    for (int k = 0; k < K; ++k) {
        const auto& a = actions[k];
        if (a.is_idle()) continue;
        if (a.slot < 1 || a.slot > num_slots)
            throw std::invalid_argument("resolve_frame: slot out of range for device " +
                                        std::to_string(k + 1));
        const auto& events = topology.monitored[k];
        if (!std::binary_search(events.begin(), events.end(), a.event))
            throw std::invalid_argument("resolve_frame: device " + std::to_string(k + 1) +
                                        " transmitted unmonitored event " +
                                        std::to_string(a.event));
        if (chains.state[a.event - 1] != 1)
            throw std::invalid_argument("resolve_frame: device " + std::to_string(k + 1) +
                                        " transmitted inactive event " +
                                        std::to_string(a.event));
    }

    FrameOutcome out;
    out.slots.assign(num_slots, {});
    out.delivered.assign(M, 0);
    out.feedback.assign(K, Feedback::IdleOrNone);

    std::vector<int> transmitters(num_slots, 0);
    for (int k = 0; k < K; ++k) {
        if (actions[k].is_idle()) continue;
        int t = actions[k].slot - 1;
        ++transmitters[t];
        out.slots[t].device = k + 1;
        out.slots[t].event = actions[k].event;
    }
    for (int t = 0; t < num_slots; ++t) {
        if (transmitters[t] == 0) {
            out.slots[t] = {};
        } else if (transmitters[t] == 1) {
            out.slots[t].state = SlotState::Winner;
        } else {
            out.slots[t] = {SlotState::Collision, 0, 0};
        }
    }

    // Losers of collided slots.
    for (int k = 0; k < K; ++k) {
        if (actions[k].is_idle()) continue;
        if (out.slots[actions[k].slot - 1].state == SlotState::Collision)
            out.feedback[k] = Feedback::Collision;
    }

    // Among winners of the same event, the earliest slot is the successful
    // report and later ones are redundant.
    for (int t = 0; t < num_slots; ++t) {
        const auto& slot = out.slots[t];
        if (slot.state != SlotState::Winner) continue;
        if (out.delivered[slot.event - 1]) {
            out.feedback[slot.device - 1] = Feedback::Redundant;
        } else {
            out.delivered[slot.event - 1] = 1;
            out.feedback[slot.device - 1] = Feedback::Success;
        }
    }
    return out;
}

std::optional<double> frame_event_rate(const FrameOutcome& outcome,
                                       const EventChainSet& chains,
                                       int num_slots) {
    int active = 0;
    int delivered = 0;
    for (int m = 0; m < chains.num_events(); ++m) {
        if (chains.state[m]) {
            ++active;
            if (outcome.delivered[m]) ++delivered;
        }
    }
    if (active == 0) return std::nullopt;
    return static_cast<double>(delivered) / std::min(num_slots, active);
}

std::vector<double> rewards_from_outcome(const FrameOutcome& outcome,
                                         const RewardParams& params) {
    std::vector<double> rewards(outcome.feedback.size());
    for (std::size_t k = 0; k < rewards.size(); ++k) {
        switch (outcome.feedback[k]) {
            case Feedback::Success: rewards[k] = params.A; break;
            case Feedback::Redundant: rewards[k] = params.B; break;
            case Feedback::Collision: rewards[k] = params.C; break;
            case Feedback::IdleOrNone: rewards[k] = 0.0; break;
        }
    }
    return rewards;
}

double average_event_rate(std::span<const std::optional<double>> rates) {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : rates) {
        if (r) {
            sum += *r;
            ++n;
        }
    }
    if (n == 0)
        throw std::domain_error("average_event_rate: all frames vacuous, metric undefined");
    return sum / n;
}

double discounted_return(std::span<const std::optional<double>> rates,
                         double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("discounted_return: gamma must lie in (0,1)");
    double sum = 0.0;
    double factor = 1.0;
    for (const auto& r : rates) {
        factor *= gamma;
        if (r) sum += factor * *r;
    }
    return sum;
}

}  // namespace dsa
