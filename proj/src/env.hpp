#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rng.hpp"

namespace dsa {

// Independent two-state Markov chains, one per event. p[m] is the
// inactive->active switching probability, q[m] the active->inactive one.
struct EventChainSet {
    std::vector<double> p;
    std::vector<double> q;
    std::vector<std::uint8_t> state;  // 0 or 1 per event

    EventChainSet(std::vector<double> p_, std::vector<double> q_,
                  std::vector<std::uint8_t> state_);

    int num_events() const { return static_cast<int>(state.size()); }

    // Symmetric chains with all events inactive.
    static EventChainSet uniform(int num_events, double p, double q);

    // Stationary activity probability p/(p+q); 0.5 for the frozen p=q=0 chain.
    double stationary_activity(int m) const;
};

// Advance every chain one frame.
void transition_events(EventChainSet& chains, Rng& rng);

// Draw every chain state independently from its stationary distribution.
void redraw_stationary(EventChainSet& chains, Rng& rng);

// The monitoring relation between devices and events. Events and devices
// are 1-based throughout.
struct Topology {
    std::vector<std::vector<int>> monitored;  // per device, ascending event ids
    std::vector<std::vector<int>> watchers;   // per event, ascending device ids

    static Topology from_monitored(std::vector<std::vector<int>> monitored,
                                   int num_events);

    int num_devices() const { return static_cast<int>(monitored.size()); }
    int num_events() const { return static_cast<int>(watchers.size()); }
};

// Per-frame device decision: idle, or transmit one monitored event in one
// slot. slot == 0 encodes idle.
struct DeviceAction {
    int event = 0;
    int slot = 0;

    bool is_idle() const { return slot == 0; }

    static DeviceAction idle() { return {}; }
    static DeviceAction transmit(int event, int slot) { return {event, slot}; }

    bool operator==(const DeviceAction&) const = default;
};

enum class SlotState : std::uint8_t { Empty, Winner, Collision };

struct SlotResult {
    SlotState state = SlotState::Empty;
    int device = 0;  // valid when state == Winner
    int event = 0;   // valid when state == Winner
};

enum class Feedback : std::uint8_t { Success, Redundant, Collision, IdleOrNone };

struct FrameOutcome {
    std::vector<SlotResult> slots;         // length T
    std::vector<std::uint8_t> delivered;   // length M
    std::vector<Feedback> feedback;        // length K
};

struct RewardParams {
    double A = 10.0;
    double B = -5.0;
    double C = -10.0;

    void validate() const;  // requires C < B <= 0 < A
};

// Binary activity of device k's monitored events, in ascending event order.
std::vector<std::uint8_t> observe(const EventChainSet& chains,
                                  const Topology& topology, int device);

// Slot contention and redundancy resolution for one frame. Actions must
// reference monitored, currently active events; violations throw.
FrameOutcome resolve_frame(std::span<const DeviceAction> actions,
                           const EventChainSet& chains,
                           const Topology& topology, int num_slots);

// Fraction of active events delivered, normalized by min(T, #active).
// nullopt flags a vacuous frame (no active events).
std::optional<double> frame_event_rate(const FrameOutcome& outcome,
                                       const EventChainSet& chains,
                                       int num_slots);

std::vector<double> rewards_from_outcome(const FrameOutcome& outcome,
                                         const RewardParams& params);

// Mean rate over non-vacuous frames; throws if every frame is vacuous.
double average_event_rate(std::span<const std::optional<double>> rates);

// Sum of gamma^f * R(f) with f starting at 1; vacuous frames contribute 0.
double discounted_return(std::span<const std::optional<double>> rates,
                         double gamma);

}  // namespace dsa
