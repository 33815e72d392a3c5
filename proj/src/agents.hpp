#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <utility>
#include <vector>

#include "env.hpp"
#include "mlp.hpp"
#include "rng.hpp"

namespace dsa {

// Flat indexing of one device's action set: index 0 is idle, index
// 1 + j*T + (t-1) transmits the j-th monitored event in slot t.
struct ActionIndexing {
    std::vector<int> events;  // monitored events, ascending
    int num_slots = 0;

    int count() const { return 1 + static_cast<int>(events.size()) * num_slots; }

    int encode(const DeviceAction& action) const;
    DeviceAction decode(int index) const;

    // Idle always feasible; transmit entries feasible iff the event is active.
    std::vector<std::uint8_t> feasibility(std::span<const std::uint8_t> obs) const;
};

// Sliding window of the last W (observation, action) pairs, newest first
// in the flattened encoding (binary observation bits + one-hot action).
class HistoryWindow {
public:
    HistoryWindow(int window, int obs_len, int action_count);

    void push(std::span<const std::uint8_t> obs, int action_index);
    bool full() const { return static_cast<int>(entries_.size()) == window_; }
    int window() const { return window_; }
    int encoded_len() const { return window_ * (obs_len_ + action_count_); }

    // Writes the window followed by `current_obs`; zero-padded before warm-up.
    void encode(std::span<const std::uint8_t> current_obs,
                std::vector<double>& out) const;

private:
    int window_;
    int obs_len_;
    int action_count_;
    std::deque<std::pair<std::vector<std::uint8_t>, int>> entries_;  // newest front
};

struct IdqnHyperParams {
    double gamma = 0.9;
    double epsilon = 0.9;
    double epsilon_min = 0.05;
    double epsilon_decay = 0.995;
    bool epsilon_squaring = false;
    double lr = 1e-4;
    std::vector<int> hidden = {32, 32};
};

// Independent Q-learning for one device: epsilon-greedy over the masked
// action set, Q(history + current obs) with one SGD step per frame.
class IdqnAgent {
public:
    IdqnAgent(ActionIndexing indexing, int window, const IdqnHyperParams& hp,
              Rng& init_rng);

    int select_action(const HistoryWindow& history,
                      std::span<const std::uint8_t> obs,
                      std::span<const std::uint8_t> mask, Rng& rng) const;

    // One Bellman step toward y = r + gamma * max_feasible Q(next);
    // returns the pre-step squared error.
    double update(const HistoryWindow& history, std::span<const std::uint8_t> obs,
                  int action, double reward, const HistoryWindow& next_history,
                  std::span<const std::uint8_t> next_obs,
                  std::span<const std::uint8_t> next_mask);

    // Per-frame driver used by the harness: acts, learns from the previous
    // frame, keeps the window. Random warm-up for the first W frames.
    int step(std::span<const std::uint8_t> obs, std::span<const std::uint8_t> mask,
             Rng& rng);
    void learn(int action, double reward, std::span<const std::uint8_t> next_obs,
               std::span<const std::uint8_t> next_mask);
    void end_episode();

    double epsilon() const { return epsilon_; }
    const ActionIndexing& indexing() const { return indexing_; }
    const MlpParams& q_params() const { return q_; }
    MlpParams& q_params() { return q_; }

private:
    ActionIndexing indexing_;
    HistoryWindow history_;
    MlpParams q_;
    IdqnHyperParams hp_;
    double epsilon_;
    mutable MlpScratch scratch_;
    std::vector<double> input_buf_;
    std::vector<std::uint8_t> last_obs_;
};

double epsilon_decay(double epsilon, double decay, double epsilon_min);

int masked_argmax(std::span<const double> values,
                  std::span<const std::uint8_t> mask);

struct MadspgHyperParams {
    double gamma = 0.9;
    double tau = 0.99;
    double lr_actor = 1e-3;
    double lr_critic = 1e-3;
    // Entropy bonus weight, in units of the normalized advantage. Keeps
    // behavior policies off the simplex boundary early on, so the replay
    // buffer retains coverage of alternative joint actions; decayed each
    // episode so the policies can sharpen once the critics are informed.
    double entropy_coef = 0.5;
    double entropy_decay = 0.995;
    // Per-device probability of replacing the actor's draw with a uniform
    // feasible action; shares the entropy anneal schedule. Guarantees the
    // replay buffer keeps covering joint actions that collapsed actors
    // would otherwise never revisit.
    double explore_eps = 0.0;
    std::vector<int> hidden = {32, 32};
};

// One device's actor/critic pair plus slowly tracking target copies. The
// critic scores the joint observation/action of all devices.
struct MadspgAgent {
    ActionIndexing indexing;
    MlpParams actor, target_actor;
    MlpParams critic, target_critic;

    MadspgAgent(ActionIndexing idx, int critic_input_len,
                const MadspgHyperParams& hp, Rng& init_rng);

    // Categorical draw from masked_softmax(actor(obs)); returns the index
    // and its log-probability.
    std::pair<int, double> sample_action(std::span<const std::uint8_t> obs,
                                         std::span<const std::uint8_t> mask,
                                         Rng& rng);

    mutable MlpScratch scratch;
};

// Joint transition for all devices, as one replay record.
struct JointTransition {
    std::vector<std::vector<std::uint8_t>> obs;
    std::vector<int> actions;
    std::vector<double> rewards;
    std::vector<std::vector<std::uint8_t>> next_obs;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(JointTransition transition);
    // Uniform minibatch without replacement.
    std::vector<const JointTransition*> sample(std::size_t count, Rng& rng) const;
    std::size_t size() const { return buffer_.size(); }
    std::size_t capacity() const { return capacity_; }
    const JointTransition& at(std::size_t i) const { return buffer_[i]; }

private:
    std::size_t capacity_;
    std::deque<JointTransition> buffer_;
};

// Centralized training loop over all devices' actors and critics.
class MadspgTrainer {
public:
    MadspgTrainer(std::vector<ActionIndexing> indexings,
                  const MadspgHyperParams& hp, std::size_t replay_capacity,
                  int batch_size, int warmup, Rng& init_rng);

    std::vector<int> act(const std::vector<std::vector<std::uint8_t>>& obs,
                         Rng& rng);
    void record(JointTransition transition);
    // One critic + actor step per device, then target soft updates.
    void maybe_update(Rng& rng);
    // Anneals the entropy bonus; call once per episode.
    void end_episode() {
        hp_.entropy_coef *= hp_.entropy_decay;
        hp_.explore_eps *= hp_.entropy_decay;
    }

    double critic_update(int device,
                         std::span<const JointTransition* const> batch, Rng& rng);
    double actor_update(int device,
                        std::span<const JointTransition* const> batch, Rng& rng);

    MadspgAgent& agent(int device) { return agents_[device]; }
    int num_devices() const { return static_cast<int>(agents_.size()); }
    const ReplayBuffer& buffer() const { return buffer_; }
    ReplayBuffer& buffer() { return buffer_; }

private:
    void encode_joint(const std::vector<std::vector<std::uint8_t>>& obs,
                      std::span<const int> actions,
                      std::vector<double>& out) const;

    std::vector<MadspgAgent> agents_;
    MadspgHyperParams hp_;
    ReplayBuffer buffer_;
    int batch_size_;
    int warmup_;
    int critic_input_len_;
    std::vector<double> joint_buf_;
    std::vector<double> joint_next_buf_;
    MlpScratch scratch_;
    Gradients grad_buf_;
};

// T distinct devices drawn uniformly; the i-th scheduled device owns slot i
// and reports a uniformly chosen active monitored event, or idles.
std::vector<DeviceAction> tdma_actions(const Topology& topology,
                                       const EventChainSet& chains,
                                       int num_slots, Rng& rng);

// Every device with an active monitored event reports a uniformly chosen
// one in a uniformly chosen slot.
std::vector<DeviceAction> aloha_actions(const Topology& topology,
                                        const EventChainSet& chains,
                                        int num_slots, Rng& rng);

}  // namespace dsa
