#include "agents.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dsa {

int ActionIndexing::encode(const DeviceAction& action) const {
    if (action.is_idle()) return 0;
    auto it = std::lower_bound(events.begin(), events.end(), action.event);
    if (it == events.end() || *it != action.event)
        throw std::invalid_argument("ActionIndexing: event not monitored");
    int j = static_cast<int>(it - events.begin());
    return 1 + j * num_slots + (action.slot - 1);
}

DeviceAction ActionIndexing::decode(int index) const {
    if (index == 0) return DeviceAction::idle();
    if (index < 0 || index >= count())
        throw std::invalid_argument("ActionIndexing: index out of range");
    int j = (index - 1) / num_slots;
    int t = (index - 1) % num_slots + 1;
    return DeviceAction::transmit(events[j], t);
}

std::vector<std::uint8_t> ActionIndexing::feasibility(
    std::span<const std::uint8_t> obs) const {
    if (obs.size() != events.size())
        throw std::invalid_argument("ActionIndexing: observation length mismatch");
    std::vector<std::uint8_t> mask(count(), 0);
    mask[0] = 1;
    for (std::size_t j = 0; j < events.size(); ++j)
        if (obs[j])
            for (int t = 0; t < num_slots; ++t)
                mask[1 + static_cast<int>(j) * num_slots + t] = 1;
    return mask;
}

HistoryWindow::HistoryWindow(int window, int obs_len, int action_count)
    : window_(window), obs_len_(obs_len), action_count_(action_count) {
    if (window < 1) throw std::invalid_argument("HistoryWindow: window must be >= 1");
}

void HistoryWindow::push(std::span<const std::uint8_t> obs, int action_index) {
    entries_.emplace_front(std::vector<std::uint8_t>(obs.begin(), obs.end()),
                           action_index);
    if (static_cast<int>(entries_.size()) > window_) entries_.pop_back();
}

void HistoryWindow::encode(std::span<const std::uint8_t> current_obs,
                           std::vector<double>& out) const {
    out.assign(encoded_len() + obs_len_, 0.0);
    std::size_t pos = 0;
    for (const auto& [obs, action] : entries_) {
        for (int i = 0; i < obs_len_; ++i) out[pos + i] = obs[i];
        out[pos + obs_len_ + action] = 1.0;
        pos += obs_len_ + action_count_;
    }
    pos = encoded_len();
    for (int i = 0; i < obs_len_; ++i) out[pos + i] = current_obs[i];
}

double epsilon_decay(double epsilon, double decay, double epsilon_min) {
    if (!(decay > 0.0 && decay < 1.0))
        throw std::invalid_argument("epsilon_decay: decay must lie in (0,1)");
    return std::max(epsilon * decay, epsilon_min);
}

int masked_argmax(std::span<const double> values,
                  std::span<const std::uint8_t> mask) {
    int best = -1;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!mask[i]) continue;
        if (best < 0 || values[i] > values[best]) best = static_cast<int>(i);
    }
    if (best < 0) throw std::invalid_argument("masked_argmax: empty mask");
    return best;
}

namespace {

int uniform_feasible(std::span<const std::uint8_t> mask, Rng& rng) {
    int feasible = 0;
    for (auto m : mask) feasible += m;
    if (feasible == 0) throw std::invalid_argument("empty feasibility mask");
    int pick = rng.uniform_int(feasible);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        if (pick-- == 0) return static_cast<int>(i);
    }
    return 0;  // unreachable
}

std::vector<int> mlp_dims(int input, std::span<const int> hidden, int output) {
    std::vector<int> dims;
    dims.push_back(input);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(output);
    return dims;
}

}  // namespace

IdqnAgent::IdqnAgent(ActionIndexing indexing, int window,
                     const IdqnHyperParams& hp, Rng& init_rng)
    : indexing_(std::move(indexing)),
      history_(window, static_cast<int>(indexing_.events.size()),
               indexing_.count()),
      q_(MlpParams::init(
          mlp_dims(window * (static_cast<int>(indexing_.events.size()) +
                             indexing_.count()) +
                       static_cast<int>(indexing_.events.size()),
                   hp.hidden, indexing_.count()),
          init_rng)),
      hp_(hp),
      epsilon_(hp.epsilon) {}

int IdqnAgent::select_action(const HistoryWindow& history,
                             std::span<const std::uint8_t> obs,
                             std::span<const std::uint8_t> mask,
                             Rng& rng) const {
    if (rng.bernoulli(epsilon_)) return uniform_feasible(mask, rng);
    std::vector<double> input;
    history.encode(obs, input);
    auto q = mlp_forward(q_, input, scratch_);
    return masked_argmax(q, mask);
}

double IdqnAgent::update(const HistoryWindow& history,
                         std::span<const std::uint8_t> obs, int action,
                         double reward, const HistoryWindow& next_history,
                         std::span<const std::uint8_t> next_obs,
                         std::span<const std::uint8_t> next_mask) {
    std::vector<double> next_input;
    next_history.encode(next_obs, next_input);
    auto q_next = mlp_forward(q_, next_input, scratch_);
    double target = reward + hp_.gamma * q_next[masked_argmax(q_next, next_mask)];

    history.encode(obs, input_buf_);
    auto q = mlp_forward(q_, input_buf_, scratch_);
    double err = q[action] - target;

    std::vector<double> upstream(indexing_.count(), 0.0);
    upstream[action] = 2.0 * err;
    Gradients grads = MlpParams::zeros_like(q_);
    mlp_backward_acc(q_, input_buf_, upstream, grads, scratch_);
    sgd_step(q_, grads, hp_.lr);
    return err * err;
}

int IdqnAgent::step(std::span<const std::uint8_t> obs,
                    std::span<const std::uint8_t> mask, Rng& rng) {
    last_obs_.assign(obs.begin(), obs.end());
    if (!history_.full()) return uniform_feasible(mask, rng);
    return select_action(history_, obs, mask, rng);
}

void IdqnAgent::learn(int action, double reward,
                      std::span<const std::uint8_t> next_obs,
                      std::span<const std::uint8_t> next_mask) {
    if (history_.full()) {
        HistoryWindow next_history = history_;
        next_history.push(last_obs_, action);
        update(history_, last_obs_, action, reward, next_history, next_obs,
               next_mask);
        history_ = std::move(next_history);
    } else {
        history_.push(last_obs_, action);
    }
}

void IdqnAgent::end_episode() {
    if (hp_.epsilon_squaring)
        epsilon_ = std::max(epsilon_ * epsilon_, hp_.epsilon_min);
    else
        epsilon_ = epsilon_decay(epsilon_, hp_.epsilon_decay, hp_.epsilon_min);
}

MadspgAgent::MadspgAgent(ActionIndexing idx, int critic_input_len,
                         const MadspgHyperParams& hp, Rng& init_rng)
    : indexing(std::move(idx)),
      actor(MlpParams::init(
          mlp_dims(static_cast<int>(indexing.events.size()), hp.hidden,
                   indexing.count()),
          init_rng)),
      target_actor(actor),
      critic(MlpParams::init(mlp_dims(critic_input_len, hp.hidden, 1), init_rng)),
      target_critic(critic) {}

std::pair<int, double> MadspgAgent::sample_action(
    std::span<const std::uint8_t> obs, std::span<const std::uint8_t> mask,
    Rng& rng) {
    std::vector<double> input(obs.begin(), obs.end());
    auto logits = mlp_forward(actor, input, scratch);
    auto probs = masked_softmax(logits, mask);
    double u = rng.uniform();
    double cum = 0.0;
    int drawn = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        cum += probs[i];
        if (u < cum) {
            drawn = static_cast<int>(i);
            break;
        }
        if (i + 1 == probs.size()) drawn = static_cast<int>(i);
    }
    // Rounding can leave the cumulative just below 1; land on the last
    // feasible entry in that case.
    while (!mask[drawn]) --drawn;
    return {drawn, std::log(probs[drawn])};
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
}

void ReplayBuffer::push(JointTransition transition) {
    buffer_.push_back(std::move(transition));
    if (buffer_.size() > capacity_) buffer_.pop_front();
}

std::vector<const JointTransition*> ReplayBuffer::sample(std::size_t count,
                                                         Rng& rng) const {
    if (count > buffer_.size())
        throw std::invalid_argument("ReplayBuffer: sample larger than buffer");
    std::vector<std::uint32_t> indices(buffer_.size());
    std::iota(indices.begin(), indices.end(), 0);
    std::vector<const JointTransition*> batch;
    batch.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t j = i + rng.uniform_int(static_cast<int>(indices.size() - i));
        std::swap(indices[i], indices[j]);
        batch.push_back(&buffer_[indices[i]]);
    }
    return batch;
}

MadspgTrainer::MadspgTrainer(std::vector<ActionIndexing> indexings,
                             const MadspgHyperParams& hp,
                             std::size_t replay_capacity, int batch_size,
                             int warmup, Rng& init_rng)
    : hp_(hp),
      buffer_(replay_capacity),
      batch_size_(batch_size),
      warmup_(warmup) {
    critic_input_len_ = 0;
    for (const auto& idx : indexings)
        critic_input_len_ += static_cast<int>(idx.events.size()) + idx.count();
    agents_.reserve(indexings.size());
    for (auto& idx : indexings)
        agents_.emplace_back(std::move(idx), critic_input_len_, hp, init_rng);
}

std::vector<int> MadspgTrainer::act(
    const std::vector<std::vector<std::uint8_t>>& obs, Rng& rng) {
    std::vector<int> actions(agents_.size());
    for (std::size_t k = 0; k < agents_.size(); ++k) {
        auto mask = agents_[k].indexing.feasibility(obs[k]);
        if (rng.bernoulli(hp_.explore_eps)) {
            // Uniform feasible draw. Keeps every joint action represented in
            // the replay buffer while the bonus is still warm, so critics can
            // score actions the actors have (prematurely) stopped taking.
            int feasible = 0;
            for (auto m : mask) feasible += m;
            int pick = rng.uniform_int(feasible);
            for (std::size_t j = 0; j < mask.size(); ++j)
                if (mask[j] && pick-- == 0) { actions[k] = static_cast<int>(j); break; }
        } else {
            actions[k] = agents_[k].sample_action(obs[k], mask, rng).first;
        }
    }
    return actions;
}

void MadspgTrainer::record(JointTransition transition) {
    buffer_.push(std::move(transition));
}

void MadspgTrainer::encode_joint(
    const std::vector<std::vector<std::uint8_t>>& obs,
    std::span<const int> actions, std::vector<double>& out) const {
    out.assign(critic_input_len_, 0.0);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < agents_.size(); ++k) {
        for (auto bit : obs[k]) out[pos++] = bit;
        out[pos + actions[k]] = 1.0;
        pos += agents_[k].indexing.count();
    }
}

double MadspgTrainer::critic_update(
    int device, std::span<const JointTransition* const> batch, Rng& rng) {
    if (batch.empty())
        throw std::invalid_argument("critic_update: empty minibatch");
    auto& agent = agents_[device];
    Gradients grads = MlpParams::zeros_like(agent.critic);
    const double inv_s = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    std::vector<int> next_actions(agents_.size());
    double upstream[1];
    for (const auto* tr : batch) {
        for (std::size_t i = 0; i < agents_.size(); ++i) {
            auto mask = agents_[i].indexing.feasibility(tr->next_obs[i]);
            std::vector<double> in(tr->next_obs[i].begin(), tr->next_obs[i].end());
            auto logits = mlp_forward(agents_[i].target_actor, in, scratch_);
            auto probs = masked_softmax(logits, mask);
            double u = rng.uniform();
            double cum = 0.0;
            int drawn = static_cast<int>(probs.size()) - 1;
            for (std::size_t j = 0; j < probs.size(); ++j) {
                cum += probs[j];
                if (u < cum) {
                    drawn = static_cast<int>(j);
                    break;
                }
            }
            while (!mask[drawn]) --drawn;
            next_actions[i] = drawn;
        }
        encode_joint(tr->next_obs, next_actions, joint_next_buf_);
        double q_next = mlp_forward(agent.target_critic, joint_next_buf_, scratch_)[0];
        double target = tr->rewards[device] + hp_.gamma * q_next;

        encode_joint(tr->obs, tr->actions, joint_buf_);
        double q = mlp_forward(agent.critic, joint_buf_, scratch_)[0];
        double err = q - target;
        loss += err * err;
        upstream[0] = 2.0 * err * inv_s;
        mlp_backward_acc(agent.critic, joint_buf_, upstream, grads, scratch_);
    }
    sgd_step(agent.critic, grads, hp_.lr_critic);
    return loss * inv_s;
}

double MadspgTrainer::actor_update(
    int device, std::span<const JointTransition* const> batch, Rng& rng) {
    if (batch.empty())
        throw std::invalid_argument("actor_update: empty minibatch");
    (void)rng;
    auto& agent = agents_[device];
    Gradients grads = MlpParams::zeros_like(agent.actor);
    const double inv_s = 1.0 / static_cast<double>(batch.size());
    std::vector<int> actions(agents_.size());

    // Expected policy gradient over this device's action, holding the
    // other devices' buffered actions fixed: grad E_{a~pi}[Q] =
    // sum_j pi_j (Q_j - V) * d logits_j, with V = sum_j pi_j Q_j — the
    // exact conditional expectation of the single-resample score
    // estimator. Advantages are normalized by their policy-weighted batch
    // standard deviation so the step size is invariant to the reward
    // scale; this bounds how fast logits can drift during the early
    // high-collision phase, which otherwise drives policies into
    // saturation they cannot recover from.
    struct SampleEval {
        std::vector<std::uint8_t> mask;
        std::vector<double> probs;
        std::vector<double> advantage;
    };
    std::vector<SampleEval> evals(batch.size());
    double var = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const auto* tr = batch[s];
        auto& ev = evals[s];
        ev.mask = agent.indexing.feasibility(tr->obs[device]);
        std::vector<double> in(tr->obs[device].begin(), tr->obs[device].end());
        auto logits = mlp_forward(agent.actor, in, scratch_);
        auto probs = masked_softmax(logits, ev.mask);
        ev.probs.assign(probs.begin(), probs.end());
        ev.advantage.assign(probs.size(), 0.0);
        double value = 0.0;
        for (std::size_t j = 0; j < probs.size(); ++j) {
            if (!ev.mask[j]) continue;
            actions = tr->actions;
            actions[device] = static_cast<int>(j);
            encode_joint(tr->obs, actions, joint_buf_);
            ev.advantage[j] = mlp_forward(agent.critic, joint_buf_, scratch_)[0];
            value += probs[j] * ev.advantage[j];
        }
        for (std::size_t j = 0; j < probs.size(); ++j) {
            if (!ev.mask[j]) continue;
            ev.advantage[j] -= value;
            var += probs[j] * ev.advantage[j] * ev.advantage[j] * inv_s;
        }
    }
    const double scale = var > 1e-24 ? 1.0 / std::sqrt(var) : 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const auto* tr = batch[s];
        const auto& ev = evals[s];
        std::vector<double> in(tr->obs[device].begin(), tr->obs[device].end());
        double entropy = 0.0;
        for (std::size_t j = 0; j < ev.probs.size(); ++j)
            if (ev.mask[j] && ev.probs[j] > 0.0)
                entropy -= ev.probs[j] * std::log(ev.probs[j]);
        // Negated so that sgd_step ascends. The entropy bonus shares the
        // advantage-normalization gate: with a degenerate critic the whole
        // update vanishes.
        std::vector<double> upstream(ev.probs.size(), 0.0);
        for (std::size_t j = 0; j < upstream.size(); ++j) {
            if (!ev.mask[j] || scale == 0.0) continue;
            double ascent = ev.advantage[j] * scale;
            if (ev.probs[j] > 0.0)
                ascent += hp_.entropy_coef * (-std::log(ev.probs[j]) - entropy);
            upstream[j] = -inv_s * ev.probs[j] * ascent;
        }
        mlp_backward_acc(agent.actor, in, upstream, grads, scratch_);
    }
    double norm_sq = 0.0;
    for (const auto& layer : grads.layers) {
        for (double w : layer.weights) norm_sq += w * w;
        for (double b : layer.bias) norm_sq += b * b;
    }
    sgd_step(agent.actor, grads, hp_.lr_actor);
    return std::sqrt(norm_sq);
}

void MadspgTrainer::maybe_update(Rng& rng) {
    if (buffer_.size() < static_cast<std::size_t>(warmup_) ||
        buffer_.size() < static_cast<std::size_t>(batch_size_))
        return;
    for (int k = 0; k < num_devices(); ++k) {
        auto batch = buffer_.sample(batch_size_, rng);
        critic_update(k, batch, rng);
        actor_update(k, batch, rng);
    }
    for (auto& agent : agents_) {
        soft_update(agent.target_actor, agent.actor, hp_.tau);
        soft_update(agent.target_critic, agent.critic, hp_.tau);
    }
}

std::vector<DeviceAction> tdma_actions(const Topology& topology,
                                       const EventChainSet& chains,
                                       int num_slots, Rng& rng) {
    const int K = topology.num_devices();
    if (num_slots > K)
        throw std::invalid_argument("tdma_actions: more slots than devices");
    std::vector<int> devices(K);
    std::iota(devices.begin(), devices.end(), 0);
    std::vector<DeviceAction> actions(K, DeviceAction::idle());
    for (int slot = 1; slot <= num_slots; ++slot) {
        int j = slot - 1 + rng.uniform_int(K - slot + 1);
        std::swap(devices[slot - 1], devices[j]);
        int k = devices[slot - 1];
        std::vector<int> active;
        for (int m : topology.monitored[k])
            if (chains.state[m - 1]) active.push_back(m);
        if (!active.empty())
            actions[k] = DeviceAction::transmit(
                active[rng.uniform_int(static_cast<int>(active.size()))], slot);
    }
    return actions;
}

std::vector<DeviceAction> aloha_actions(const Topology& topology,
                                        const EventChainSet& chains,
                                        int num_slots, Rng& rng) {
    const int K = topology.num_devices();
    std::vector<DeviceAction> actions(K, DeviceAction::idle());
    for (int k = 0; k < K; ++k) {
        std::vector<int> active;
        for (int m : topology.monitored[k])
            if (chains.state[m - 1]) active.push_back(m);
        if (active.empty()) continue;
        int event = active[rng.uniform_int(static_cast<int>(active.size()))];
        int slot = 1 + rng.uniform_int(num_slots);
        actions[k] = DeviceAction::transmit(event, slot);
    }
    return actions;
}

}  // namespace dsa
