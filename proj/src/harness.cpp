#include "harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dsa {

std::string to_string(Algorithm alg) {
    switch (alg) {
        case Algorithm::Idqn: return "idqn";
        case Algorithm::Madspg: return "madspg";
        case Algorithm::Tdma: return "tdma";
        case Algorithm::Aloha: return "aloha";
    }
    return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
    if (name == "idqn") return Algorithm::Idqn;
    if (name == "madspg") return Algorithm::Madspg;
    if (name == "tdma") return Algorithm::Tdma;
    if (name == "aloha") return Algorithm::Aloha;
    throw std::invalid_argument("algorithm: unknown value '" + name + "'");
}

std::string to_string(Scenario sc) {
    switch (sc) {
        case Scenario::NoCorrelation: return "none-correlation";
        case Scenario::FullCorrelation: return "full-correlation";
        case Scenario::Explicit: return "explicit";
    }
    return "?";
}

Scenario scenario_from_string(const std::string& name) {
    if (name == "none-correlation") return Scenario::NoCorrelation;
    if (name == "full-correlation") return Scenario::FullCorrelation;
    if (name == "explicit") return Scenario::Explicit;
    throw std::invalid_argument("scenario: unknown value '" + name + "'");
}

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
    if (num_devices < 1) fail("devices: must be >= 1");
    if (num_events < 1) fail("events: must be >= 1");
    if (num_slots < 1) fail("slots: must be >= 1");
    if (frames_per_episode < 1) fail("frames-per-episode: must be >= 1");
    if (episodes < 1) fail("episodes: must be >= 1");
    if (runs < 1) fail("runs: must be >= 1");
    if (algorithms.empty()) fail("algorithm: at least one required");
    std::vector<double> grid = mu_grid.empty() ? std::vector<double>{mu} : mu_grid;
    for (double m : grid)
        if (!(m >= 0.0 && m <= 1.0))
            fail("mu: value " + std::to_string(m) +
                 " gives switching probability outside [0, 1/2]");
    for (Algorithm alg : algorithms)
        if (alg == Algorithm::Tdma && num_slots > num_devices)
            fail("slots: TDMA requires slots <= devices");
    rewards.validate();
    if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma: must lie in (0,1)");
    if (!(epsilon_min > 0.0 && epsilon_min <= 1.0)) fail("epsilon-min: must lie in (0,1]");
    if (!(epsilon >= epsilon_min && epsilon <= 1.0))
        fail("epsilon: must lie in [epsilon-min, 1]");
    if (!(epsilon_decay > 0.0 && epsilon_decay < 1.0)) fail("epsilon-decay: must lie in (0,1)");
    if (history_window < 1) fail("history-window: must be >= 1");
    if (batch_size < 1) fail("batch-size: must be >= 1");
    if (!(tau >= 0.0 && tau <= 1.0)) fail("tau: must lie in [0,1]");
    if (!(lr_q > 0.0)) fail("lr-q: must be positive");
    if (!(lr_actor > 0.0)) fail("lr-actor: must be positive");
    if (entropy_coef < 0.0) fail("entropy-coef: must be non-negative");
    if (!(entropy_decay > 0.0) || entropy_decay > 1.0)
        fail("entropy-decay: must be in (0, 1]");
    if (explore_eps < 0.0 || explore_eps > 1.0)
        fail("explore-eps: must be in [0, 1]");
    if (!(lr_critic > 0.0)) fail("lr-critic: must be positive");
    if (replay_capacity < static_cast<std::size_t>(batch_size))
        fail("replay-capacity: must be >= batch-size");
    if (warmup < 0) fail("warmup: must be >= 0");
    if (hidden.empty()) fail("hidden: at least one hidden layer size required");
    for (int h : hidden)
        if (h < 1) fail("hidden: layer sizes must be >= 1");
    if (scenario == Scenario::NoCorrelation && num_events != num_devices)
        fail("events: none-correlation scenario requires events == devices");
    if (scenario == Scenario::Explicit) {
        if (topology.empty()) fail("topology: required for the explicit scenario");
        if (static_cast<int>(topology.size()) != num_devices)
            fail("topology: one monitored set per device required");
    }
}

double RunResult::final_window_mean() const {
    const int n = static_cast<int>(episode_rate.size());
    const int window = std::max(1, n / 10);
    double sum = 0.0;
    for (int i = n - window; i < n; ++i) sum += episode_rate[i];
    return sum / window;
}

std::pair<Topology, EventChainSet> build_scenario(const ExperimentConfig& config) {
    std::vector<std::vector<int>> monitored;
    switch (config.scenario) {
        case Scenario::NoCorrelation:
            for (int k = 1; k <= config.num_devices; ++k) monitored.push_back({k});
            break;
        case Scenario::FullCorrelation: {
            std::vector<int> all(config.num_events);
            std::iota(all.begin(), all.end(), 1);
            monitored.assign(config.num_devices, all);
            break;
        }
        case Scenario::Explicit:
            monitored = config.topology;
            break;
    }
    Topology topo = Topology::from_monitored(std::move(monitored), config.num_events);
    double p = config.switching_probability();
    return {std::move(topo), EventChainSet::uniform(config.num_events, p, p)};
}

namespace {

class TdmaPolicy : public Policy {
public:
    explicit TdmaPolicy(int num_slots) : num_slots_(num_slots) {}
    std::vector<DeviceAction> act(const EventChainSet& chains,
                                  const Topology& topology, Rng& rng) override {
        return tdma_actions(topology, chains, num_slots_, rng);
    }

private:
    int num_slots_;
};

class AlohaPolicy : public Policy {
public:
    explicit AlohaPolicy(int num_slots) : num_slots_(num_slots) {}
    std::vector<DeviceAction> act(const EventChainSet& chains,
                                  const Topology& topology, Rng& rng) override {
        return aloha_actions(topology, chains, num_slots_, rng);
    }

private:
    int num_slots_;
};

class IdqnPolicy : public Policy {
public:
    IdqnPolicy(const ExperimentConfig& config, const Topology& topology,
               Rng& init_rng) {
        IdqnHyperParams hp;
        hp.gamma = config.gamma;
        hp.epsilon = config.epsilon;
        hp.epsilon_min = config.epsilon_min;
        hp.epsilon_decay = config.epsilon_decay;
        hp.epsilon_squaring = config.epsilon_squaring;
        hp.lr = config.lr_q;
        hp.hidden = config.hidden;
        for (int k = 0; k < topology.num_devices(); ++k)
            agents_.emplace_back(
                ActionIndexing{topology.monitored[k], config.num_slots},
                config.history_window, hp, init_rng);
    }

    std::vector<DeviceAction> act(const EventChainSet& chains,
                                  const Topology& topology, Rng& rng) override {
        std::vector<DeviceAction> actions(agents_.size());
        last_indices_.resize(agents_.size());
        for (std::size_t k = 0; k < agents_.size(); ++k) {
            auto obs = observe(chains, topology, static_cast<int>(k + 1));
            auto mask = agents_[k].indexing().feasibility(obs);
            last_indices_[k] = agents_[k].step(obs, mask, rng);
            actions[k] = agents_[k].indexing().decode(last_indices_[k]);
        }
        return actions;
    }

    void learn(const std::vector<std::vector<std::uint8_t>>&,
               const std::vector<DeviceAction>&,
               const std::vector<double>& rewards,
               const EventChainSet& next_chains, const Topology& topology,
               Rng&) override {
        for (std::size_t k = 0; k < agents_.size(); ++k) {
            auto next_obs = observe(next_chains, topology, static_cast<int>(k + 1));
            auto next_mask = agents_[k].indexing().feasibility(next_obs);
            agents_[k].learn(last_indices_[k], rewards[k], next_obs, next_mask);
        }
    }

    void end_episode() override {
        for (auto& agent : agents_) agent.end_episode();
    }

private:
    std::vector<IdqnAgent> agents_;
    std::vector<int> last_indices_;
};

class MadspgPolicy : public Policy {
public:
    MadspgPolicy(const ExperimentConfig& config, const Topology& topology,
                 Rng& init_rng)
        : trainer_(make_indexings(config, topology), make_hp(config),
                   config.replay_capacity, config.batch_size, config.warmup,
                   init_rng) {}

    std::vector<DeviceAction> act(const EventChainSet& chains,
                                  const Topology& topology, Rng& rng) override {
        std::vector<std::vector<std::uint8_t>> obs(topology.num_devices());
        for (int k = 0; k < topology.num_devices(); ++k)
            obs[k] = observe(chains, topology, k + 1);
        last_indices_ = trainer_.act(obs, rng);
        std::vector<DeviceAction> actions(last_indices_.size());
        for (std::size_t k = 0; k < actions.size(); ++k)
            actions[k] = trainer_.agent(static_cast<int>(k)).indexing.decode(
                last_indices_[k]);
        return actions;
    }

    void learn(const std::vector<std::vector<std::uint8_t>>& obs,
               const std::vector<DeviceAction>&,
               const std::vector<double>& rewards,
               const EventChainSet& next_chains, const Topology& topology,
               Rng& rng) override {
        JointTransition tr;
        tr.obs = obs;
        tr.actions = last_indices_;
        tr.rewards = rewards;
        tr.next_obs.resize(topology.num_devices());
        for (int k = 0; k < topology.num_devices(); ++k)
            tr.next_obs[k] = observe(next_chains, topology, k + 1);
        trainer_.record(std::move(tr));
        trainer_.maybe_update(rng);
    }

    void end_episode() override { trainer_.end_episode(); }

private:
    static std::vector<ActionIndexing> make_indexings(
        const ExperimentConfig& config, const Topology& topology) {
        std::vector<ActionIndexing> indexings;
        for (const auto& events : topology.monitored)
            indexings.push_back({events, config.num_slots});
        return indexings;
    }

    static MadspgHyperParams make_hp(const ExperimentConfig& config) {
        MadspgHyperParams hp;
        hp.gamma = config.gamma;
        hp.tau = config.tau;
        hp.lr_actor = config.lr_actor;
        hp.entropy_coef = config.entropy_coef;
        hp.entropy_decay = config.entropy_decay;
        hp.explore_eps = config.explore_eps;
        hp.lr_critic = config.lr_critic;
        hp.hidden = config.hidden;
        return hp;
    }

    MadspgTrainer trainer_;
    std::vector<int> last_indices_;
};

}  // namespace

std::unique_ptr<Policy> make_policy(Algorithm alg, const ExperimentConfig& config,
                                    const Topology& topology, Rng& init_rng) {
    switch (alg) {
        case Algorithm::Tdma: return std::make_unique<TdmaPolicy>(config.num_slots);
        case Algorithm::Aloha: return std::make_unique<AlohaPolicy>(config.num_slots);
        case Algorithm::Idqn:
            return std::make_unique<IdqnPolicy>(config, topology, init_rng);
        case Algorithm::Madspg:
            return std::make_unique<MadspgPolicy>(config, topology, init_rng);
    }
    throw std::logic_error("make_policy: unknown algorithm");
}

EpisodeStats run_episode(const Topology& topology, EventChainSet& chains,
                         Policy& policy, int frames, const RewardParams& rewards,
                         double gamma, int num_slots, Rng& rng) {
    if (frames < 1) throw std::invalid_argument("run_episode: frames must be >= 1");
    EpisodeStats stats;
    std::vector<std::optional<double>> rates;
    rates.reserve(frames);
    std::vector<std::vector<std::uint8_t>> obs(topology.num_devices());
    for (int f = 0; f < frames; ++f) {
        for (int k = 0; k < topology.num_devices(); ++k)
            obs[k] = observe(chains, topology, k + 1);
        auto actions = policy.act(chains, topology, rng);
        auto outcome = resolve_frame(actions, chains, topology, num_slots);
        rates.push_back(frame_event_rate(outcome, chains, num_slots));
        auto reward_vec = rewards_from_outcome(outcome, rewards);
        for (auto fb : outcome.feedback)
            if (fb == Feedback::Collision) ++stats.collision_feedback;
        transition_events(chains, rng);
        policy.learn(obs, actions, reward_vec, chains, topology, rng);
    }
    bool any = std::any_of(rates.begin(), rates.end(),
                           [](const auto& r) { return r.has_value(); });
    stats.all_vacuous = !any;
    stats.event_rate = any ? average_event_rate(rates) : 0.0;
    stats.discounted_return = discounted_return(rates, gamma);
    return stats;
}

std::vector<RunResult> train(const ExperimentConfig& config) {
    config.validate();
    if (config.algorithms.size() != 1)
        throw std::invalid_argument("algorithm: train expects exactly one algorithm");
    std::vector<RunResult> results;
    for (int r = 0; r < config.runs; ++r) {
        std::uint64_t seed = config.seed + static_cast<std::uint64_t>(r);
        Rng rng(seed);
        auto [topology, chains] = build_scenario(config);
        auto policy = make_policy(config.algorithms[0], config, topology, rng);
        RunResult result;
        result.seed = seed;
        result.episode_rate.reserve(config.episodes);
        result.episode_return.reserve(config.episodes);
        for (int e = 0; e < config.episodes; ++e) {
            redraw_stationary(chains, rng);
            auto stats = run_episode(topology, chains, *policy,
                                     config.frames_per_episode, config.rewards,
                                     config.gamma, config.num_slots, rng);
            result.episode_rate.push_back(stats.event_rate);
            result.episode_return.push_back(stats.discounted_return);
            result.collision_feedback_count += stats.collision_feedback;
            policy->end_episode();
        }
        results.push_back(std::move(result));
    }
    return results;
}

std::vector<SweepCell> sweep_mu(const ExperimentConfig& config,
                                const std::vector<double>& mu_values) {
    if (mu_values.empty())
        throw std::invalid_argument("mu-grid: at least one value required");
    std::vector<SweepCell> cells;
    for (double mu : mu_values) {
        for (Algorithm alg : config.algorithms) {
            ExperimentConfig cell_config = config;
            cell_config.mu = mu;
            cell_config.mu_grid.clear();
            cell_config.algorithms = {alg};
            SweepCell cell;
            cell.mu = mu;
            cell.algorithm = alg;
            cell.runs = train(cell_config);
            double sum = 0.0;
            for (const auto& run : cell.runs) sum += run.final_window_mean();
            cell.mean_final_rate = sum / cell.runs.size();
            double var = 0.0;
            for (const auto& run : cell.runs) {
                double d = run.final_window_mean() - cell.mean_final_rate;
                var += d * d;
            }
            cell.standard_error =
                cell.runs.size() > 1
                    ? std::sqrt(var / (cell.runs.size() - 1.0) / cell.runs.size())
                    : 0.0;
            cells.push_back(std::move(cell));
        }
    }
    std::stable_sort(cells.begin(), cells.end(),
                     [](const SweepCell& a, const SweepCell& b) {
                         if (a.mu != b.mu) return a.mu < b.mu;
                         return to_string(a.algorithm) < to_string(b.algorithm);
                     });
    return cells;
}

void emit_csv(const std::vector<SweepCell>& cells, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("emit_csv: cannot open '" + path + "'");
    out << "mu,algorithm,run,episode,event_rate,discounted_return\n";
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const auto& cell : cells) {
        for (std::size_t r = 0; r < cell.runs.size(); ++r) {
            const auto& run = cell.runs[r];
            for (std::size_t e = 0; e < run.episode_rate.size(); ++e) {
                out << fmt(cell.mu) << ',' << to_string(cell.algorithm) << ','
                    << r << ',' << e << ',' << fmt(run.episode_rate[e]) << ','
                    << fmt(run.episode_return[e]) << '\n';
            }
        }
    }
    if (!out) throw std::runtime_error("emit_csv: write failed for '" + path + "'");
}

namespace {

int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::invalid_argument(key + ": expected an integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::invalid_argument(key + ": expected a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::invalid_argument(key + ": expected true/false, got '" + value + "'");
}

std::vector<std::string> split(const std::string& value, char sep) {
    std::vector<std::string> parts;
    std::string part;
    std::istringstream in(value);
    while (std::getline(in, part, sep)) parts.push_back(part);
    return parts;
}

std::string trim(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

void apply_config_key(ExperimentConfig& config, const std::string& key,
                      const std::string& value) {
    if (key == "devices") config.num_devices = parse_int(key, value);
    else if (key == "events") config.num_events = parse_int(key, value);
    else if (key == "slots") config.num_slots = parse_int(key, value);
    else if (key == "frames-per-episode") config.frames_per_episode = parse_int(key, value);
    else if (key == "episodes") config.episodes = parse_int(key, value);
    else if (key == "runs") config.runs = parse_int(key, value);
    else if (key == "scenario") config.scenario = scenario_from_string(value);
    else if (key == "topology") {
        config.topology.clear();
        for (const auto& device : split(value, ';')) {
            std::vector<int> events;
            for (const auto& ev : split(device, ','))
                events.push_back(parse_int(key, trim(ev)));
            config.topology.push_back(std::move(events));
        }
    } else if (key == "mu") config.mu = parse_double(key, value);
    else if (key == "mu-grid") {
        config.mu_grid.clear();
        for (const auto& m : split(value, ','))
            config.mu_grid.push_back(parse_double(key, trim(m)));
    } else if (key == "algorithm") {
        config.algorithms.clear();
        for (const auto& a : split(value, ','))
            config.algorithms.push_back(algorithm_from_string(trim(a)));
    } else if (key == "reward-a") config.rewards.A = parse_double(key, value);
    else if (key == "reward-b") config.rewards.B = parse_double(key, value);
    else if (key == "reward-c") config.rewards.C = parse_double(key, value);
    else if (key == "gamma") config.gamma = parse_double(key, value);
    else if (key == "epsilon") config.epsilon = parse_double(key, value);
    else if (key == "epsilon-min") config.epsilon_min = parse_double(key, value);
    else if (key == "epsilon-decay") config.epsilon_decay = parse_double(key, value);
    else if (key == "epsilon-squaring") config.epsilon_squaring = parse_bool(key, value);
    else if (key == "history-window") config.history_window = parse_int(key, value);
    else if (key == "batch-size") config.batch_size = parse_int(key, value);
    else if (key == "tau") config.tau = parse_double(key, value);
    else if (key == "lr-q") config.lr_q = parse_double(key, value);
    else if (key == "lr-actor") config.lr_actor = parse_double(key, value);
    else if (key == "entropy-coef") config.entropy_coef = parse_double(key, value);
    else if (key == "entropy-decay") config.entropy_decay = parse_double(key, value);
    else if (key == "explore-eps") config.explore_eps = parse_double(key, value);
    else if (key == "lr-critic") config.lr_critic = parse_double(key, value);
    else if (key == "replay-capacity") {
        int v = parse_int(key, value);
        if (v < 1) throw std::invalid_argument("replay-capacity: must be >= 1");
        config.replay_capacity = static_cast<std::size_t>(v);
    } else if (key == "warmup") config.warmup = parse_int(key, value);
    else if (key == "hidden") {
        config.hidden.clear();
        for (const auto& h : split(value, ','))
            config.hidden.push_back(parse_int(key, trim(h)));
    } else if (key == "seed") {
        try {
            config.seed = std::stoull(value);
        } catch (...) {
            throw std::invalid_argument("seed: expected an unsigned integer, got '" +
                                        value + "'");
        }
    } else {
        throw std::invalid_argument("unknown configuration key '" + key + "'");
    }
}

void load_config_file(ExperimentConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " is not 'key = value'");
        apply_config_key(config, trim(stripped.substr(0, eq)),
                         trim(stripped.substr(eq + 1)));
    }
}

}  // namespace dsa
