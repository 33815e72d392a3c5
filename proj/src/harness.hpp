#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "agents.hpp"
#include "env.hpp"

namespace dsa {

enum class Algorithm { Idqn, Madspg, Tdma, Aloha };

enum class Scenario { NoCorrelation, FullCorrelation, Explicit };

std::string to_string(Algorithm alg);
Algorithm algorithm_from_string(const std::string& name);
std::string to_string(Scenario sc);
Scenario scenario_from_string(const std::string& name);

struct ExperimentConfig {
    int num_devices = 4;         // K
    int num_events = 4;          // M
    int num_slots = 2;           // T
    int frames_per_episode = 100;
    int episodes = 2000;
    int runs = 50;
    Scenario scenario = Scenario::NoCorrelation;
    std::vector<std::vector<int>> topology;  // for Scenario::Explicit
    double mu = 0.9;
    std::vector<double> mu_grid;             // sweep grid; falls back to {mu}
    std::vector<Algorithm> algorithms = {Algorithm::Idqn};
    RewardParams rewards;
    double gamma = 0.9;
    double epsilon = 0.9;
    double epsilon_min = 0.05;
    double epsilon_decay = 0.995;
    bool epsilon_squaring = false;
    int history_window = 4;
    int batch_size = 64;
    double tau = 0.99;
    double lr_q = 1e-4;
    double lr_actor = 1e-3;
    double entropy_coef = 0.5;
    double entropy_decay = 0.995;
    double explore_eps = 0.0;
    double lr_critic = 1e-3;
    std::size_t replay_capacity = 10000;
    int warmup = 500;
    std::vector<int> hidden = {32, 32};
    std::uint64_t seed = 1;

    void validate() const;  // throws with the offending field named

    double switching_probability() const { return (1.0 - mu) / 2.0; }
};

struct RunResult {
    std::uint64_t seed = 0;
    std::vector<double> episode_rate;     // Eq.-style mean over the episode
    std::vector<double> episode_return;   // discounted return per episode
    long collision_feedback_count = 0;

    // Mean over the last 10% of episodes.
    double final_window_mean() const;
};

struct SweepCell {
    double mu = 0.0;
    Algorithm algorithm = Algorithm::Idqn;
    double mean_final_rate = 0.0;
    double standard_error = 0.0;
    std::vector<RunResult> runs;
};

// Uniform policy interface for the per-frame loop.
class Policy {
public:
    virtual ~Policy() = default;
    virtual std::vector<DeviceAction> act(const EventChainSet& chains,
                                          const Topology& topology, Rng& rng) = 0;
    virtual void learn(const std::vector<std::vector<std::uint8_t>>& obs,
                       const std::vector<DeviceAction>& actions,
                       const std::vector<double>& rewards,
                       const EventChainSet& next_chains,
                       const Topology& topology, Rng& rng) {}
    virtual void end_episode() {}
};

std::unique_ptr<Policy> make_policy(Algorithm alg, const ExperimentConfig& config,
                                    const Topology& topology, Rng& init_rng);

std::pair<Topology, EventChainSet> build_scenario(const ExperimentConfig& config);

struct EpisodeStats {
    double event_rate = 0.0;       // mean over non-vacuous frames; 0 if all vacuous
    double discounted_return = 0.0;
    long collision_feedback = 0;
    bool all_vacuous = false;
};

EpisodeStats run_episode(const Topology& topology, EventChainSet& chains,
                         Policy& policy, int frames, const RewardParams& rewards,
                         double gamma, int num_slots, Rng& rng);

// Seeded multi-run training for one (mu, algorithm) cell.
std::vector<RunResult> train(const ExperimentConfig& config);

std::vector<SweepCell> sweep_mu(const ExperimentConfig& config,
                                const std::vector<double>& mu_values);

void emit_csv(const std::vector<SweepCell>& cells, const std::string& path);

// Plain-text `key = value` configuration; later assignments override.
void apply_config_key(ExperimentConfig& config, const std::string& key,
                      const std::string& value);
void load_config_file(ExperimentConfig& config, const std::string& path);

// Fast oracle/invariant suite for the `selftest` subcommand. Prints one
// line per check; returns the number of failures.
int selftest();

}  // namespace dsa
