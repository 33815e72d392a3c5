#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "harness.hpp"

using namespace dsa;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) {
        path = (std::filesystem::temp_directory_path() / name).string();
    }
    ~TempFile() { std::remove(path.c_str()); }
};

ExperimentConfig quick_config(Algorithm alg) {
    ExperimentConfig config;
    config.algorithms = {alg};
    config.episodes = 5;
    config.runs = 2;
    config.frames_per_episode = 20;
    return config;
}

}  // namespace

TEST_CASE("defaults reproduce the reference parameter set") {
    ExperimentConfig config;
    CHECK(config.num_devices == 4);
    CHECK(config.num_slots == 2);
    CHECK(config.gamma == 0.9);
    CHECK(config.epsilon == 0.9);
    CHECK(config.epsilon_min == 0.05);
    CHECK(config.rewards.A == 10.0);
    CHECK(config.rewards.B == -5.0);
    CHECK(config.rewards.C == -10.0);
    CHECK(config.episodes == 2000);
    CHECK(config.runs == 50);
    config.validate();
}

TEST_CASE("config keys parse and validate") {
    ExperimentConfig config;
    apply_config_key(config, "mu", "0.8");
    CHECK(config.switching_probability() == doctest::Approx(0.1));

    apply_config_key(config, "algorithm", "tdma,aloha");
    REQUIRE(config.algorithms.size() == 2);
    CHECK(config.algorithms[0] == Algorithm::Tdma);

    apply_config_key(config, "mu-grid", "0.1, 0.5, 0.9");
    CHECK(config.mu_grid == std::vector<double>{0.1, 0.5, 0.9});

    apply_config_key(config, "hidden", "16,8");
    CHECK(config.hidden == std::vector<int>{16, 8});

    apply_config_key(config, "topology", "1,2;3;4;1");
    REQUIRE(config.topology.size() == 4);
    CHECK(config.topology[0] == std::vector<int>{1, 2});

    CHECK_THROWS_WITH_AS(apply_config_key(config, "bogus-key", "1"),
                         doctest::Contains("bogus-key"), std::invalid_argument);
    CHECK_THROWS(apply_config_key(config, "episodes", "many"));
    CHECK_THROWS(apply_config_key(config, "scenario", "sideways"));
}

TEST_CASE("validation names the offending field") {
    ExperimentConfig config;
    config.algorithms = {Algorithm::Tdma};
    config.num_slots = 5;  // K = 4
    CHECK_THROWS_WITH_AS(config.validate(), doctest::Contains("slots"),
                         std::invalid_argument);

    config = ExperimentConfig{};
    config.mu = 1.5;
    CHECK_THROWS_WITH_AS(config.validate(), doctest::Contains("mu"),
                         std::invalid_argument);

    config = ExperimentConfig{};
    config.frames_per_episode = 0;
    CHECK_THROWS_WITH_AS(config.validate(),
                         doctest::Contains("frames-per-episode"),
                         std::invalid_argument);

    config = ExperimentConfig{};
    config.rewards.B = 1.0;
    CHECK_THROWS(config.validate());

    config = ExperimentConfig{};
    config.scenario = Scenario::Explicit;
    CHECK_THROWS_WITH_AS(config.validate(), doctest::Contains("topology"),
                         std::invalid_argument);
}

TEST_CASE("config file loads first and flags override") {
    TempFile file("dsa_test_config.txt");
    {
        std::ofstream out(file.path);
        out << "# comment line\n"
            << "mu = 0.7\n"
            << "episodes = 10\n"
            << "algorithm = aloha\n";
    }
    ExperimentConfig config;
    load_config_file(config, file.path);
    CHECK(config.mu == 0.7);
    CHECK(config.episodes == 10);
    apply_config_key(config, "mu", "0.3");
    CHECK(config.mu == 0.3);

    CHECK_THROWS(load_config_file(config, "/nonexistent/config.txt"));
    {
        std::ofstream out(file.path);
        out << "no equals sign here\n";
    }
    CHECK_THROWS(load_config_file(config, file.path));
}

TEST_CASE("scenario construction matches the two reference layouts") {
    ExperimentConfig config;
    config.scenario = Scenario::NoCorrelation;
    auto [topo_a, chains_a] = build_scenario(config);
    for (int k = 0; k < 4; ++k) {
        CHECK(topo_a.monitored[k] == std::vector<int>{k + 1});
        CHECK(topo_a.watchers[k].size() == 1);
    }

    config.scenario = Scenario::FullCorrelation;
    auto [topo_b, chains_b] = build_scenario(config);
    for (int k = 0; k < 4; ++k)
        CHECK(topo_b.monitored[k] == std::vector<int>{1, 2, 3, 4});

    config.mu = 1.0;
    auto [topo_c, chains_c] = build_scenario(config);
    CHECK(chains_c.p == std::vector<double>(4, 0.0));
    CHECK(chains_c.q == std::vector<double>(4, 0.0));

    config = ExperimentConfig{};
    config.scenario = Scenario::Explicit;
    config.topology = {{1, 2}, {2}, {3, 4}, {4}};
    auto [topo_d, chains_d] = build_scenario(config);
    CHECK(topo_d.watchers[1] == std::vector<int>{1, 2});
}

TEST_CASE("a frozen fully-active tdma episode delivers every frame") {
    // K = T = 2, mu = 1, both events active: both devices scheduled, every
    // frame delivers both events -> rate exactly 1.
    ExperimentConfig config;
    config.num_devices = 2;
    config.num_events = 2;
    config.num_slots = 2;
    config.mu = 1.0;
    config.algorithms = {Algorithm::Tdma};
    auto [topo, chains] = build_scenario(config);
    chains.state = {1, 1};
    Rng rng(5);
    auto policy = make_policy(Algorithm::Tdma, config, topo, rng);
    auto stats = run_episode(topo, chains, *policy, 50, config.rewards,
                             config.gamma, config.num_slots, rng);
    CHECK(stats.event_rate == 1.0);
    CHECK(stats.collision_feedback == 0);
}

TEST_CASE("a lone always-active aloha device scores an episode rate of 1") {
    ExperimentConfig config;
    config.num_devices = 1;
    config.num_events = 1;
    config.num_slots = 1;
    config.mu = 1.0;
    config.algorithms = {Algorithm::Aloha};
    auto [topo, chains] = build_scenario(config);
    chains.state = {1};
    Rng rng(6);
    auto policy = make_policy(Algorithm::Aloha, config, topo, rng);
    auto stats = run_episode(topo, chains, *policy, 30, config.rewards,
                             config.gamma, config.num_slots, rng);
    CHECK(stats.event_rate == 1.0);
}

TEST_CASE("zero-frame episodes are rejected") {
    ExperimentConfig config;
    config.algorithms = {Algorithm::Aloha};
    auto [topo, chains] = build_scenario(config);
    Rng rng(7);
    auto policy = make_policy(Algorithm::Aloha, config, topo, rng);
    CHECK_THROWS(run_episode(topo, chains, *policy, 0, config.rewards,
                             config.gamma, config.num_slots, rng));
}

TEST_CASE("training is deterministic for a fixed master seed") {
    for (Algorithm alg : {Algorithm::Aloha, Algorithm::Idqn, Algorithm::Madspg}) {
        auto config = quick_config(alg);
        config.warmup = 50;
        auto a = train(config);
        auto b = train(config);
        REQUIRE(a.size() == b.size());
        for (std::size_t r = 0; r < a.size(); ++r) {
            CHECK(a[r].episode_rate == b[r].episode_rate);
            CHECK(a[r].episode_return == b[r].episode_return);
        }
    }
}

TEST_CASE("run results stay within [0,1] and have one entry per episode") {
    auto config = quick_config(Algorithm::Aloha);
    auto results = train(config);
    REQUIRE(results.size() == 2);
    for (const auto& run : results) {
        CHECK(run.episode_rate.size() == 5);
        for (double rate : run.episode_rate) {
            CHECK(rate >= 0.0);
            CHECK(rate <= 1.0);
        }
    }
}

TEST_CASE("learning-free baseline rates show no episode trend") {
    auto config = quick_config(Algorithm::Aloha);
    config.episodes = 400;
    config.runs = 1;
    auto results = train(config);
    const auto& rates = results[0].episode_rate;
    const double n = static_cast<double>(rates.size());
    double mean_x = (n - 1) / 2.0, mean_y = 0.0;
    for (double r : rates) mean_y += r / n;
    double sxy = 0.0, sxx = 0.0, ssr = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        sxy += (i - mean_x) * (rates[i] - mean_y);
        sxx += (i - mean_x) * (i - mean_x);
    }
    double slope = sxy / sxx;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        double resid = rates[i] - mean_y - slope * (i - mean_x);
        ssr += resid * resid;
    }
    double slope_se = std::sqrt(ssr / (n - 2) / sxx);
    CHECK(std::abs(slope) <= 2.0 * slope_se);
}

TEST_CASE("sweep produces one cell per (mu, algorithm) pair") {
    auto config = quick_config(Algorithm::Tdma);
    config.algorithms = {Algorithm::Tdma, Algorithm::Aloha};
    auto cells = sweep_mu(config, {0.5});
    REQUIRE(cells.size() == 2);
    for (const auto& cell : cells) {
        CHECK(cell.mean_final_rate >= 0.0);
        CHECK(cell.mean_final_rate <= 1.0);
        CHECK(cell.standard_error >= 0.0);
    }
    CHECK_THROWS(sweep_mu(config, {}));
}

TEST_CASE("csv emission shape and round trip") {
    TempFile file("dsa_test_out.csv");

    emit_csv({}, file.path);
    CHECK(read_file(file.path) ==
          "mu,algorithm,run,episode,event_rate,discounted_return\n");

    auto config = quick_config(Algorithm::Aloha);
    config.runs = 1;
    config.episodes = 3;
    auto cells = sweep_mu(config, {0.9});
    emit_csv(cells, file.path);
    auto text = read_file(file.path);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);

    // parse back and compare against the in-memory table
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    int row = 0;
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::string mu, alg, run, episode, rate, ret;
        std::getline(fields, mu, ',');
        std::getline(fields, alg, ',');
        std::getline(fields, run, ',');
        std::getline(fields, episode, ',');
        std::getline(fields, rate, ',');
        std::getline(fields, ret, ',');
        CHECK(std::stod(mu) == 0.9);
        CHECK(alg == "aloha");
        CHECK(std::stoi(run) == 0);
        CHECK(std::stoi(episode) == row);
        CHECK(std::stod(rate) == cells[0].runs[0].episode_rate[row]);
        CHECK(std::stod(ret) == cells[0].runs[0].episode_return[row]);
        ++row;
    }
    CHECK(row == 3);

    CHECK_THROWS(emit_csv({}, "/nonexistent/dir/out.csv"));
}

TEST_CASE("identical sweeps emit byte-identical csv files") {
    TempFile f1("dsa_det_1.csv"), f2("dsa_det_2.csv");
    auto config = quick_config(Algorithm::Aloha);
    config.algorithms = {Algorithm::Aloha, Algorithm::Tdma};
    emit_csv(sweep_mu(config, {0.2, 0.8}), f1.path);
    emit_csv(sweep_mu(config, {0.2, 0.8}), f2.path);
    auto a = read_file(f1.path);
    CHECK(!a.empty());
    CHECK(a == read_file(f2.path));
}

TEST_CASE("tdma runs report zero collision feedback") {
    auto config = quick_config(Algorithm::Tdma);
    config.scenario = Scenario::FullCorrelation;
    config.episodes = 50;
    for (const auto& run : train(config))
        CHECK(run.collision_feedback_count == 0);
}
