#include "dsasim.h"

#include <cstdio>
#include <exception>
#include <functional>
#include <string>

#include "harness.hpp"

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& message) {
    g_last_error = message;
    return code;
}

int run_guarded(const std::function<void()>& body) {
    try {
        body();
        return DSA_OK;
    } catch (const std::invalid_argument& e) {
        return fail(DSA_ERR_CONFIG, e.what());
    } catch (const std::runtime_error& e) {
        return fail(DSA_ERR_IO, e.what());
    } catch (const std::exception& e) {
        return fail(DSA_ERR_INTERNAL, e.what());
    }
}

void print_summary(const std::vector<dsa::SweepCell>& cells) {
    for (const auto& cell : cells)
        std::printf("mu=%g algorithm=%s final_rate=%.4f stderr=%.4f\n", cell.mu,
                    dsa::to_string(cell.algorithm).c_str(), cell.mean_final_rate,
                    cell.standard_error);
}

}  // namespace

struct dsa_config {
    dsa::ExperimentConfig config;
};

extern "C" {

dsa_config* dsa_config_new(void) {
    try {
        return new dsa_config{};
    } catch (...) {
        return nullptr;
    }
}

void dsa_config_free(dsa_config* config) { delete config; }

int dsa_config_set(dsa_config* config, const char* key, const char* value) {
    if (!config || !key || !value) return fail(DSA_ERR_ARGUMENT, "null argument");
    return run_guarded([&] { dsa::apply_config_key(config->config, key, value); });
}

int dsa_config_load_file(dsa_config* config, const char* path) {
    if (!config || !path) return fail(DSA_ERR_ARGUMENT, "null argument");
    return run_guarded([&] { dsa::load_config_file(config->config, path); });
}

int dsa_run(const dsa_config* config, const char* csv_path) {
    if (!config || !csv_path) return fail(DSA_ERR_ARGUMENT, "null argument");
    return run_guarded([&] {
        dsa::ExperimentConfig cell = config->config;
        if (cell.algorithms.size() != 1)
            throw std::invalid_argument("algorithm: run expects exactly one algorithm");
        cell.mu_grid.clear();
        auto cells = dsa::sweep_mu(cell, {cell.mu});
        dsa::emit_csv(cells, csv_path);
        print_summary(cells);
    });
}

int dsa_sweep(const dsa_config* config, const char* csv_path) {
    if (!config || !csv_path) return fail(DSA_ERR_ARGUMENT, "null argument");
    return run_guarded([&] {
        const auto& cfg = config->config;
        std::vector<double> grid =
            cfg.mu_grid.empty() ? std::vector<double>{cfg.mu} : cfg.mu_grid;
        auto cells = dsa::sweep_mu(cfg, grid);
        dsa::emit_csv(cells, csv_path);
        print_summary(cells);
    });
}

int dsa_selftest(void) {
    try {
        return dsa::selftest() == 0 ? DSA_OK : DSA_ERR_INTERNAL;
    } catch (const std::exception& e) {
        return fail(DSA_ERR_INTERNAL, e.what());
    }
}

const char* dsa_last_error(void) { return g_last_error.c_str(); }

const char* dsa_version(void) { return "1.0.0"; }

}  // extern "C"
