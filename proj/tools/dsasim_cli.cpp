// Command-line front end; talks to the simulator only through the shared
// library's C interface.
#include <cstdio>
#include <cstring>
#include <string>

#include "dsasim.h"

namespace {

void usage(std::FILE* out) {
    std::fprintf(out,
                 "usage: dsasim <run|sweep|selftest> [options]\n"
                 "\n"
                 "  run       train/evaluate a single (mu, algorithm) cell\n"
                 "  sweep     sweep the mu grid over all configured algorithms\n"
                 "  selftest  run the built-in oracle/invariant suite\n"
                 "\n"
                 "options:\n"
                 "  --config <path>   load a plain-text `key = value` file first\n"
                 "  --out <path>      CSV destination (default results.csv)\n"
                 "  --seed <u64>      master seed\n"
                 "  --<key> <value>   override any configuration field, e.g.\n"
                 "                    --mu 0.9 --algorithm madspg --runs 10\n"
                 "                    --scenario full-correlation --episodes 2000\n");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        usage(stderr);
        return 2;
    }
    std::string command = argv[1];
    if (command == "-h" || command == "--help") {
        usage(stdout);
        return 0;
    }
    if (command != "run" && command != "sweep" && command != "selftest") {
        std::fprintf(stderr, "dsasim: unknown command '%s'\n", command.c_str());
        usage(stderr);
        return 2;
    }
    if (command == "selftest") {
        if (argc > 2) {
            std::fprintf(stderr, "dsasim: selftest takes no options\n");
            return 2;
        }
        return dsa_selftest() == DSA_OK ? 0 : 1;
    }

    dsa_config* config = dsa_config_new();
    if (!config) {
        std::fprintf(stderr, "dsasim: out of memory\n");
        return 1;
    }
    std::string out_path = "results.csv";
    int status = DSA_OK;
    for (int i = 2; i < argc && status == DSA_OK; i += 2) {
        const char* flag = argv[i];
        if (std::strncmp(flag, "--", 2) != 0) {
            std::fprintf(stderr, "dsasim: expected a --flag, got '%s'\n", flag);
            dsa_config_free(config);
            return 2;
        }
        if (i + 1 >= argc) {
            std::fprintf(stderr, "dsasim: missing value for '%s'\n", flag);
            dsa_config_free(config);
            return 2;
        }
        const char* value = argv[i + 1];
        if (std::strcmp(flag, "--config") == 0)
            status = dsa_config_load_file(config, value);
        else if (std::strcmp(flag, "--out") == 0)
            out_path = value;
        else
            status = dsa_config_set(config, flag + 2, value);
    }
    if (status == DSA_OK) {
        status = command == "run" ? dsa_run(config, out_path.c_str())
                                  : dsa_sweep(config, out_path.c_str());
    }
    if (status != DSA_OK)
        std::fprintf(stderr, "dsasim: %s\n", dsa_last_error());
    dsa_config_free(config);
    return status == DSA_OK ? 0 : 1;
}
