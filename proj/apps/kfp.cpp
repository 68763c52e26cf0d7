#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "CLI11.hpp"

#include "kfp/config.hpp"
#include "kfp/runner.hpp"

namespace {

/// KFP_THREADS beats the flag and the config so batch schedulers can pin
/// thread counts without editing experiment files.
int effective_threads(int from_config) {
    const char* env = std::getenv("KFP_THREADS");
    if (!env || !*env) return from_config;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
        throw kfp::ConfigError(std::string("KFP_THREADS must be a positive integer, got '") +
                               env + "'");
    return static_cast<int>(v);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral and weak-form solvers for kinetic diffusion equations"};
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int threads = 0;
    app.add_option("--config", config_path, "run configuration (json)")
        ->required();
    auto* out_opt = app.add_option("--out", out_dir, "output directory override");
    auto* seed_opt = app.add_option("--seed", seed, "rng seed override");
    auto* threads_opt =
        app.add_option("--threads", threads, "worker thread count override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        nlohmann::json doc = kfp::load_config_document(config_path);
        if (*out_opt) doc["out"] = out_dir;
        if (*seed_opt) doc["seed"] = seed;
        if (*threads_opt) {
            if (threads < 1)
                throw kfp::ConfigError("--threads must be >= 1");
            doc["threads"] = threads;
        }
        kfp::RunConfig config = kfp::parse_config(doc);
        config.threads = effective_threads(config.threads);
        kfp::run(config);
    } catch (const kfp::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const kfp::ToleranceError& e) {
        std::fprintf(stderr, "tolerance failure: %s\n", e.what());
        return 4;
    } catch (const kfp::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "failure: %s\n", e.what());
        return 3;
    }
    return 0;
}
