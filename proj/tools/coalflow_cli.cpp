// CLI front end: load a flat key=value config, apply flag overrides, run the
// experiment, print the report rows, exit 0/1/2/3 (pass / statistical fail /
// bad config / inconclusive-empty).
#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "coalflow/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"coalflow: Monte Carlo laboratory for coalescing drifted flows"};

    std::string config_path, experiment, out_dir;
    long long seed = -1, replicas = -1, steps = -1;
    app.add_option("--config", config_path, "flat key=value config file");
    app.add_option("--experiment", experiment, "experiment name (overrides config)");
    app.add_option("--seed", seed, "RNG seed (overrides config)");
    app.add_option("--replicas", replicas, "replica count (overrides config)");
    app.add_option("--steps", steps, "grid steps m (overrides config)");
    app.add_option("--out", out_dir, "output directory (overrides config)");

    CLI11_PARSE(app, argc, argv);

    coalflow::ExperimentConfig cfg;
    try {
        if (!config_path.empty()) cfg = coalflow::parse_config_file(config_path);
        if (!experiment.empty()) coalflow::apply_override(cfg, "experiment", experiment);
        if (seed >= 0) coalflow::apply_override(cfg, "seed", std::to_string(seed));
        if (replicas >= 0) coalflow::apply_override(cfg, "replicas", std::to_string(replicas));
        if (steps >= 0) coalflow::apply_override(cfg, "steps", std::to_string(steps));
        if (!out_dir.empty()) coalflow::apply_override(cfg, "out", out_dir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    }

    coalflow::RunResult result;
    try {
        result = coalflow::run(cfg);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }

    for (const auto& r : result.rows) {
        std::printf("[%s] %-42s est=%.6g se=%.3g", r.experiment.c_str(), r.label.c_str(),
                    r.estimate, r.stderr_);
        if (r.oracle) std::printf(" oracle=%.6g (%s)", *r.oracle, r.provenance.c_str());
        std::printf(" -> %s\n",
                    r.inconclusive ? "inconclusive" : (r.pass ? "pass" : "FAIL"));
    }
    for (const auto& f : result.files) std::printf("wrote %s\n", f.c_str());
    return result.exit_code;
}
