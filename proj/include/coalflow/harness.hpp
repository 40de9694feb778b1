// Experiment orchestration: flat key=value configs, dispatch to the
// estimators, report rows with provenance-tagged oracles, and file output
// (summary JSON + long-format CSV + density CSVs).
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coalflow/estimators.hpp"

namespace coalflow {

struct ExperimentConfig {
    std::string experiment = "coalprob";
    int n = 2;
    std::vector<double> u;                      // start configuration
    std::vector<std::vector<double>> nested_u;  // thm3 only
    std::vector<double> y;                      // pinned endpoint (thm1, lemma5)
    std::string scheme;                         // "n:k:j1,..." when an experiment fixes s
    double horizon = 1.0;
    int steps = 4096;
    long replicas = 100000;
    long outer = 128; // thm2 outer draws
    long inner = 64;  // thm2 inner replicas
    std::uint64_t seed = 1;
    std::string drift = "zero";
    int j = 1;                 // tuple size (thm2, density by scheme)
    int k = 1;                 // survivor tuple size (thm4, lemma7, thm3, density)
    int subsystem = 1;         // lemma8: size n of the leading subsystem
    double window_lo = -2.0;
    double window_hi = 3.0;
    double delta = 0.25;
    bool ordered = true;       // ordered-sector window
    double h = 0.0;            // bin halfwidth; <= 0 means 0.05 * sqrt(T)
    double bandwidth = 0.0;    // kernel bandwidth; <= 0 means plug-in rule
    double p = 1.0;            // lemma5 exponent
    double kappa = 4.0;
    double tolerance = 1e-12;  // lemma7
    std::string form = "cancelled";
    std::string sign = "plus";
    std::string mode = "conditioned";
    std::string kind = "direct"; // density experiment: direct | girsanov
    std::string out = ".";
};

// Flat key=value text (TOML-compatible subset: one `key = value` per line,
// '#' comments, doubles/integers/strings, comma-separated lists, ';' between
// nested lists). Unknown keys are a configuration error.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg); // lossless round-trip
// applies one CLI override; key in {config-file keys}
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct ReportRow {
    std::string experiment;
    std::string label;
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::optional<double> oracle;
    std::string provenance = "none"; // closed-form | cross-estimator | none
    double tolerance = 0.0;
    bool pass = false;
    bool inconclusive = false;
};

struct RunResult {
    int exit_code = 0; // 0 pass, 1 statistical fail, 2 config error, 3 empty/inconclusive
    std::vector<ReportRow> rows;
    std::vector<std::string> files; // paths written
};

// Dispatches cfg.experiment, writes summary.json / report.csv (+ density
// CSVs) under cfg.out, and returns the rows with the process exit code.
RunResult run(const ExperimentConfig& cfg);

ReportRow row_from_check(const std::string& experiment, const CheckRow& c,
                         const std::string& provenance);

} // namespace coalflow
