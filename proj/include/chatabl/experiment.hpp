#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chatabl/abl_loop.hpp"
#include "chatabl/metrics.hpp"

namespace chatabl {

struct ExperimentConfig {
    int train_min_length = 5;
    int train_max_length = 10;
    int test_min_length = 5;
    int test_max_length = 26;
    int train_per_length = 500;
    int test_per_length = 500;
    double positive_fraction = 0.5;
    std::vector<double> labeled_fracs = {0.2, 0.5, 0.8};
    double glyph_noise = 0.12;
    std::uint16_t table_code;
    std::uint64_t seed = 42;
    // Opt-in length-generalization variant: test lengths are restricted to
    // strictly above the training range.
    bool disjoint_lengths = false;
    LoopConfig loop;

    ExperimentConfig();

    // The full protocol: train lengths 5-10 x 500, test lengths 5-26 x 500,
    // labeled fractions 20/50/80%.
    static ExperimentConfig paper_protocol();
    // A single-fraction configuration small enough to run in minutes on
    // one core; the reference benchmark the acceptance suite uses.
    static ExperimentConfig desk_benchmark();
};

void save_experiment_config(const ExperimentConfig& config, const std::string& path);
ExperimentConfig load_experiment_config(const std::string& path);

struct MetricsRow {
    std::string method;  // "chatabl" | "chatabl-judge" | "baseline"
    double labeled_frac;
    Metrics metrics;
};

struct ExperimentReport {
    std::vector<MetricsRow> rows;
    // Per labeled fraction, the ABL arm's per-round stats.
    std::vector<std::pair<double, std::vector<RoundStats>>> rounds;
    std::vector<std::string> annotations;
    std::string out_dir;
};

// Generates train/test data, runs the ABL arm and the perception-only
// baseline under shared seeds, evaluates overall and per test length, and
// writes the artifact directory (config snapshot, per-round stats CSV,
// metrics.csv, per_length.csv, checkpoints, hypothesis dumps, reasoner
// transcripts). Partial results are flushed before an abort propagates.
ExperimentReport run_experiment(const ExperimentConfig& config, const std::string& out_dir);

} // namespace chatabl
