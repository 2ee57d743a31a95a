#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chatabl/abduction.hpp"
#include "chatabl/dataset.hpp"
#include "chatabl/knowledge_base.hpp"
#include "chatabl/perception.hpp"
#include "chatabl/reasoner.hpp"

namespace chatabl {

enum class ReasonerMode { Oracle, Mock, Live };

struct LoopConfig {
    int rounds = 3;
    double lambda_unlabel = 1.0;
    ReasonerMode reasoner = ReasonerMode::Oracle;
    int edit_budget = 0;       // 0: ceil(length / 4)
    int steps_labeled = 200;   // phase (a) steps per round
    int steps_combined = 120;  // phase (d) steps per round
    double lr = 0.5;
    std::uint64_t model_seed = 1;
    int hidden_width = 64;
    int max_loop_iterations = 5;       // self-feedback cap (mock/live)
    ChatBackend* live_backend = nullptr;  // required for ReasonerMode::Live
};

struct RoundStats {
    int round = 0;
    double glyph_acc = 0.0;  // NaN when no ground truth is available
    double eqn_acc = 0.0;    // NaN when no ground truth is available
    std::size_t surviving_count = 0;
    double mean_edits = 0.0;
};

struct AblRunResult {
    PerceptionModel model;
    HypothesisState state;
    std::vector<RoundStats> per_round;
    // Last round's revisions, parallel to dataset.unlabeled; nullopt marks
    // an abstention.
    std::vector<std::optional<RevisionResult>> revisions;
};

// Phases 1-3, `rounds` times: (a) train perception on labeled glyphs,
// (b) classify the unlabeled equations, (c) revise them with the
// configured reasoner under the knowledge base (the hypothesis state
// carries across rounds, so filtering is monotone), (d) retrain on
// CE(labeled) + lambda_unlabel * CE(revised). Deterministic under the
// oracle and mock reasoners.
AblRunResult run_abl(const Dataset& dataset, const KnowledgeBase& kb, const LoopConfig& config);

// Labeled-only control arm: the same initial model trained on the labeled
// glyphs for `total_steps`.
PerceptionModel run_perception_only(const Dataset& dataset, const LoopConfig& config,
                                    int total_steps);

// The system's equation-level veracity prediction: the argmax reading of
// the glyphs is consistent with every surviving table.
bool predict_veracity(const PerceptionModel& model, const HypothesisState& state,
                      const EquationSample& sample);

struct JudgementModel {
    std::vector<double> weights;
    double bias = 0.0;
    double threshold = 0.5;
};

struct JudgementExample {
    Embedding embedding;
    bool level;
};

struct JudgeDecision {
    double score;  // calibrated probability in [0, 1]
    bool level;    // score >= threshold
};

// Phase 4 training pairs: level = the revised (or argmax) sequence is
// consistent with every surviving table. When `revisions` is supplied,
// abstained samples are excluded and revised sequences are used; otherwise
// the model's argmax reading is judged.
std::vector<JudgementExample> build_judgement_set(
    const PerceptionModel& model, const HypothesisState& state,
    const std::vector<EquationSample>& samples,
    const std::vector<std::optional<RevisionResult>>* revisions = nullptr);

// Logistic regression by full-batch gradient descent; deterministic.
// Throws std::invalid_argument when only one level is present.
JudgementModel train_judge(const std::vector<JudgementExample>& pairs, int steps = 5000,
                           double lr = 0.5);

JudgeDecision judge(const JudgementModel& model, const Embedding& embedding);

// Convenience: one combined descent step on CE(labeled) +
// lambda * CE(unlabeled); with lambda == 0 the unlabeled term is skipped
// entirely, reproducing labeled-only training bit for bit.
double two_term_step(PerceptionModel& model, std::span<const TrainExample> labeled,
                     std::span<const TrainExample> unlabeled, double lambda, double lr);

} // namespace chatabl
