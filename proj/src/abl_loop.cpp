#include "chatabl/abl_loop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "chatabl/equation.hpp"

namespace chatabl {

namespace {

std::vector<TrainExample> labeled_glyph_batch(const Dataset& dataset) {
    std::vector<TrainExample> batch;
    for (const EquationSample& s : dataset.labeled) {
        for (std::size_t i = 0; i < s.glyphs.size(); ++i) {
            batch.push_back(TrainExample{&s.glyphs[i], (*s.truth_symbols)[i]});
        }
    }
    return batch;
}

std::vector<Fact> labeled_facts(const Dataset& dataset) {
    std::vector<Fact> facts;
    for (const EquationSample& s : dataset.labeled) {
        facts.push_back(Fact{*s.truth_symbols, *s.veracity});
    }
    return facts;
}

void validate_labeled_coverage(const Dataset& dataset) {
    if (dataset.labeled.empty()) {
        throw std::invalid_argument("run_abl: dataset has no labeled samples");
    }
    std::set<Symbol> seen;
    for (const EquationSample& s : dataset.labeled) {
        for (Symbol sym : *s.truth_symbols) seen.insert(sym);
    }
    if (seen.size() != static_cast<std::size_t>(kAlphabetSize)) {
        throw std::invalid_argument("run_abl: labeled split does not cover every symbol class");
    }
}

double glyph_accuracy(const PerceptionModel& model, const Dataset& dataset) {
    std::size_t total = 0, hit = 0;
    auto score = [&](const EquationSample& s, const SymbolSeq& truth) {
        PseudoLabel label = classify_sequence(model, s);
        for (std::size_t i = 0; i < truth.size(); ++i) {
            ++total;
            if (label.argmax_symbols[i] == truth[i]) ++hit;
        }
    };
    for (const EquationSample& s : dataset.labeled) score(s, *s.truth_symbols);
    for (std::size_t u = 0; u < dataset.unlabeled_truth.size(); ++u) {
        score(dataset.unlabeled[u], dataset.unlabeled_truth[u].symbols);
    }
    if (total == 0) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(hit) / static_cast<double>(total);
}

double equation_accuracy(const PerceptionModel& model, const HypothesisState& state,
                         const Dataset& dataset) {
    std::size_t total = 0, hit = 0;
    for (const EquationSample& s : dataset.labeled) {
        ++total;
        if (predict_veracity(model, state, s) == *s.veracity) ++hit;
    }
    for (std::size_t u = 0; u < dataset.unlabeled_truth.size(); ++u) {
        ++total;
        if (predict_veracity(model, state, dataset.unlabeled[u]) ==
            dataset.unlabeled_truth[u].veracity) {
            ++hit;
        }
    }
    if (total == 0) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(hit) / static_cast<double>(total);
}

// Mock/live rounds mirror abduce_batch: most confident first, accepted
// revisions promoted to facts.
std::vector<std::optional<RevisionResult>> revise_via_loop(
    const std::vector<PseudoLabel>& pseudos, const KnowledgeBase& kb, HypothesisState& state,
    const LoopConfig& config) {
    std::vector<std::size_t> order(pseudos.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pseudos[a].mean_confidence() > pseudos[b].mean_confidence();
    });

    std::vector<std::optional<RevisionResult>> revisions(pseudos.size());
    for (std::size_t idx : order) {
        const PseudoLabel& pseudo = pseudos[idx];
        int budget =
            config.edit_budget > 0 ? config.edit_budget : default_edit_budget(pseudo.size());

        LoopOptions options;
        options.max_iterations = config.max_loop_iterations;
        options.gated = true;
        options.state = &state;

        std::string expr = symbols_to_string(pseudo.argmax_symbols);
        LoopOutcome outcome;
        if (config.reasoner == ReasonerMode::Mock) {
            MockBackend backend(kb, state, budget);
            outcome = self_feedback_loop(expr, kb, backend, options.max_iterations, options);
        } else {
            outcome = self_feedback_loop(expr, kb, *config.live_backend, options.max_iterations,
                                         options);
        }
        if (outcome.status == LoopStatus::Accepted && outcome.result) {
            state = filter_hypotheses(state, Fact{outcome.result->revised_symbols, true});
            revisions[idx] = std::move(outcome.result);
        }
    }
    return revisions;
}

} // namespace

double two_term_step(PerceptionModel& model, std::span<const TrainExample> labeled,
                     std::span<const TrainExample> unlabeled, double lambda, double lr) {
    std::vector<double> grad_l;
    double loss = batch_gradient(model, labeled, grad_l);
    if (lambda > 0.0 && !unlabeled.empty()) {
        std::vector<double> grad_u;
        double loss_u = batch_gradient(model, unlabeled, grad_u);
        loss += lambda * loss_u;
        for (std::size_t i = 0; i < grad_l.size(); ++i) grad_l[i] += lambda * grad_u[i];
    }
    if (!std::isfinite(loss)) throw TrainingDiverged(loss);
    auto& params = model.params();
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad_l[i];
    return loss;
}

bool predict_veracity(const PerceptionModel& model, const HypothesisState& state,
                      const EquationSample& sample) {
    PseudoLabel label = classify_sequence(model, sample);
    for (std::uint16_t code : state.codes()) {
        if (!check_consistency(label.argmax_symbols, OperationTable::from_code(code))) return false;
    }
    return state.count() > 0;
}

AblRunResult run_abl(const Dataset& dataset, const KnowledgeBase& kb, const LoopConfig& config) {
    if (config.rounds < 1) throw std::invalid_argument("run_abl: rounds must be >= 1");
    if (config.lambda_unlabel < 0.0) {
        throw std::invalid_argument("run_abl: lambda_unlabel must be >= 0");
    }
    if (config.reasoner == ReasonerMode::Live && config.live_backend == nullptr) {
        throw std::invalid_argument("run_abl: live reasoner needs a backend");
    }
    validate_labeled_coverage(dataset);

    const std::vector<TrainExample> batch_l = labeled_glyph_batch(dataset);
    const std::vector<Fact> facts = labeled_facts(dataset);

    AblRunResult result{PerceptionModel::random_init(config.model_seed, config.hidden_width),
                        HypothesisState::full(),
                        {},
                        {}};

    // The state persists across rounds; each round's labeled facts are
    // re-applied idempotently and accepted revisions keep narrowing it.
    bool state_seeded = false;

    for (int round = 1; round <= config.rounds; ++round) {
        // (a) labeled training
        for (int step = 0; step < config.steps_labeled; ++step) {
            train_step(result.model, batch_l, config.lr);
        }

        // (b) classify unlabeled equations
        std::vector<PseudoLabel> pseudos;
        pseudos.reserve(dataset.unlabeled.size());
        for (const EquationSample& s : dataset.unlabeled) {
            pseudos.push_back(classify_sequence(result.model, s));
        }

        // (c) reasoner revision under the knowledge base
        std::vector<std::optional<RevisionResult>> revisions(pseudos.size());
        if (config.reasoner == ReasonerMode::Oracle) {
            AbduceOptions options;
            options.edit_budget = config.edit_budget;
            options.initial_state = state_seeded ? &result.state : nullptr;
            AbduceResult abduced = abduce_batch(pseudos, kb, facts, options);
            result.state = abduced.state;
            revisions = std::move(abduced.revisions);
        } else {
            if (!state_seeded) {
                HypothesisState state = apply_table_constraints(HypothesisState::full(),
                                                                kb.table_constraints);
                for (std::size_t i = 0; i < facts.size(); ++i) {
                    state = filter_hypotheses(state, facts[i]);
                    if (state.count() == 0) {
                        throw InconsistentFacts(i + 1, "run_abl: labeled facts are inconsistent");
                    }
                }
                result.state = state;
            }
            if (!pseudos.empty()) {
                revisions = revise_via_loop(pseudos, kb, result.state, config);
            }
        }
        state_seeded = true;

        // (d) combined retraining on labeled + revised supervision
        std::vector<TrainExample> batch_u;
        double edit_sum = 0.0;
        std::size_t accepted = 0;
        for (std::size_t u = 0; u < revisions.size(); ++u) {
            if (!revisions[u]) continue;
            ++accepted;
            edit_sum += revisions[u]->edits;
            const EquationSample& s = dataset.unlabeled[u];
            const SymbolSeq& revised = revisions[u]->revised_symbols;
            if (revised.size() != s.glyphs.size()) continue;  // length-changing corrections
            for (std::size_t i = 0; i < s.glyphs.size(); ++i) {
                batch_u.push_back(TrainExample{&s.glyphs[i], revised[i]});
            }
        }
        for (int step = 0; step < config.steps_combined; ++step) {
            two_term_step(result.model, batch_l, batch_u, config.lambda_unlabel, config.lr);
        }

        RoundStats stats;
        stats.round = round;
        stats.glyph_acc = glyph_accuracy(result.model, dataset);
        stats.eqn_acc = equation_accuracy(result.model, result.state, dataset);
        stats.surviving_count = result.state.count();
        stats.mean_edits = accepted > 0 ? edit_sum / static_cast<double>(accepted) : 0.0;
        result.per_round.push_back(stats);
        result.revisions = std::move(revisions);
    }
    return result;
}

PerceptionModel run_perception_only(const Dataset& dataset, const LoopConfig& config,
                                    int total_steps) {
    validate_labeled_coverage(dataset);
    const std::vector<TrainExample> batch_l = labeled_glyph_batch(dataset);
    PerceptionModel model = PerceptionModel::random_init(config.model_seed, config.hidden_width);
    for (int step = 0; step < total_steps; ++step) {
        train_step(model, batch_l, config.lr);
    }
    return model;
}

std::vector<JudgementExample> build_judgement_set(
    const PerceptionModel& model, const HypothesisState& state,
    const std::vector<EquationSample>& samples,
    const std::vector<std::optional<RevisionResult>>* revisions) {
    if (state.count() == 0) {
        throw std::invalid_argument("build_judgement_set: empty hypothesis state");
    }
    const std::vector<std::uint16_t> codes = state.codes();
    auto level_of = [&](const SymbolSeq& seq) {
        for (std::uint16_t code : codes) {
            if (!check_consistency(seq, OperationTable::from_code(code))) return false;
        }
        return true;
    };

    std::vector<JudgementExample> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        SymbolSeq seq;
        if (revisions) {
            if (!(*revisions)[i]) continue;  // abstained
            seq = (*revisions)[i]->revised_symbols;
        } else {
            seq = classify_sequence(model, samples[i]).argmax_symbols;
        }
        out.push_back(JudgementExample{embed(model, samples[i]), level_of(seq)});
    }
    return out;
}

JudgementModel train_judge(const std::vector<JudgementExample>& pairs, int steps, double lr) {
    bool has_true = false, has_false = false;
    for (const JudgementExample& p : pairs) (p.level ? has_true : has_false) = true;
    if (!has_true || !has_false) {
        throw std::invalid_argument("train_judge: both levels must be present");
    }

    const std::size_t width = pairs.front().embedding.values.size();
    JudgementModel model;
    model.weights.assign(width, 0.0);

    const double inv = 1.0 / static_cast<double>(pairs.size());
    std::vector<double> grad(width);
    for (int step = 0; step < steps; ++step) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_bias = 0.0;
        for (const JudgementExample& p : pairs) {
            double logit = model.bias;
            for (std::size_t j = 0; j < width; ++j) logit += model.weights[j] * p.embedding.values[j];
            double prob = 1.0 / (1.0 + std::exp(-logit));
            double delta = prob - (p.level ? 1.0 : 0.0);
            for (std::size_t j = 0; j < width; ++j) grad[j] += delta * p.embedding.values[j];
            grad_bias += delta;
        }
        for (std::size_t j = 0; j < width; ++j) model.weights[j] -= lr * grad[j] * inv;
        model.bias -= lr * grad_bias * inv;
    }
    return model;
}

JudgeDecision judge(const JudgementModel& model, const Embedding& embedding) {
    double logit = model.bias;
    for (std::size_t j = 0; j < model.weights.size() && j < embedding.values.size(); ++j) {
        logit += model.weights[j] * embedding.values[j];
    }
    double score = 1.0 / (1.0 + std::exp(-logit));
    return JudgeDecision{score, score >= model.threshold};
}

} // namespace chatabl
