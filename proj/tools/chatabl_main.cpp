#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "chatabl/abduction.hpp"
#include "chatabl/abl_loop.hpp"
#include "chatabl/dataset.hpp"
#include "chatabl/equation.hpp"
#include "chatabl/experiment.hpp"
#include "chatabl/knowledge_base.hpp"
#include "chatabl/metrics.hpp"
#include "chatabl/perception.hpp"
#include "chatabl/reasoner.hpp"
#include "chatabl/rng.hpp"

namespace {

using namespace chatabl;

ReasonerMode parse_reasoner(const std::string& name) {
    if (name == "oracle") return ReasonerMode::Oracle;
    if (name == "mock") return ReasonerMode::Mock;
    if (name == "live") return ReasonerMode::Live;
    throw CLI::ValidationError("--reasoner", "expected oracle|mock|live");
}

std::vector<Fact> facts_from(const Dataset& ds) {
    std::vector<Fact> facts;
    for (const auto& s : ds.labeled) facts.push_back(Fact{*s.truth_symbols, *s.veracity});
    return facts;
}

KnowledgeBase kb_for(const Dataset& ds, const std::string& kb_path) {
    KnowledgeBase kb = kb_path.empty() ? default_kb() : load_kb(kb_path);
    if (kb.exemplars.empty()) {
        for (std::size_t i = 0; i < std::min<std::size_t>(8, ds.labeled.size()); ++i) {
            add_exemplar(kb, symbols_to_string(*ds.labeled[i].truth_symbols),
                         *ds.labeled[i].veracity);
        }
    }
    return kb;
}

int cmd_gen_data(const GenConfig& cfg, std::uint64_t seed, const std::string& out) {
    Dataset ds = generate_dataset(cfg, seed);
    save_dataset(ds, out);
    std::printf("wrote %zu samples (%zu labeled, %zu unlabeled) to %s\n", ds.size(),
                ds.labeled.size(), ds.unlabeled.size(), out.c_str());
    return 0;
}

int cmd_train(const std::string& data, const std::string& out, int steps, double lr,
              std::uint64_t seed, int hidden) {
    Dataset ds = load_dataset(data);
    if (ds.labeled.empty()) {
        std::fprintf(stderr, "train: dataset has no labeled samples\n");
        return 1;
    }
    std::vector<TrainExample> batch;
    for (const auto& s : ds.labeled) {
        for (std::size_t i = 0; i < s.glyphs.size(); ++i) {
            batch.push_back(TrainExample{&s.glyphs[i], (*s.truth_symbols)[i]});
        }
    }
    PerceptionModel model = PerceptionModel::random_init(seed, hidden);
    double loss = 0.0;
    for (int step = 0; step < steps; ++step) loss = train_step(model, batch, lr);

    std::size_t hits = 0;
    for (const auto& s : ds.labeled) {
        PseudoLabel label = classify_sequence(model, s);
        for (std::size_t i = 0; i < s.glyphs.size(); ++i) {
            if (label.argmax_symbols[i] == (*s.truth_symbols)[i]) ++hits;
        }
    }
    std::filesystem::create_directories(out);
    save_checkpoint(model, out + "/model.ckpt");
    std::printf("final loss %.6f, labeled glyph accuracy %.4f, checkpoint at %s/model.ckpt\n",
                loss, static_cast<double>(hits) / static_cast<double>(batch.size()), out.c_str());
    return 0;
}

int cmd_abduce(const std::string& data, const std::string& out, const std::string& model_path,
               const std::string& kb_path, int edit_budget) {
    Dataset ds = load_dataset(data);
    KnowledgeBase kb = kb_for(ds, kb_path);
    std::filesystem::create_directories(out);

    std::vector<PseudoLabel> pseudos;
    if (!model_path.empty()) {
        PerceptionModel model = load_checkpoint(model_path);
        for (const auto& s : ds.unlabeled) pseudos.push_back(classify_sequence(model, s));
    }
    AbduceOptions options;
    options.edit_budget = edit_budget;
    AbduceResult result = abduce_batch(pseudos, kb, facts_from(ds), options);
    dump_hypotheses(result.state, out + "/hypotheses.txt");

    std::size_t accepted = 0;
    {
        std::ofstream revisions(out + "/revisions.jsonl");
        for (std::size_t i = 0; i < result.revisions.size(); ++i) {
            nlohmann::json rec;
            rec["index"] = i;
            rec["accepted"] = result.revisions[i].has_value();
            if (result.revisions[i]) {
                ++accepted;
                rec["revised"] = symbols_to_string(result.revisions[i]->revised_symbols);
                rec["edits"] = result.revisions[i]->edits;
                rec["log_score"] = result.revisions[i]->log_score;
            }
            revisions << rec.dump() << "\n";
        }
    }
    std::printf("surviving hypotheses: %zu (dump at %s/hypotheses.txt); revisions %zu/%zu accepted\n",
                result.state.count(), out.c_str(), accepted, result.revisions.size());
    return 0;
}

int cmd_loop(const std::string& data, const std::string& out, const LoopConfig& cfg,
             const std::string& kb_path) {
    Dataset ds = load_dataset(data);
    KnowledgeBase kb = kb_for(ds, kb_path);

    std::unique_ptr<ChatBackend> live;
    LoopConfig run_cfg = cfg;
    if (cfg.reasoner == ReasonerMode::Live) {
        live = std::make_unique<LiveBackend>(LiveConfig{});
        run_cfg.live_backend = live.get();
    }
    AblRunResult result = run_abl(ds, kb, run_cfg);

    std::filesystem::create_directories(out);
    save_checkpoint(result.model, out + "/model.ckpt");
    dump_hypotheses(result.state, out + "/hypotheses.txt");
    {
        std::ofstream rounds(out + "/rounds.csv");
        rounds << "round,glyph_acc,eqn_acc,surviving_count,mean_edits\n";
        for (const RoundStats& r : result.per_round) {
            char line[160];
            std::snprintf(line, sizeof line, "%d,%.6f,%.6f,%zu,%.6f\n", r.round, r.glyph_acc,
                          r.eqn_acc, r.surviving_count, r.mean_edits);
            rounds << line;
        }
    }
    std::printf("loop finished: %zu surviving hypotheses, artifacts at %s\n", result.state.count(),
                out.c_str());
    return 0;
}

int cmd_eval(const std::string& data, const std::string& model_path, const std::string& hyp_path,
             const std::string& out) {
    Dataset ds = load_dataset(data);
    PerceptionModel model = load_checkpoint(model_path);
    HypothesisState state = load_hypotheses(hyp_path);

    std::vector<bool> pred, truth;
    std::vector<double> score;
    for (const auto& s : ds.labeled) {
        bool p = predict_veracity(model, state, s);
        pred.push_back(p);
        score.push_back(p ? 1.0 : 0.0);
        truth.push_back(*s.veracity);
    }
    if (pred.empty()) {
        std::fprintf(stderr, "eval: dataset has no labeled samples to score against\n");
        return 1;
    }
    Metrics m = compute_metrics(pred, truth);
    bool have_auc = true;
    try {
        m.auc = auc(score, truth);
    } catch (const std::invalid_argument&) {
        have_auc = false;
    }

    std::filesystem::create_directories(out);
    std::ofstream csv(out + "/metrics.csv");
    csv << "method,labeled_frac,accuracy,precision,recall,f1,auc\n";
    char line[200];
    std::snprintf(line, sizeof line, "chatabl,1.00,%.6f,%.6f,%.6f,%.6f,", m.accuracy, m.precision,
                  m.recall, m.f1);
    csv << line;
    if (have_auc) {
        std::snprintf(line, sizeof line, "%.6f", m.auc);
        csv << line;
    }
    csv << "\n";
    std::printf("accuracy %.4f precision %.4f recall %.4f f1 %.4f%s\n", m.accuracy, m.precision,
                m.recall, m.f1, have_auc ? "" : " (auc skipped: single class)");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ChatABL-style abductive learning over handwritten binary equations"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic equation dataset");
    GenConfig gen_cfg;
    std::uint64_t gen_seed = 7;
    std::string gen_out = "data";
    int gen_table = -1;
    gen->add_option("--out", gen_out, "Output directory");
    gen->add_option("--seed", gen_seed, "Generation seed");
    gen->add_option("--min-len", gen_cfg.min_length, "Minimum total symbol length");
    gen->add_option("--max-len", gen_cfg.max_length, "Maximum total symbol length");
    gen->add_option("--per-length", gen_cfg.count_per_length, "Samples per length");
    gen->add_option("--positive-frac", gen_cfg.positive_fraction, "Fraction of true equations");
    gen->add_option("--labeled-frac", gen_cfg.labeled_fraction, "Fraction with labels");
    gen->add_option("--noise", gen_cfg.glyph_noise, "Glyph noise level (0 = clean)");
    gen->add_option("--table-code", gen_table, "Hidden table code (default: standard addition)");

    // train
    auto* train = app.add_subcommand("train", "Train the perception model on labeled glyphs");
    std::string train_data, train_out = "run";
    int train_steps = 600, train_hidden = 64;
    double train_lr = 0.5;
    std::uint64_t train_seed = 1;
    train->add_option("--data", train_data, "Dataset directory")->required();
    train->add_option("--out", train_out, "Output directory");
    train->add_option("--steps", train_steps, "Gradient descent steps");
    train->add_option("--lr", train_lr, "Learning rate");
    train->add_option("--seed", train_seed, "Model init seed");
    train->add_option("--hidden", train_hidden, "Hidden width");

    // abduce
    auto* abduce = app.add_subcommand("abduce", "Filter hypotheses from labeled facts and revise");
    std::string ab_data, ab_out = "run", ab_model, ab_kb;
    int ab_budget = 0;
    abduce->add_option("--data", ab_data, "Dataset directory")->required();
    abduce->add_option("--out", ab_out, "Output directory");
    abduce->add_option("--model", ab_model, "Perception checkpoint for pseudo-labels (optional)");
    abduce->add_option("--kb", ab_kb, "Knowledge base JSON (optional)");
    abduce->add_option("--edit-budget", ab_budget, "Edit budget (0 = ceil(len/4))");

    // loop
    auto* loop = app.add_subcommand("loop", "Run the full abductive training loop");
    std::string loop_data, loop_out = "run", loop_kb, loop_reasoner = "oracle";
    LoopConfig loop_cfg;
    loop->add_option("--data", loop_data, "Dataset directory")->required();
    loop->add_option("--out", loop_out, "Output directory");
    loop->add_option("--kb", loop_kb, "Knowledge base JSON (optional)");
    loop->add_option("--reasoner", loop_reasoner, "oracle|mock|live");
    loop->add_option("--rounds", loop_cfg.rounds, "Abduction/retrain rounds");
    loop->add_option("--lambda", loop_cfg.lambda_unlabel, "Weight of the unlabeled loss term");
    loop->add_option("--edit-budget", loop_cfg.edit_budget, "Edit budget (0 = ceil(len/4))");
    loop->add_option("--steps-labeled", loop_cfg.steps_labeled, "Labeled steps per round");
    loop->add_option("--steps-combined", loop_cfg.steps_combined, "Combined steps per round");
    loop->add_option("--lr", loop_cfg.lr, "Learning rate");
    loop->add_option("--seed", loop_cfg.model_seed, "Model init seed");
    loop->add_option("--max-iterations", loop_cfg.max_loop_iterations,
                     "Self-feedback iteration cap (mock/live)");

    // eval
    auto* eval = app.add_subcommand("eval", "Score a model + hypothesis dump against labeled data");
    std::string eval_data, eval_model, eval_hyp, eval_out = "run";
    eval->add_option("--data", eval_data, "Dataset directory")->required();
    eval->add_option("--model", eval_model, "Perception checkpoint")->required();
    eval->add_option("--hypotheses", eval_hyp, "Hypothesis dump file")->required();
    eval->add_option("--out", eval_out, "Output directory");

    // experiment
    auto* exp = app.add_subcommand("experiment", "Full benchmark: data, loop, baseline, metrics");
    std::string exp_out = "run", exp_config, exp_benchmark = "paper", exp_reasoner;
    std::vector<double> exp_fracs;
    std::uint64_t exp_seed = 0;
    bool exp_disjoint = false;
    exp->add_option("--out", exp_out, "Artifact directory");
    exp->add_option("--config", exp_config, "Experiment config JSON");
    exp->add_option("--benchmark", exp_benchmark, "paper|desk (ignored when --config is given)");
    exp->add_option("--labeled-frac", exp_fracs, "Labeled fractions (repeatable)");
    exp->add_option("--seed", exp_seed, "Master seed");
    exp->add_option("--reasoner", exp_reasoner, "oracle|mock|live");
    exp->add_flag("--disjoint-lengths", exp_disjoint,
                  "Restrict test lengths to strictly above the training range");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            if (gen_table >= 0) gen_cfg.table_code = static_cast<std::uint16_t>(gen_table);
            return cmd_gen_data(gen_cfg, gen_seed, gen_out);
        }
        if (train->parsed()) {
            return cmd_train(train_data, train_out, train_steps, train_lr, train_seed, train_hidden);
        }
        if (abduce->parsed()) return cmd_abduce(ab_data, ab_out, ab_model, ab_kb, ab_budget);
        if (loop->parsed()) {
            loop_cfg.reasoner = parse_reasoner(loop_reasoner);
            return cmd_loop(loop_data, loop_out, loop_cfg, loop_kb);
        }
        if (eval->parsed()) return cmd_eval(eval_data, eval_model, eval_hyp, eval_out);
        if (exp->parsed()) {
            ExperimentConfig cfg;
            if (!exp_config.empty()) {
                cfg = load_experiment_config(exp_config);
            } else if (exp_benchmark == "desk") {
                cfg = ExperimentConfig::desk_benchmark();
            } else {
                cfg = ExperimentConfig::paper_protocol();
            }
            if (!exp_fracs.empty()) cfg.labeled_fracs = exp_fracs;
            if (exp_seed != 0) cfg.seed = exp_seed;
            if (!exp_reasoner.empty()) cfg.loop.reasoner = parse_reasoner(exp_reasoner);
            if (exp_disjoint) cfg.disjoint_lengths = true;
            ExperimentReport report = run_experiment(cfg, exp_out);
            for (const MetricsRow& row : report.rows) {
                std::printf("%-14s frac %.2f: acc %.4f prec %.4f rec %.4f f1 %.4f auc %.4f\n",
                            row.method.c_str(), row.labeled_frac, row.metrics.accuracy,
                            row.metrics.precision, row.metrics.recall, row.metrics.f1,
                            row.metrics.auc);
            }
            std::printf("artifacts at %s\n", report.out_dir.c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
