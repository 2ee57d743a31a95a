#include "chatabl/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "chatabl/equation.hpp"
#include "chatabl/rng.hpp"

namespace chatabl {

ExperimentConfig::ExperimentConfig() : table_code(make_standard_table().code()) {}

ExperimentConfig ExperimentConfig::paper_protocol() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::desk_benchmark() {
    ExperimentConfig c;
    c.train_min_length = 5;
    c.train_max_length = 10;
    c.test_min_length = 5;
    c.test_max_length = 12;
    c.train_per_length = 40;
    c.test_per_length = 50;
    c.labeled_fracs = {0.2};
    c.glyph_noise = 0.12;
    c.seed = 123;
    c.loop.rounds = 3;
    c.loop.steps_labeled = 200;
    c.loop.steps_combined = 120;
    c.loop.lr = 0.5;
    return c;
}

namespace {

const char* reasoner_name(ReasonerMode mode) {
    switch (mode) {
        case ReasonerMode::Oracle: return "oracle";
        case ReasonerMode::Mock: return "mock";
        case ReasonerMode::Live: return "live";
    }
    return "?";
}

ReasonerMode reasoner_from_name(const std::string& name) {
    if (name == "oracle") return ReasonerMode::Oracle;
    if (name == "mock") return ReasonerMode::Mock;
    if (name == "live") return ReasonerMode::Live;
    throw std::invalid_argument("unknown reasoner mode: " + name);
}

} // namespace

void save_experiment_config(const ExperimentConfig& c, const std::string& path) {
    nlohmann::json doc;
    doc["train_min_length"] = c.train_min_length;
    doc["train_max_length"] = c.train_max_length;
    doc["test_min_length"] = c.test_min_length;
    doc["test_max_length"] = c.test_max_length;
    doc["train_per_length"] = c.train_per_length;
    doc["test_per_length"] = c.test_per_length;
    doc["positive_fraction"] = c.positive_fraction;
    doc["labeled_fracs"] = c.labeled_fracs;
    doc["glyph_noise"] = c.glyph_noise;
    doc["table_code"] = c.table_code;
    doc["seed"] = c.seed;
    doc["disjoint_lengths"] = c.disjoint_lengths;
    doc["reasoner"] = reasoner_name(c.loop.reasoner);
    doc["rounds"] = c.loop.rounds;
    doc["lambda_unlabel"] = c.loop.lambda_unlabel;
    doc["edit_budget"] = c.loop.edit_budget;
    doc["steps_labeled"] = c.loop.steps_labeled;
    doc["steps_combined"] = c.loop.steps_combined;
    doc["lr"] = c.loop.lr;
    doc["hidden_width"] = c.loop.hidden_width;
    doc["max_loop_iterations"] = c.loop.max_loop_iterations;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_experiment_config: cannot write " + path);
    out << doc.dump(2) << "\n";
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_experiment_config: cannot read " + path);
    nlohmann::json doc = nlohmann::json::parse(in);
    ExperimentConfig c;
    auto get = [&](const char* key, auto& field) {
        if (doc.contains(key)) field = doc[key].get<std::remove_reference_t<decltype(field)>>();
    };
    get("train_min_length", c.train_min_length);
    get("train_max_length", c.train_max_length);
    get("test_min_length", c.test_min_length);
    get("test_max_length", c.test_max_length);
    get("train_per_length", c.train_per_length);
    get("test_per_length", c.test_per_length);
    get("positive_fraction", c.positive_fraction);
    get("labeled_fracs", c.labeled_fracs);
    get("glyph_noise", c.glyph_noise);
    get("table_code", c.table_code);
    get("seed", c.seed);
    get("disjoint_lengths", c.disjoint_lengths);
    get("rounds", c.loop.rounds);
    get("lambda_unlabel", c.loop.lambda_unlabel);
    get("edit_budget", c.loop.edit_budget);
    get("steps_labeled", c.loop.steps_labeled);
    get("steps_combined", c.loop.steps_combined);
    get("lr", c.loop.lr);
    get("hidden_width", c.loop.hidden_width);
    get("max_loop_iterations", c.loop.max_loop_iterations);
    if (doc.contains("reasoner")) {
        c.loop.reasoner = reasoner_from_name(doc["reasoner"].get<std::string>());
    }
    return c;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string frac_tag(double frac) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", frac);
    return buf;
}

void validate(const ExperimentConfig& c) {
    if (c.train_min_length > c.train_max_length || c.test_min_length > c.test_max_length) {
        throw std::invalid_argument("run_experiment: empty length range");
    }
    if (c.labeled_fracs.empty()) {
        throw std::invalid_argument("run_experiment: no labeled fractions");
    }
    for (double f : c.labeled_fracs) {
        if (f <= 0.0 || f > 1.0) {
            throw std::invalid_argument("run_experiment: labeled fraction must lie in (0, 1]");
        }
    }
}

struct MethodEval {
    std::vector<bool> pred;
    std::vector<double> score;
};

Metrics metrics_with_auc(const std::vector<bool>& pred, const std::vector<double>& score,
                         const std::vector<bool>& truth, bool* auc_ok) {
    Metrics m = compute_metrics(pred, truth);
    try {
        m.auc = auc(score, truth);
        if (auc_ok) *auc_ok = true;
    } catch (const std::invalid_argument&) {
        m.auc = std::numeric_limits<double>::quiet_NaN();
        if (auc_ok) *auc_ok = false;
    }
    return m;
}

} // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
    validate(config);
    std::filesystem::create_directories(out_dir);
    save_experiment_config(config, out_dir + "/config.json");

    ExperimentReport report;
    report.out_dir = out_dir;

    // Test data is shared across fractions; all samples carry ground truth
    // (it is used for scoring only, never for training).
    GenConfig test_cfg;
    test_cfg.min_length =
        config.disjoint_lengths ? std::max(config.test_min_length, config.train_max_length + 1)
                                : config.test_min_length;
    test_cfg.max_length = config.test_max_length;
    if (test_cfg.min_length > test_cfg.max_length) {
        throw std::invalid_argument("run_experiment: disjoint test length range is empty");
    }
    test_cfg.count_per_length = config.test_per_length;
    test_cfg.positive_fraction = config.positive_fraction;
    test_cfg.labeled_fraction = 1.0;
    test_cfg.glyph_noise = config.glyph_noise;
    test_cfg.table_code = config.table_code;
    Dataset test_ds = generate_dataset(test_cfg, mix_seed(config.seed, 0x7e57));
    save_dataset(test_ds, out_dir + "/test_data");

    std::ofstream metrics_csv(out_dir + "/metrics.csv");
    std::ofstream per_length_csv(out_dir + "/per_length.csv");
    if (!metrics_csv || !per_length_csv) {
        throw std::runtime_error("run_experiment: cannot write reports to " + out_dir);
    }
    metrics_csv << "method,labeled_frac,accuracy,precision,recall,f1,auc\n";
    per_length_csv << "method,labeled_frac,length,n,accuracy,precision,recall,f1,auc\n";

    std::vector<std::pair<double, double>> frac_glyph_acc; // (frac, final glyph acc)

    for (double frac : config.labeled_fracs) {
        const std::string tag = frac_tag(frac);

        GenConfig train_cfg;
        train_cfg.min_length = config.train_min_length;
        train_cfg.max_length = config.train_max_length;
        train_cfg.count_per_length = config.train_per_length;
        train_cfg.positive_fraction = config.positive_fraction;
        train_cfg.labeled_fraction = frac;
        train_cfg.glyph_noise = config.glyph_noise;
        train_cfg.table_code = config.table_code;
        Dataset train_ds = generate_dataset(train_cfg, mix_seed(config.seed, 0x7a11));
        save_dataset(train_ds, out_dir + "/train_data_" + tag);

        KnowledgeBase kb = default_kb();
        const std::size_t n_exemplars = std::min<std::size_t>(8, train_ds.labeled.size());
        for (std::size_t i = 0; i < n_exemplars; ++i) {
            add_exemplar(kb, symbols_to_string(*train_ds.labeled[i].truth_symbols),
                         *train_ds.labeled[i].veracity);
        }

        LoopConfig loop_cfg = config.loop;
        loop_cfg.model_seed = mix_seed(config.seed, 0x0de1);

        AblRunResult abl = run_abl(train_ds, kb, loop_cfg);
        const int baseline_steps =
            loop_cfg.rounds * (loop_cfg.steps_labeled + loop_cfg.steps_combined);
        PerceptionModel baseline = run_perception_only(train_ds, loop_cfg, baseline_steps);

        // Per-round stats.
        {
            std::ofstream rounds_csv(out_dir + "/rounds_" + tag + ".csv");
            rounds_csv << "round,glyph_acc,eqn_acc,surviving_count,mean_edits\n";
            for (const RoundStats& r : abl.per_round) {
                rounds_csv << r.round << "," << fmt(r.glyph_acc) << "," << fmt(r.eqn_acc) << ","
                           << r.surviving_count << "," << fmt(r.mean_edits) << "\n";
            }
        }
        save_checkpoint(abl.model, out_dir + "/model_chatabl_" + tag + ".ckpt");
        save_checkpoint(baseline, out_dir + "/model_baseline_" + tag + ".ckpt");
        dump_hypotheses(abl.state, out_dir + "/hypotheses_" + tag + ".txt");
        {
            std::ofstream transcripts(out_dir + "/transcripts_" + tag + ".jsonl");
            for (std::size_t u = 0; u < abl.revisions.size(); ++u) {
                nlohmann::json rec;
                rec["index"] = u;
                rec["accepted"] = abl.revisions[u].has_value();
                rec["trace"] = nlohmann::json::array();
                if (abl.revisions[u]) {
                    for (const std::string& line : abl.revisions[u]->trace) rec["trace"].push_back(line);
                }
                transcripts << rec.dump() << "\n";
            }
        }
        if (!abl.per_round.empty()) {
            frac_glyph_acc.emplace_back(frac, abl.per_round.back().glyph_acc);
        }

        // Phase 4 judges. The ABL judge learns from consistency levels of
        // the final argmax readings plus the labeled ground truth; the
        // baseline judge sees the labeled ground truth only.
        std::vector<JudgementExample> abl_pairs =
            build_judgement_set(abl.model, abl.state, train_ds.unlabeled);
        for (const EquationSample& s : train_ds.labeled) {
            abl_pairs.push_back(JudgementExample{embed(abl.model, s), *s.veracity});
        }
        std::vector<JudgementExample> base_pairs;
        for (const EquationSample& s : train_ds.labeled) {
            base_pairs.push_back(JudgementExample{embed(baseline, s), *s.veracity});
        }
        std::optional<JudgementModel> abl_judge, base_judge;
        try {
            abl_judge = train_judge(abl_pairs);
        } catch (const std::invalid_argument&) {
            report.annotations.push_back("labeled_frac " + tag +
                                         ": ABL judgement set is single-class; judge rows skipped");
        }
        try {
            base_judge = train_judge(base_pairs);
        } catch (const std::invalid_argument&) {
            report.annotations.push_back("labeled_frac " + tag +
                                         ": baseline judgement set is single-class; judge rows skipped");
        }

        // Test evaluation, overall and per length.
        std::vector<bool> truth;
        std::vector<int> lengths;
        MethodEval symbolic, learned, base_eval;
        for (const EquationSample& s : test_ds.labeled) {
            truth.push_back(*s.veracity);
            lengths.push_back(static_cast<int>(s.length()));

            bool sym_pred = predict_veracity(abl.model, abl.state, s);
            symbolic.pred.push_back(sym_pred);
            symbolic.score.push_back(sym_pred ? 1.0 : 0.0);

            if (abl_judge) {
                JudgeDecision d = judge(*abl_judge, embed(abl.model, s));
                learned.pred.push_back(d.level);
                learned.score.push_back(d.score);
            }
            if (base_judge) {
                JudgeDecision d = judge(*base_judge, embed(baseline, s));
                base_eval.pred.push_back(d.level);
                base_eval.score.push_back(d.score);
            }
        }

        struct MethodRows {
            const char* name;
            const MethodEval* eval;
        };
        const MethodRows methods[] = {{"chatabl", &symbolic},
                                      {"chatabl-judge", abl_judge ? &learned : nullptr},
                                      {"baseline", base_judge ? &base_eval : nullptr}};
        for (const MethodRows& m : methods) {
            if (!m.eval || m.eval->pred.empty()) continue;
            bool auc_ok = false;
            Metrics overall = metrics_with_auc(m.eval->pred, m.eval->score, truth, &auc_ok);
            metrics_csv << m.name << "," << tag << "," << fmt(overall.accuracy) << ","
                        << fmt(overall.precision) << "," << fmt(overall.recall) << ","
                        << fmt(overall.f1) << "," << (auc_ok ? fmt(overall.auc) : "") << "\n";
            report.rows.push_back(MetricsRow{m.name, frac, overall});

            std::map<int, std::vector<std::size_t>> by_length;
            for (std::size_t i = 0; i < lengths.size(); ++i) by_length[lengths[i]].push_back(i);
            for (const auto& [len, idxs] : by_length) {
                std::vector<bool> p, t;
                std::vector<double> sc;
                for (std::size_t i : idxs) {
                    p.push_back(m.eval->pred[i]);
                    sc.push_back(m.eval->score[i]);
                    t.push_back(truth[i]);
                }
                bool len_auc_ok = false;
                Metrics lm = metrics_with_auc(p, sc, t, &len_auc_ok);
                per_length_csv << m.name << "," << tag << "," << len << "," << idxs.size() << ","
                               << fmt(lm.accuracy) << "," << fmt(lm.precision) << ","
                               << fmt(lm.recall) << "," << fmt(lm.f1) << ","
                               << (len_auc_ok ? fmt(lm.auc) : "") << "\n";
            }
        }
        report.rounds.emplace_back(frac, abl.per_round);
    }

    // Soft check: glyph accuracy is expected to be monotone in the labeled
    // fraction; a violation is annotated, not failed.
    for (std::size_t i = 0; i < frac_glyph_acc.size(); ++i) {
        for (std::size_t j = i + 1; j < frac_glyph_acc.size(); ++j) {
            const auto& [fi, ai] = frac_glyph_acc[i];
            const auto& [fj, aj] = frac_glyph_acc[j];
            if (fi < fj && aj < ai) {
                report.annotations.push_back("glyph accuracy not monotone in labeled fraction: " +
                                             frac_tag(fi) + " -> " + fmt(ai) + ", " + frac_tag(fj) +
                                             " -> " + fmt(aj));
            }
        }
    }
    {
        std::ofstream annotations(out_dir + "/annotations.txt");
        for (const std::string& a : report.annotations) annotations << a << "\n";
    }
    return report;
}

} // namespace chatabl
