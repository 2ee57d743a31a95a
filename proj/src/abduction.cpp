#include "chatabl/abduction.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

#include "chatabl/equation.hpp"

namespace chatabl {

HypothesisState HypothesisState::full() {
    HypothesisState s;
    s.surviving_.set();
    return s;
}

HypothesisState HypothesisState::empty_state() { return HypothesisState{}; }

std::vector<std::uint16_t> HypothesisState::codes() const {
    std::vector<std::uint16_t> out;
    out.reserve(surviving_.count());
    for (std::uint32_t c = 0; c < OperationTable::kNumCodes; ++c) {
        if (surviving_[c]) out.push_back(static_cast<std::uint16_t>(c));
    }
    return out;
}

namespace {

// eval_equation(x, y, t) == z, without building the result string. Walks
// the padded operands right-to-left; digits beyond |z| must evaluate to 0
// (they would be stripped), and a final carry forces the extra leading 1.
bool table_matches(const ParsedEquation& eq, const OperationTable& t) {
    const std::string& x = eq.x;
    const std::string& y = eq.y;
    const std::string& z = eq.z;
    const std::size_t n = std::max(x.size(), y.size());
    if (z.size() > n + 1) return false;
    int carry = 0;
    for (std::size_t i = 0; i < n; ++i) {
        int a = i < x.size() ? x[x.size() - 1 - i] - '0' : 0;
        int b = i < y.size() ? y[y.size() - 1 - i] - '0' : 0;
        AdderOut o = t.apply(a, b, carry);
        int expected = i < z.size() ? z[z.size() - 1 - i] - '0' : 0;
        if (o.sum != expected) return false;
        carry = o.carry;
    }
    if (carry) return z.size() == n + 1 && z[0] == '1';
    if (z.size() == n + 1) return false;
    // All digits above |z| were checked to be zero; z itself is legal, so
    // the stripped result matches exactly, except the all-zero case where
    // the evaluator emits "0".
    return true;
}

} // namespace

bool check_consistency(const SymbolSeq& symbols, const OperationTable& table) {
    ParseResult parsed = parse_expression(symbols);
    if (!parsed.ok()) return false;
    return table_matches(*parsed.equation, table);
}

bool check_consistency(const std::string& expr, const OperationTable& table) {
    ParseResult parsed = parse_expression(expr);
    if (!parsed.ok()) return false;
    return table_matches(*parsed.equation, table);
}

HypothesisState filter_hypotheses(const HypothesisState& state, const Fact& fact) {
    ParseResult parsed = parse_expression(fact.symbols);
    if (!parsed.ok()) {
        throw std::invalid_argument("filter_hypotheses: fact does not parse: " +
                                    symbols_to_string(fact.symbols) + " (" +
                                    parsed.error->message() + ")");
    }
    HypothesisState next = state;
    next.facts_applied_ = state.facts_applied_ + 1;
    for (std::uint32_t c = 0; c < OperationTable::kNumCodes; ++c) {
        if (!state.surviving_[c]) continue;
        bool consistent = table_matches(*parsed.equation, OperationTable::from_code(static_cast<std::uint16_t>(c)));
        if (consistent != fact.veracity) next.surviving_[c] = false;
    }
    return next;
}

HypothesisState apply_table_constraints(const HypothesisState& state,
                                        const std::vector<TableConstraint>& constraints) {
    HypothesisState next = state;
    for (const TableConstraint& tc : constraints) {
        for (std::uint32_t c = 0; c < OperationTable::kNumCodes; ++c) {
            if (!next.surviving_[c]) continue;
            AdderOut out = OperationTable::from_code(static_cast<std::uint16_t>(c)).apply(tc.a, tc.b, tc.c_in);
            if (out.sum != tc.s || out.carry != tc.c_out) next.surviving_[c] = false;
        }
    }
    return next;
}

namespace {

struct Alternative {
    Symbol symbol;
    double log_prob;
};

struct SearchNode {
    double score;
    int edits;
    SymbolSeq seq;
    // (slot index into the sorted position list, alternative rank),
    // strictly increasing slot indices.
    std::vector<std::pair<int, int>> slots;
};

// Total order: higher score, then fewer edits, then lexicographically
// smaller sequence. Used for both the frontier and the final tie-break, so
// the search reproduces exhaustive enumeration exactly.
bool node_better(const SearchNode& a, const SearchNode& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.edits != b.edits) return a.edits < b.edits;
    return a.seq < b.seq;
}

struct NodeWorse {
    bool operator()(const SearchNode& a, const SearchNode& b) const { return node_better(b, a); }
};

double safe_log(double p) {
    return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

double sequence_score(const PseudoLabel& pseudo, const SymbolSeq& seq) {
    double s = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        s += safe_log(pseudo.probs[i][static_cast<std::size_t>(seq[i])]);
    }
    return s;
}

} // namespace

std::optional<RevisionResult> revise(const PseudoLabel& pseudo, const HypothesisState& state,
                                     int budget) {
    if (pseudo.size() == 0) throw std::invalid_argument("revise: empty pseudo-label");
    if (state.count() == 0) throw std::invalid_argument("revise: empty hypothesis state");
    const std::size_t n = pseudo.size();

    std::vector<OperationTable> tables;
    tables.reserve(state.count());
    for (std::uint16_t code : state.codes()) tables.push_back(OperationTable::from_code(code));

    auto consistent_any = [&](const SymbolSeq& seq) {
        ParseResult parsed = parse_expression(seq);
        if (!parsed.ok()) return false;
        for (const OperationTable& t : tables) {
            if (table_matches(*parsed.equation, t)) return true;
        }
        return false;
    };

    // Per-position alternatives, best first; budgets above 3 keep only the
    // runner-up symbol.
    const bool top2_only = budget > 3;
    std::vector<std::vector<Alternative>> alternatives(n);
    for (std::size_t p = 0; p < n; ++p) {
        std::vector<Alternative> alts;
        for (int k = 0; k < kAlphabetSize; ++k) {
            Symbol s = static_cast<Symbol>(k);
            if (s == pseudo.argmax_symbols[p]) continue;
            alts.push_back(Alternative{s, safe_log(pseudo.probs[p][static_cast<std::size_t>(k)])});
        }
        std::stable_sort(alts.begin(), alts.end(), [](const Alternative& a, const Alternative& b) {
            return a.log_prob > b.log_prob;
        });
        if (top2_only && alts.size() > 1) alts.resize(1);
        alternatives[p] = std::move(alts);
    }

    // Positions sorted by the cost of their cheapest edit.
    std::vector<std::size_t> position_order(n);
    for (std::size_t p = 0; p < n; ++p) position_order[p] = p;
    std::vector<double> base_logp(n), best_delta(n);
    for (std::size_t p = 0; p < n; ++p) {
        base_logp[p] = safe_log(pseudo.probs[p][static_cast<std::size_t>(pseudo.argmax_symbols[p])]);
        best_delta[p] = alternatives[p].empty()
                            ? -std::numeric_limits<double>::infinity()
                            : alternatives[p][0].log_prob - base_logp[p];
    }
    std::stable_sort(position_order.begin(), position_order.end(),
                     [&](std::size_t a, std::size_t b) { return best_delta[a] > best_delta[b]; });

    auto make_sequence = [&](const std::vector<std::pair<int, int>>& slots) {
        SymbolSeq seq = pseudo.argmax_symbols;
        for (const auto& [slot, rank] : slots) {
            std::size_t p = position_order[static_cast<std::size_t>(slot)];
            seq[p] = alternatives[p][static_cast<std::size_t>(rank)].symbol;
        }
        return seq;
    };
    auto make_node = [&](std::vector<std::pair<int, int>> slots) {
        SearchNode node;
        node.seq = make_sequence(slots);
        node.score = sequence_score(pseudo, node.seq);
        node.edits = static_cast<int>(slots.size());
        node.slots = std::move(slots);
        return node;
    };

    // Best-first enumeration of edit combinations. Each node expands to at
    // most three children (extend / advance / bump), every combination is
    // generated exactly once, and a child never outranks its parent's
    // score, so the first consistent pop (after draining score ties) is
    // the exhaustive-search optimum.
    std::priority_queue<SearchNode, std::vector<SearchNode>, NodeWorse> frontier;
    frontier.push(make_node({}));

    std::optional<SearchNode> best;
    const int max_slot = static_cast<int>(n) - 1;
    // Resource guard for degenerate no-solution searches on very long
    // sequences; unreachable for the length/budget ranges the pipeline
    // uses (those enumerate a few thousand candidates at most).
    constexpr std::size_t kMaxExplored = 4'000'000;
    std::size_t explored = 0;
    while (!frontier.empty()) {
        if (++explored > kMaxExplored) break;
        SearchNode node = frontier.top();
        frontier.pop();
        if (best && best->score > node.score) break;
        if (consistent_any(node.seq)) {
            if (!best || node_better(node, *best)) best = node;
        }

        const bool can_extend = node.edits < budget;
        if (node.slots.empty()) {
            if (can_extend && max_slot >= 0) {
                std::size_t p0 = position_order[0];
                if (!alternatives[p0].empty()) {
                    auto slots = node.slots;
                    slots.emplace_back(0, 0);
                    frontier.push(make_node(std::move(slots)));
                }
            }
            continue;
        }

        auto [last_slot, last_rank] = node.slots.back();
        // extend
        if (can_extend && last_slot < max_slot) {
            std::size_t p = position_order[static_cast<std::size_t>(last_slot) + 1];
            if (!alternatives[p].empty()) {
                auto slots = node.slots;
                slots.emplace_back(last_slot + 1, 0);
                frontier.push(make_node(std::move(slots)));
            }
        }
        // advance
        if (last_rank == 0 && last_slot < max_slot) {
            std::size_t p = position_order[static_cast<std::size_t>(last_slot) + 1];
            if (!alternatives[p].empty()) {
                auto slots = node.slots;
                slots.back() = {last_slot + 1, 0};
                frontier.push(make_node(std::move(slots)));
            }
        }
        // bump
        {
            std::size_t p = position_order[static_cast<std::size_t>(last_slot)];
            if (static_cast<std::size_t>(last_rank) + 1 < alternatives[p].size()) {
                auto slots = node.slots;
                slots.back().second = last_rank + 1;
                frontier.push(make_node(std::move(slots)));
            }
        }
    }

    if (!best) return std::nullopt;

    RevisionResult result;
    result.revised_symbols = best->seq;
    result.log_score = best->score;
    result.edits = best->edits;
    for (std::uint16_t code : state.codes()) {
        if (check_consistency(best->seq, OperationTable::from_code(code))) {
            result.supporting_tables.push_back(code);
        }
    }

    std::ostringstream step;
    step << "pseudo-label argmax " << symbols_to_string(pseudo.argmax_symbols) << ", "
         << state.count() << " surviving tables, edit budget " << budget;
    result.trace.push_back(step.str());
    for (const auto& [slot, rank] : best->slots) {
        std::size_t p = position_order[static_cast<std::size_t>(slot)];
        std::ostringstream edit;
        edit << "position " << p << ": '" << symbol_char(pseudo.argmax_symbols[p]) << "' -> '"
             << symbol_char(best->seq[p]) << "' (p " << pseudo.probs[p][static_cast<std::size_t>(pseudo.argmax_symbols[p])]
             << " -> " << pseudo.probs[p][static_cast<std::size_t>(best->seq[p])] << ")";
        result.trace.push_back(edit.str());
    }
    std::ostringstream done;
    done << "revised to " << symbols_to_string(best->seq) << " with " << best->edits
         << " edit(s), log-score " << best->score << ", supported by "
         << result.supporting_tables.size() << " table(s)";
    result.trace.push_back(done.str());
    return result;
}

int default_edit_budget(std::size_t length) {
    return static_cast<int>((length + 3) / 4);
}

AbduceResult abduce_batch(const std::vector<PseudoLabel>& pseudos, const KnowledgeBase& kb,
                          const std::vector<Fact>& labeled_facts, const AbduceOptions& options) {
    if (labeled_facts.empty()) {
        throw std::invalid_argument("abduce_batch: labeled facts must be nonempty");
    }

    HypothesisState state =
        options.initial_state ? *options.initial_state : HypothesisState::full();
    state = apply_table_constraints(state, kb.table_constraints);
    if (state.count() == 0) {
        throw InconsistentFacts(0, "abduce_batch: table constraints admit no table");
    }
    for (std::size_t i = 0; i < labeled_facts.size(); ++i) {
        state = filter_hypotheses(state, labeled_facts[i]);
        if (state.count() == 0) {
            throw InconsistentFacts(i + 1,
                                    "abduce_batch: labeled facts are mutually inconsistent; "
                                    "minimal conflicting prefix has " +
                                        std::to_string(i + 1) + " facts, ending with " +
                                        symbols_to_string(labeled_facts[i].symbols) + "=" +
                                        (labeled_facts[i].veracity ? "true" : "false"));
        }
    }

    // Most confident equations first; accepted revisions become facts.
    std::vector<std::size_t> order(pseudos.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pseudos[a].mean_confidence() > pseudos[b].mean_confidence();
    });

    AbduceResult result;
    result.revisions.resize(pseudos.size());
    for (std::size_t idx : order) {
        const PseudoLabel& pseudo = pseudos[idx];
        int budget = options.edit_budget > 0 ? options.edit_budget : default_edit_budget(pseudo.size());
        auto revision = revise(pseudo, state, budget);
        if (revision) {
            state = filter_hypotheses(state, Fact{revision->revised_symbols, true});
            result.revisions[idx] = std::move(revision);
        }
    }
    result.state = state;
    return result;
}

void dump_hypotheses(const HypothesisState& state, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("dump_hypotheses: cannot write " + path);
    char buf[8];
    for (std::uint16_t code : state.codes()) {
        std::snprintf(buf, sizeof buf, "%04x", code);
        out << buf << "\n";
    }
}

HypothesisState load_hypotheses(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_hypotheses: cannot read " + path);
    HypothesisState state = HypothesisState::empty_state();
    std::string line;
    HypothesisState full = HypothesisState::full();
    std::vector<std::uint16_t> codes;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        codes.push_back(static_cast<std::uint16_t>(std::stoul(line, nullptr, 16)));
    }
    std::sort(codes.begin(), codes.end());
    // Rebuild by filtering the full set down to the listed codes.
    for (std::uint32_t c = 0; c < OperationTable::kNumCodes; ++c) {
        if (!std::binary_search(codes.begin(), codes.end(), static_cast<std::uint16_t>(c))) {
            full.remove(static_cast<std::uint16_t>(c));
        }
    }
    return full;
}

} // namespace chatabl
