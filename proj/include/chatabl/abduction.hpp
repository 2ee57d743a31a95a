#pragma once

#include <bitset>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chatabl/knowledge_base.hpp"
#include "chatabl/op_table.hpp"
#include "chatabl/perception.hpp"
#include "chatabl/symbol.hpp"

namespace chatabl {

struct Fact {
    SymbolSeq symbols;
    bool veracity;
};

// The set of operation-table codes still compatible with every fact seen
// so far. Filtering is monotone: a fact never adds codes back.
class HypothesisState {
public:
    static HypothesisState full();
    static HypothesisState empty_state();

    std::size_t count() const { return surviving_.count(); }
    bool contains(std::uint16_t code) const { return surviving_[code]; }
    void remove(std::uint16_t code) { surviving_[code] = false; }
    std::size_t facts_applied() const { return facts_applied_; }

    // Surviving codes in ascending order.
    std::vector<std::uint16_t> codes() const;

    friend HypothesisState filter_hypotheses(const HypothesisState& state, const Fact& fact);
    friend HypothesisState apply_table_constraints(const HypothesisState& state,
                                                   const std::vector<TableConstraint>& constraints);

private:
    std::bitset<OperationTable::kNumCodes> surviving_;
    std::size_t facts_applied_ = 0;
};

// True iff the symbols parse as x+y=z and the table evaluates x,y to z.
bool check_consistency(const SymbolSeq& symbols, const OperationTable& table);
bool check_consistency(const std::string& expr, const OperationTable& table);

// Keeps exactly the codes whose consistency verdict equals the stated
// veracity. Throws std::invalid_argument if the fact does not parse.
HypothesisState filter_hypotheses(const HypothesisState& state, const Fact& fact);

// Keeps codes matching the partially known table entries.
HypothesisState apply_table_constraints(const HypothesisState& state,
                                        const std::vector<TableConstraint>& constraints);

struct RevisionResult {
    SymbolSeq revised_symbols;
    std::vector<std::uint16_t> supporting_tables;
    double log_score = 0.0;
    int edits = 0;
    std::vector<std::string> trace;
};

// Highest-log-score sequence within `budget` edits of the argmax that is
// consistent with at least one surviving table. Budgets above 3 restrict
// each edited position to its top-2 symbols; smaller budgets search every
// per-position alternative. Ties break toward fewer edits, then the
// lexicographically smallest sequence. nullopt when nothing within budget
// is consistent.
std::optional<RevisionResult> revise(const PseudoLabel& pseudo, const HypothesisState& state,
                                     int budget);

struct InconsistentFacts : std::runtime_error {
    std::size_t prefix_len;
    InconsistentFacts(std::size_t n, const std::string& what)
        : std::runtime_error(what), prefix_len(n) {}
};

struct AbduceOptions {
    int edit_budget = 0;  // 0: ceil(length / 4) per equation
    // Seed from an already-filtered state instead of the full space (the
    // loop carries its state across rounds this way).
    const HypothesisState* initial_state = nullptr;
};

struct AbduceResult {
    HypothesisState state;
    // Parallel to the input pseudo-labels; nullopt marks an abstention.
    std::vector<std::optional<RevisionResult>> revisions;
};

int default_edit_budget(std::size_t length);

// Seeds the state from kb.table_constraints and the labeled facts (throws
// InconsistentFacts with the minimal conflicting prefix if they empty the
// space), then greedily revises the pseudo-labels in descending
// mean-confidence order, promoting each accepted revision to a positive
// fact.
AbduceResult abduce_batch(const std::vector<PseudoLabel>& pseudos, const KnowledgeBase& kb,
                          const std::vector<Fact>& labeled_facts, const AbduceOptions& options = {});

// Text dump: surviving codes in hex, one per line, sorted.
void dump_hypotheses(const HypothesisState& state, const std::string& path);
HypothesisState load_hypotheses(const std::string& path);

} // namespace chatabl
