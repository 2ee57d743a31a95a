#pragma once

#include <optional>
#include <string>
#include <vector>

#include "chatabl/op_table.hpp"
#include "chatabl/symbol.hpp"

namespace chatabl {

// A structural rule: a machine-checkable predicate (dispatched by id) with
// its natural-language rendering. Unknown ids are informational only.
struct KbRule {
    std::string id;
    std::string text;
};

struct Exemplar {
    std::string expr;
    bool veracity;
    std::optional<std::string> explanation;
};

struct TableConstraint {
    int a, b, c_in, s, c_out;
};

// Grammar constraints, their texts, exemplar equations and optional known
// table entries. The rendered rule text never describes the hidden
// operation; only structure.
struct KnowledgeBase {
    std::vector<KbRule> rules;
    std::vector<Exemplar> exemplars;
    std::vector<TableConstraint> table_constraints;
};

// The built-in rule set: alphabet, X+Y=Z shape, operator counts, segment
// legality, digit-by-digit evaluation order, fixed-but-unknown operation.
KnowledgeBase default_kb();

// Validates that the exemplar parses before adding it.
void add_exemplar(KnowledgeBase& kb, const std::string& expr, bool veracity,
                  std::optional<std::string> explanation = std::nullopt);

// Deterministic numbered rendering of the rule texts.
std::string render_rules_text(const KnowledgeBase& kb);

// The k exemplars closest to the query in Levenshtein distance over symbol
// strings; ties keep list order. Throws std::invalid_argument if k exceeds
// the store.
std::vector<Exemplar> select_exemplars(const KnowledgeBase& kb, const SymbolSeq& query, std::size_t k);

// Indices (0-based) of violated rules; empty means pass. Violations are
// exactly the parse failures: check_structural(kb, s) passes iff
// parse_expression(s) succeeds.
std::vector<std::size_t> check_structural(const KnowledgeBase& kb, const SymbolSeq& symbols);

std::size_t levenshtein(const std::string& a, const std::string& b);

// KB file: JSON {rules: [{id, text}], exemplars: [{expr, veracity,
// explanation?}], table_constraints: [{a,b,c_in,s,c_out}]}.
void save_kb(const KnowledgeBase& kb, const std::string& path);
KnowledgeBase load_kb(const std::string& path);

} // namespace chatabl
