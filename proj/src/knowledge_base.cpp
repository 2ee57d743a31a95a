#include "chatabl/knowledge_base.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "chatabl/equation.hpp"

namespace chatabl {

KnowledgeBase default_kb() {
    KnowledgeBase kb;
    kb.rules = {
        {"alphabet-only",
         "Each equation is a sequence of the symbols 0, 1, + and =, and has the format X+Y=Z."},
        {"single-plus", "There is exactly one + in the equation."},
        {"single-equals-after-plus",
         "There is exactly one = in the equation, and it comes after the +."},
        {"segments-nonempty", "The digit groups X, Y and Z are all nonempty."},
        {"no-leading-zeros",
         "A digit group never starts with 0 unless it is exactly the single digit 0."},
        {"digitwise-carry",
         "Z is computed from X and Y digit by digit, starting from the rightmost digit, possibly "
         "carrying into the next digit."},
        {"operation-fixed-unknown",
         "The rule that combines digits is not given, but it is the same for every equation."},
    };
    return kb;
}

void add_exemplar(KnowledgeBase& kb, const std::string& expr, bool veracity,
                  std::optional<std::string> explanation) {
    if (!parse_expression(expr).ok()) {
        throw std::invalid_argument("add_exemplar: exemplar does not parse: " + expr);
    }
    kb.exemplars.push_back(Exemplar{expr, veracity, std::move(explanation)});
}

std::string render_rules_text(const KnowledgeBase& kb) {
    std::string out;
    for (std::size_t i = 0; i < kb.rules.size(); ++i) {
        out += std::to_string(i + 1) + ". " + kb.rules[i].text + "\n";
    }
    return out;
}

std::size_t levenshtein(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::vector<Exemplar> select_exemplars(const KnowledgeBase& kb, const SymbolSeq& query,
                                       std::size_t k) {
    if (k > kb.exemplars.size()) {
        throw std::invalid_argument("select_exemplars: k exceeds exemplar count");
    }
    const std::string q = symbols_to_string(query);
    std::vector<std::pair<std::size_t, std::size_t>> ranked; // (distance, index)
    ranked.reserve(kb.exemplars.size());
    for (std::size_t i = 0; i < kb.exemplars.size(); ++i) {
        ranked.emplace_back(levenshtein(q, kb.exemplars[i].expr), i);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& l, const auto& r) { return l.first < r.first; });
    std::vector<Exemplar> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(kb.exemplars[ranked[i].second]);
    return out;
}

namespace {

bool rule_holds(const std::string& id, const SymbolSeq& s) {
    auto count_of = [&](Symbol sym) {
        return std::count(s.begin(), s.end(), sym);
    };
    auto segments_defined = [&]() {
        return count_of(Symbol::Plus) == 1 && count_of(Symbol::Equals) == 1 &&
               std::find(s.begin(), s.end(), Symbol::Plus) <
                   std::find(s.begin(), s.end(), Symbol::Equals);
    };
    auto segments = [&]() {
        std::vector<std::string> segs(1);
        for (Symbol sym : s) {
            if (sym == Symbol::Plus || sym == Symbol::Equals) {
                segs.emplace_back();
            } else {
                segs.back().push_back(symbol_char(sym));
            }
        }
        return segs;
    };

    if (id == "alphabet-only") return true; // guaranteed by the symbol type
    if (id == "single-plus") return count_of(Symbol::Plus) == 1;
    if (id == "single-equals-after-plus") {
        if (count_of(Symbol::Equals) != 1) return false;
        if (count_of(Symbol::Plus) != 1) return true; // counted by single-plus
        return std::find(s.begin(), s.end(), Symbol::Plus) <
               std::find(s.begin(), s.end(), Symbol::Equals);
    }
    if (id == "segments-nonempty") {
        if (!segments_defined()) return true;
        for (const auto& seg : segments()) {
            if (seg.empty()) return false;
        }
        return true;
    }
    if (id == "no-leading-zeros") {
        if (!segments_defined()) return true;
        for (const auto& seg : segments()) {
            if (seg.size() > 1 && seg[0] == '0') return false;
        }
        return true;
    }
    return true; // informational rules have no structural content
}

} // namespace

std::vector<std::size_t> check_structural(const KnowledgeBase& kb, const SymbolSeq& symbols) {
    std::vector<std::size_t> violated;
    for (std::size_t i = 0; i < kb.rules.size(); ++i) {
        if (!rule_holds(kb.rules[i].id, symbols)) violated.push_back(i);
    }
    return violated;
}

void save_kb(const KnowledgeBase& kb, const std::string& path) {
    nlohmann::json doc;
    doc["rules"] = nlohmann::json::array();
    for (const auto& r : kb.rules) {
        doc["rules"].push_back({{"id", r.id}, {"text", r.text}});
    }
    doc["exemplars"] = nlohmann::json::array();
    for (const auto& e : kb.exemplars) {
        nlohmann::json row = {{"expr", e.expr}, {"veracity", e.veracity}};
        if (e.explanation) row["explanation"] = *e.explanation;
        doc["exemplars"].push_back(row);
    }
    doc["table_constraints"] = nlohmann::json::array();
    for (const auto& c : kb.table_constraints) {
        doc["table_constraints"].push_back(
            {{"a", c.a}, {"b", c.b}, {"c_in", c.c_in}, {"s", c.s}, {"c_out", c.c_out}});
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_kb: cannot write " + path);
    out << doc.dump(2) << "\n";
}

KnowledgeBase load_kb(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_kb: cannot read " + path);
    nlohmann::json doc = nlohmann::json::parse(in);
    KnowledgeBase kb;
    for (const auto& r : doc.at("rules")) {
        kb.rules.push_back(KbRule{r.at("id").get<std::string>(), r.at("text").get<std::string>()});
    }
    if (doc.contains("exemplars")) {
        for (const auto& e : doc["exemplars"]) {
            std::optional<std::string> expl;
            if (e.contains("explanation")) expl = e["explanation"].get<std::string>();
            add_exemplar(kb, e.at("expr").get<std::string>(), e.at("veracity").get<bool>(), expl);
        }
    }
    if (doc.contains("table_constraints")) {
        for (const auto& c : doc["table_constraints"]) {
            kb.table_constraints.push_back(TableConstraint{c.at("a").get<int>(), c.at("b").get<int>(),
                                                           c.at("c_in").get<int>(), c.at("s").get<int>(),
                                                           c.at("c_out").get<int>()});
        }
    }
    return kb;
}

} // namespace chatabl
