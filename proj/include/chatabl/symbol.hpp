#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace chatabl {

// The four-symbol equation alphabet. Indices are the class ids used by the
// perception model and the tie-break order everywhere.
enum class Symbol : std::uint8_t {
    Zero = 0,
    One = 1,
    Plus = 2,
    Equals = 3,
};

inline constexpr int kAlphabetSize = 4;

using SymbolSeq = std::vector<Symbol>;

inline char symbol_char(Symbol s) {
    switch (s) {
        case Symbol::Zero: return '0';
        case Symbol::One: return '1';
        case Symbol::Plus: return '+';
        case Symbol::Equals: return '=';
    }
    return '?';
}

inline std::optional<Symbol> symbol_from_char(char c) {
    switch (c) {
        case '0': return Symbol::Zero;
        case '1': return Symbol::One;
        case '+': return Symbol::Plus;
        case '=': return Symbol::Equals;
        default: return std::nullopt;
    }
}

inline std::string symbols_to_string(const SymbolSeq& seq) {
    std::string out;
    out.reserve(seq.size());
    for (Symbol s : seq) out.push_back(symbol_char(s));
    return out;
}

// Returns nullopt if the string contains a character outside the alphabet.
inline std::optional<SymbolSeq> symbols_from_string(const std::string& text) {
    SymbolSeq seq;
    seq.reserve(text.size());
    for (char c : text) {
        auto s = symbol_from_char(c);
        if (!s) return std::nullopt;
        seq.push_back(*s);
    }
    return seq;
}

} // namespace chatabl
