#pragma once

#include <optional>
#include <string>

#include "chatabl/op_table.hpp"
#include "chatabl/symbol.hpp"

namespace chatabl {

// The three digit segments of X+Y=Z, most-significant-first bitstrings.
struct ParsedEquation {
    std::string x;
    std::string y;
    std::string z;

    SymbolSeq to_symbols() const;
    bool operator==(const ParsedEquation&) const = default;
};

enum class ParseErrorKind {
    MissingPlus,
    MissingEquals,
    DuplicatePlus,
    DuplicateEquals,
    PlusAfterEquals,
    EmptySegment,
    LeadingZero,
    ForeignSymbol,
};

struct ParseError {
    ParseErrorKind kind;
    // Which segment the error refers to: 0 = x, 1 = y, 2 = z, -1 = n/a.
    int segment = -1;

    std::string message() const;
};

struct ParseResult {
    std::optional<ParsedEquation> equation;
    std::optional<ParseError> error;

    bool ok() const { return equation.has_value(); }
};

// Accepts exactly the grammar: one '+', one '=' after it, three nonempty
// digit segments, no leading zero except the literal "0".
ParseResult parse_expression(const SymbolSeq& symbols);

// String convenience; characters outside the alphabet yield ForeignSymbol.
ParseResult parse_expression(const std::string& text);

// Evaluates x (?) y under the table: right-aligns the operands, pads the
// shorter with zeros, walks right-to-left with carry 0, emits a leading
// "1" if the last carry-out is set, then strips leading zeros.
// Throws std::invalid_argument on empty strings or non-bit characters.
std::string eval_equation(const std::string& x, const std::string& y,
                          const OperationTable& table);

// True iff `value` is a legal digit segment (nonempty, bits only, no
// leading zero unless exactly "0").
bool is_legal_bitstring(const std::string& value);

} // namespace chatabl
