#include "chatabl/equation.hpp"

#include <algorithm>
#include <stdexcept>

namespace chatabl {

SymbolSeq ParsedEquation::to_symbols() const {
    std::string text = x + "+" + y + "=" + z;
    auto seq = symbols_from_string(text);
    return *seq;
}

std::string ParseError::message() const {
    const char* seg = segment == 0 ? "x" : segment == 1 ? "y" : segment == 2 ? "z" : "?";
    switch (kind) {
        case ParseErrorKind::MissingPlus: return "missing '+'";
        case ParseErrorKind::MissingEquals: return "missing '='";
        case ParseErrorKind::DuplicatePlus: return "more than one '+'";
        case ParseErrorKind::DuplicateEquals: return "more than one '='";
        case ParseErrorKind::PlusAfterEquals: return "'+' appears after '='";
        case ParseErrorKind::EmptySegment: return std::string("empty segment ") + seg;
        case ParseErrorKind::LeadingZero: return std::string("leading zero in segment ") + seg;
        case ParseErrorKind::ForeignSymbol: return "character outside the alphabet";
    }
    return "unknown parse error";
}

bool is_legal_bitstring(const std::string& value) {
    if (value.empty()) return false;
    for (char c : value) {
        if (c != '0' && c != '1') return false;
    }
    return value.size() == 1 || value[0] != '0';
}

namespace {

ParseResult fail(ParseErrorKind kind, int segment = -1) {
    ParseResult r;
    r.error = ParseError{kind, segment};
    return r;
}

std::optional<ParseError> check_segment(const std::string& seg, int index) {
    if (seg.empty()) return ParseError{ParseErrorKind::EmptySegment, index};
    if (seg.size() > 1 && seg[0] == '0') return ParseError{ParseErrorKind::LeadingZero, index};
    return std::nullopt;
}

} // namespace

ParseResult parse_expression(const SymbolSeq& symbols) {
    int plus_at = -1;
    int equals_at = -1;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (symbols[i] == Symbol::Plus) {
            if (plus_at >= 0) return fail(ParseErrorKind::DuplicatePlus);
            plus_at = static_cast<int>(i);
        } else if (symbols[i] == Symbol::Equals) {
            if (equals_at >= 0) return fail(ParseErrorKind::DuplicateEquals);
            equals_at = static_cast<int>(i);
        }
    }
    if (plus_at < 0) return fail(ParseErrorKind::MissingPlus);
    if (equals_at < 0) return fail(ParseErrorKind::MissingEquals);
    if (plus_at > equals_at) return fail(ParseErrorKind::PlusAfterEquals);

    auto digits = [&](int from, int to) {
        std::string out;
        for (int i = from; i < to; ++i) out.push_back(symbol_char(symbols[i]));
        return out;
    };
    ParsedEquation eq;
    eq.x = digits(0, plus_at);
    eq.y = digits(plus_at + 1, equals_at);
    eq.z = digits(equals_at + 1, static_cast<int>(symbols.size()));

    const std::string* segs[3] = {&eq.x, &eq.y, &eq.z};
    for (int i = 0; i < 3; ++i) {
        if (auto err = check_segment(*segs[i], i)) {
            ParseResult r;
            r.error = err;
            return r;
        }
    }
    ParseResult r;
    r.equation = std::move(eq);
    return r;
}

ParseResult parse_expression(const std::string& text) {
    auto seq = symbols_from_string(text);
    if (!seq) return fail(ParseErrorKind::ForeignSymbol);
    return parse_expression(*seq);
}

std::string eval_equation(const std::string& x, const std::string& y,
                          const OperationTable& table) {
    if (x.empty() || y.empty()) {
        throw std::invalid_argument("eval_equation: empty operand");
    }
    for (const std::string* s : {&x, &y}) {
        for (char c : *s) {
            if (c != '0' && c != '1') {
                throw std::invalid_argument("eval_equation: non-bit character");
            }
        }
    }

    const std::size_t n = std::max(x.size(), y.size());
    std::string out(n, '0');
    int carry = 0;
    for (std::size_t i = 0; i < n; ++i) {
        // i-th position from the right; missing digits read as 0.
        int a = i < x.size() ? x[x.size() - 1 - i] - '0' : 0;
        int b = i < y.size() ? y[y.size() - 1 - i] - '0' : 0;
        AdderOut o = table.apply(a, b, carry);
        out[n - 1 - i] = static_cast<char>('0' + o.sum);
        carry = o.carry;
    }
    if (carry) out.insert(out.begin(), '1');

    std::size_t first = out.find_first_not_of('0');
    if (first == std::string::npos) return "0";
    return out.substr(first);
}

} // namespace chatabl
