#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chatabl/glyph.hpp"
#include "chatabl/op_table.hpp"
#include "chatabl/symbol.hpp"

namespace chatabl {

// One equation as seen by a learner: a sequence of glyph images, with the
// ground-truth symbols and veracity present only for labeled samples.
struct EquationSample {
    std::vector<GlyphImage> glyphs;
    std::optional<SymbolSeq> truth_symbols;
    std::optional<bool> veracity;

    std::size_t length() const { return glyphs.size(); }
};

struct GenConfig {
    int min_length = 5;
    int max_length = 10;
    int count_per_length = 500;
    double positive_fraction = 0.5;
    double labeled_fraction = 0.2;
    std::uint16_t table_code;          // the hidden arithmetic rule
    double glyph_noise = 0.12;         // 0 renders canonical bitmaps
    const GlyphPool* glyph_pool = nullptr;  // optional external glyphs

    GenConfig();
};

// Ground truth for one unlabeled sample, kept generator-private for
// reporting; never written to the learner-facing manifest.
struct HiddenTruth {
    SymbolSeq symbols;
    bool veracity;
};

struct Dataset {
    std::vector<EquationSample> labeled;
    std::vector<EquationSample> unlabeled;
    // Parallel to `unlabeled`; evaluation-only, like hidden_table.
    std::vector<HiddenTruth> unlabeled_truth;
    OperationTable hidden_table;
    std::uint64_t seed = 0;

    std::size_t size() const { return labeled.size() + unlabeled.size(); }
};

// Deterministic in (config, seed). A veracity=true sample satisfies
// z == eval_equation(x, y, hidden_table); a false sample corrupts z of a
// true equation until it is legal and unequal. Throws std::invalid_argument
// on infeasible lengths or invalid fractions.
Dataset generate_dataset(const GenConfig& config, std::uint64_t seed);

// On-disk layout: <dir>/manifest.jsonl + <dir>/glyphs.bin. Manifest rows
// carry id, length, split, veracity?/symbols? (labeled only) and byte
// offsets into glyphs.bin (784-byte row-major grayscale blocks).
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

} // namespace chatabl
