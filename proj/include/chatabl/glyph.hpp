#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "chatabl/symbol.hpp"

namespace chatabl {

// 28x28 grayscale bitmap. Pixels are stored quantized to 8 bits so that the
// in-memory value and the on-disk glyphs.bin value are always identical;
// intensity(i) is exactly byte/255 and therefore lies in [0, 1].
struct GlyphImage {
    static constexpr int kSide = 28;
    static constexpr int kPixels = kSide * kSide;

    std::array<std::uint8_t, kPixels> bytes{};

    double at(int idx) const { return bytes[static_cast<std::size_t>(idx)] / 255.0; }
    double at(int row, int col) const { return at(row * kSide + col); }

    bool operator==(const GlyphImage&) const = default;
};

// Rendering jitter knobs. `zero()` gives the canonical noiseless bitmap of
// each symbol; the default adds mild per-seed variation.
struct GlyphStyle {
    double offset_jitter = 1.6;  // max |dx|,|dy| of the stroke skeleton, px
    double thickness = 1.9;      // base stroke half-width, px
    double thickness_jitter = 0.45;
    double noise = 0.12;         // additive uniform pixel noise amplitude

    static GlyphStyle zero() { return GlyphStyle{0.0, 1.9, 0.0, 0.0}; }
    static GlyphStyle with_noise(double level) {
        GlyphStyle s;
        s.offset_jitter = 1.6 * level / 0.12;
        s.thickness_jitter = 0.45 * level / 0.12;
        s.noise = level;
        return s;
    }
};

// Procedural bitmap of the symbol with seeded jitter; deterministic in
// (symbol, rng_seed, style).
GlyphImage render_glyph(Symbol symbol, std::uint64_t rng_seed);
GlyphImage render_glyph(Symbol symbol, std::uint64_t rng_seed, const GlyphStyle& style);

// External glyph images keyed by symbol class.
using GlyphPool = std::map<Symbol, std::vector<GlyphImage>>;

// Loads a JSONL manifest of records {class: "0"|"1"|"+"|"=", path, format:
// "pgm"|"raw784"}; paths are resolved relative to the manifest file.
// Throws std::runtime_error on a missing class, malformed record, or
// unreadable blob.
GlyphPool ingest_glyphs(const std::string& manifest_path);

} // namespace chatabl
