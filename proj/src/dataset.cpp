#include "chatabl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "chatabl/equation.hpp"
#include "chatabl/rng.hpp"

namespace chatabl {

GenConfig::GenConfig() : table_code(make_standard_table().code()) {}

namespace {

constexpr int kMinEquationLength = 5;   // "a+b=c"
constexpr int kMaxEquationLength = 26;
constexpr int kMaxSampleAttempts = 20000;

struct RawSample {
    SymbolSeq symbols;
    bool veracity;
};

std::string sample_bitstring(Rng& rng, int len) {
    std::string s(static_cast<std::size_t>(len), '0');
    s[0] = len == 1 ? static_cast<char>('0' + rng.below(2)) : '1';
    for (int i = 1; i < len; ++i) s[static_cast<std::size_t>(i)] = static_cast<char>('0' + rng.below(2));
    return s;
}

// A positive equation whose total symbol count (digits plus the two
// operators) is exactly `length`. Rejection-sampled; the z length is not
// controllable a priori because it depends on the hidden table.
ParsedEquation sample_true_equation(Rng& rng, int length, const OperationTable& table) {
    const int digits = length - 2;
    for (int attempt = 0; attempt < kMaxSampleAttempts; ++attempt) {
        int xlen = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(digits - 2)));
        int ylen = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(digits - 1 - xlen)));
        int zlen = digits - xlen - ylen;
        ParsedEquation eq;
        eq.x = sample_bitstring(rng, xlen);
        eq.y = sample_bitstring(rng, ylen);
        eq.z = eval_equation(eq.x, eq.y, table);
        if (static_cast<int>(eq.z.size()) == zlen) return eq;
    }
    throw std::invalid_argument("generate_dataset: no equation of total length " +
                                std::to_string(length) + " under this table");
}

// Corrupts z in place: flip 1-2 digits or resample an equal-length legal
// string, until the result is legal and differs from the original.
std::string corrupt_z(Rng& rng, const std::string& z_true) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::string z = z_true;
        if (z.size() > 1 && rng.coin(0.5)) {
            int flips = 1 + static_cast<int>(rng.below(2));
            for (int f = 0; f < flips; ++f) {
                std::size_t pos = rng.below(z.size());
                z[pos] = z[pos] == '0' ? '1' : '0';
            }
        } else {
            z = sample_bitstring(rng, static_cast<int>(z.size()));
        }
        if (z != z_true && is_legal_bitstring(z)) return z;
    }
    throw std::logic_error("corrupt_z: exhausted attempts");
}

void validate(const GenConfig& config) {
    if (config.min_length < kMinEquationLength) {
        throw std::invalid_argument("generate_dataset: min_length below " +
                                    std::to_string(kMinEquationLength));
    }
    if (config.max_length > kMaxEquationLength || config.max_length < config.min_length) {
        throw std::invalid_argument("generate_dataset: bad length range");
    }
    if (config.count_per_length <= 0) {
        throw std::invalid_argument("generate_dataset: count_per_length must be positive");
    }
    if (config.positive_fraction < 0.0 || config.positive_fraction > 1.0 ||
        config.labeled_fraction < 0.0 || config.labeled_fraction > 1.0) {
        throw std::invalid_argument("generate_dataset: fractions must lie in [0, 1]");
    }
}

std::vector<GlyphImage> render_sample_glyphs(const GenConfig& config, std::uint64_t seed,
                                             std::size_t sample_index, const SymbolSeq& symbols) {
    const GlyphStyle style = config.glyph_noise > 0.0 ? GlyphStyle::with_noise(config.glyph_noise)
                                                      : GlyphStyle::zero();
    std::vector<GlyphImage> glyphs;
    glyphs.reserve(symbols.size());
    for (std::size_t p = 0; p < symbols.size(); ++p) {
        std::uint64_t gseed = mix_seed(seed, sample_index, p);
        if (config.glyph_pool) {
            const auto& images = config.glyph_pool->at(symbols[p]);
            glyphs.push_back(images[Rng(gseed).below(images.size())]);
        } else {
            glyphs.push_back(render_glyph(symbols[p], gseed, style));
        }
    }
    return glyphs;
}

} // namespace

Dataset generate_dataset(const GenConfig& config, std::uint64_t seed) {
    validate(config);
    const OperationTable table = OperationTable::from_code(config.table_code);
    Rng rng(mix_seed(seed, 0xda7a5e7));

    std::vector<RawSample> raw;
    for (int length = config.min_length; length <= config.max_length; ++length) {
        for (int i = 0; i < config.count_per_length; ++i) {
            bool positive = rng.coin(config.positive_fraction);
            ParsedEquation eq = sample_true_equation(rng, length, table);
            if (!positive) eq.z = corrupt_z(rng, eq.z);
            raw.push_back(RawSample{eq.to_symbols(), positive});
        }
    }

    // Deterministic Fisher-Yates; the first n_labeled shuffled samples
    // become the labeled split.
    std::vector<std::size_t> order(raw.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }
    const auto n_labeled =
        static_cast<std::size_t>(std::llround(config.labeled_fraction * static_cast<double>(raw.size())));

    std::vector<bool> is_labeled(raw.size(), false);
    for (std::size_t i = 0; i < n_labeled && i < order.size(); ++i) is_labeled[order[i]] = true;

    Dataset ds;
    ds.hidden_table = table;
    ds.seed = seed;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        EquationSample sample;
        sample.glyphs = render_sample_glyphs(config, seed, i, raw[i].symbols);
        if (is_labeled[i]) {
            sample.truth_symbols = raw[i].symbols;
            sample.veracity = raw[i].veracity;
            ds.labeled.push_back(std::move(sample));
        } else {
            ds.unlabeled.push_back(std::move(sample));
            ds.unlabeled_truth.push_back(HiddenTruth{raw[i].symbols, raw[i].veracity});
        }
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir + "/manifest.jsonl");
    std::ofstream blobs(dir + "/glyphs.bin", std::ios::binary);
    if (!manifest || !blobs) throw std::runtime_error("save_dataset: cannot write to " + dir);

    std::uint64_t offset = 0;
    std::uint64_t id = 0;
    auto write_sample = [&](const EquationSample& s, const char* split) {
        nlohmann::json row;
        row["id"] = id++;
        row["length"] = s.glyphs.size();
        row["split"] = split;
        if (s.veracity) row["veracity"] = *s.veracity;
        if (s.truth_symbols) row["symbols"] = symbols_to_string(*s.truth_symbols);
        row["glyph_offset"] = offset;
        row["glyph_count"] = s.glyphs.size();
        manifest << row.dump() << "\n";
        for (const GlyphImage& g : s.glyphs) {
            blobs.write(reinterpret_cast<const char*>(g.bytes.data()), GlyphImage::kPixels);
            offset += GlyphImage::kPixels;
        }
    };
    for (const auto& s : ds.labeled) write_sample(s, "labeled");
    for (const auto& s : ds.unlabeled) write_sample(s, "unlabeled");
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream manifest(dir + "/manifest.jsonl");
    std::ifstream blobs(dir + "/glyphs.bin", std::ios::binary);
    if (!manifest || !blobs) throw std::runtime_error("load_dataset: cannot read " + dir);

    Dataset ds;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        nlohmann::json row = nlohmann::json::parse(line);
        EquationSample sample;
        auto count = row.at("glyph_count").get<std::uint64_t>();
        auto offset = row.at("glyph_offset").get<std::uint64_t>();
        blobs.seekg(static_cast<std::streamoff>(offset));
        for (std::uint64_t g = 0; g < count; ++g) {
            GlyphImage img;
            blobs.read(reinterpret_cast<char*>(img.bytes.data()), GlyphImage::kPixels);
            if (blobs.gcount() != GlyphImage::kPixels) {
                throw std::runtime_error("load_dataset: truncated glyphs.bin");
            }
            sample.glyphs.push_back(img);
        }
        if (row.contains("symbols")) {
            auto seq = symbols_from_string(row["symbols"].get<std::string>());
            if (!seq) throw std::runtime_error("load_dataset: bad symbols field");
            sample.truth_symbols = *seq;
        }
        if (row.contains("veracity")) sample.veracity = row["veracity"].get<bool>();
        if (row.at("split").get<std::string>() == "labeled") {
            ds.labeled.push_back(std::move(sample));
        } else {
            ds.unlabeled.push_back(std::move(sample));
        }
    }
    return ds;
}

} // namespace chatabl
