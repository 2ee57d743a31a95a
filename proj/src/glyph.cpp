#include "chatabl/glyph.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "chatabl/rng.hpp"

namespace chatabl {

namespace {

constexpr int kSide = GlyphImage::kSide;

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// Distance from point p to segment [a, b].
double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    double vx = bx - ax, vy = by - ay;
    double wx = px - ax, wy = py - ay;
    double vv = vx * vx + vy * vy;
    double t = vv > 0 ? std::min(1.0, std::max(0.0, (wx * vx + wy * vy) / vv)) : 0.0;
    double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

struct Stroke {
    double ax, ay, bx, by;
};

// Skeletons live on a 28x28 canvas centered at (13.5, 13.5).
void symbol_strokes(Symbol s, std::vector<Stroke>& segs, bool& ring, double& ring_rx, double& ring_ry) {
    ring = false;
    const double cx = 13.5, cy = 13.5;
    switch (s) {
        case Symbol::Zero:
            ring = true;
            ring_rx = 6.0;
            ring_ry = 8.5;
            break;
        case Symbol::One:
            segs.push_back({cx, cy - 9.0, cx, cy + 9.0});
            segs.push_back({cx - 4.0, cy - 5.5, cx, cy - 9.0});
            break;
        case Symbol::Plus:
            segs.push_back({cx - 7.5, cy, cx + 7.5, cy});
            segs.push_back({cx, cy - 7.5, cx, cy + 7.5});
            break;
        case Symbol::Equals:
            segs.push_back({cx - 7.5, cy - 3.5, cx + 7.5, cy - 3.5});
            segs.push_back({cx - 7.5, cy + 3.5, cx + 7.5, cy + 3.5});
            break;
    }
}

// Radial distance to an axis-aligned ellipse outline: the ray from the
// center through p hits the ellipse at r/f, so the gap is r|1 - 1/f|.
double ring_distance(double px, double py, double cx, double cy, double rx, double ry) {
    double dx = px - cx, dy = py - cy;
    double r = std::sqrt(dx * dx + dy * dy);
    if (r < 1e-9) return std::min(rx, ry);
    double f = std::sqrt((dx * dx) / (rx * rx) + (dy * dy) / (ry * ry));
    return std::abs(r * (1.0 - 1.0 / f));
}

} // namespace

GlyphImage render_glyph(Symbol symbol, std::uint64_t rng_seed) {
    return render_glyph(symbol, rng_seed, GlyphStyle{});
}

GlyphImage render_glyph(Symbol symbol, std::uint64_t rng_seed, const GlyphStyle& style) {
    Rng rng(mix_seed(rng_seed, static_cast<std::uint64_t>(symbol) + 17));

    double dx = style.offset_jitter > 0 ? rng.real(-style.offset_jitter, style.offset_jitter) : 0.0;
    double dy = style.offset_jitter > 0 ? rng.real(-style.offset_jitter, style.offset_jitter) : 0.0;
    double thick = style.thickness;
    if (style.thickness_jitter > 0) {
        thick += rng.real(-style.thickness_jitter, style.thickness_jitter);
    }
    thick = std::max(0.8, thick);

    std::vector<Stroke> segs;
    bool ring = false;
    double ring_rx = 0, ring_ry = 0;
    symbol_strokes(symbol, segs, ring, ring_rx, ring_ry);

    GlyphImage img;
    const double soft = 1.0;
    for (int row = 0; row < kSide; ++row) {
        for (int col = 0; col < kSide; ++col) {
            double px = col + 0.5 - dx;
            double py = row + 0.5 - dy;
            double d = 1e9;
            if (ring) {
                d = std::min(d, ring_distance(px, py, 13.5, 13.5, ring_rx, ring_ry));
            }
            for (const Stroke& s : segs) {
                d = std::min(d, segment_distance(px, py, s.ax, s.ay, s.bx, s.by));
            }
            double ink = clamp01(1.0 - (d - thick) / soft);
            if (style.noise > 0) {
                ink += rng.real(-style.noise, style.noise);
            }
            img.bytes[static_cast<std::size_t>(row * kSide + col)] =
                static_cast<std::uint8_t>(std::lround(clamp01(ink) * 255.0));
        }
    }
    return img;
}

namespace {

GlyphImage from_gray(const std::vector<double>& gray, int w, int h) {
    GlyphImage img;
    if (w == kSide && h == kSide) {
        for (int i = 0; i < GlyphImage::kPixels; ++i) {
            img.bytes[static_cast<std::size_t>(i)] =
                static_cast<std::uint8_t>(std::lround(clamp01(gray[static_cast<std::size_t>(i)]) * 255.0));
        }
        return img;
    }
    // Bilinear resample to 28x28.
    for (int row = 0; row < kSide; ++row) {
        for (int col = 0; col < kSide; ++col) {
            double sy = (row + 0.5) * h / kSide - 0.5;
            double sx = (col + 0.5) * w / kSide - 0.5;
            int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, h - 1);
            int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, w - 1);
            int y1 = std::min(y0 + 1, h - 1);
            int x1 = std::min(x0 + 1, w - 1);
            double fy = std::clamp(sy - y0, 0.0, 1.0);
            double fx = std::clamp(sx - x0, 0.0, 1.0);
            double v = gray[static_cast<std::size_t>(y0 * w + x0)] * (1 - fy) * (1 - fx) +
                       gray[static_cast<std::size_t>(y0 * w + x1)] * (1 - fy) * fx +
                       gray[static_cast<std::size_t>(y1 * w + x0)] * fy * (1 - fx) +
                       gray[static_cast<std::size_t>(y1 * w + x1)] * fy * fx;
            img.bytes[static_cast<std::size_t>(row * kSide + col)] =
                static_cast<std::uint8_t>(std::lround(clamp01(v) * 255.0));
        }
    }
    return img;
}

GlyphImage load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("ingest_glyphs: unreadable blob: " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw std::runtime_error("ingest_glyphs: not a binary PGM: " + path);
    int w = 0, h = 0, maxval = 0;
    auto next_int = [&](int& out) {
        // Skip whitespace and '#' comment lines.
        while (true) {
            int c = in.peek();
            if (c == '#') {
                std::string line;
                std::getline(in, line);
            } else if (std::isspace(c)) {
                in.get();
            } else {
                break;
            }
        }
        if (!(in >> out)) throw std::runtime_error("ingest_glyphs: truncated PGM header: " + path);
    };
    next_int(w);
    next_int(h);
    next_int(maxval);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
        throw std::runtime_error("ingest_glyphs: unsupported PGM geometry: " + path);
    }
    in.get(); // single whitespace after maxval
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
        throw std::runtime_error("ingest_glyphs: truncated PGM payload: " + path);
    }
    std::vector<double> gray(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) gray[i] = raw[i] / static_cast<double>(maxval);
    return from_gray(gray, w, h);
}

GlyphImage load_raw784(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("ingest_glyphs: unreadable blob: " + path);
    GlyphImage img;
    in.read(reinterpret_cast<char*>(img.bytes.data()), GlyphImage::kPixels);
    if (in.gcount() != GlyphImage::kPixels) {
        throw std::runtime_error("ingest_glyphs: blob is not 784 bytes: " + path);
    }
    return img;
}

} // namespace

GlyphPool ingest_glyphs(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("ingest_glyphs: cannot open manifest: " + manifest_path);
    const auto base = std::filesystem::path(manifest_path).parent_path();

    GlyphPool pool;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            throw std::runtime_error("ingest_glyphs: malformed record at line " + std::to_string(lineno));
        }
        if (!rec.contains("class") || !rec.contains("path") || !rec.contains("format")) {
            throw std::runtime_error("ingest_glyphs: malformed record at line " + std::to_string(lineno));
        }
        std::string cls = rec["class"].get<std::string>();
        auto sym = cls.size() == 1 ? symbol_from_char(cls[0]) : std::nullopt;
        if (!sym) {
            throw std::runtime_error("ingest_glyphs: unknown class '" + cls + "' at line " +
                                     std::to_string(lineno));
        }
        std::string path = (base / rec["path"].get<std::string>()).string();
        std::string format = rec["format"].get<std::string>();
        GlyphImage img;
        if (format == "pgm") {
            img = load_pgm(path);
        } else if (format == "raw784") {
            img = load_raw784(path);
        } else {
            throw std::runtime_error("ingest_glyphs: unknown format '" + format + "' at line " +
                                     std::to_string(lineno));
        }
        pool[*sym].push_back(img);
    }

    for (Symbol s : {Symbol::Zero, Symbol::One, Symbol::Plus, Symbol::Equals}) {
        if (pool[s].empty()) {
            throw std::runtime_error(std::string("ingest_glyphs: missing class '") + symbol_char(s) + "'");
        }
    }
    return pool;
}

} // namespace chatabl
