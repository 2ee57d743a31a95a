#include "chatabl/perception.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "chatabl/rng.hpp"

namespace chatabl {

double PseudoLabel::mean_confidence() const {
    if (confidences.empty()) return 0.0;
    double sum = 0.0;
    for (double c : confidences) sum += c;
    return sum / static_cast<double>(confidences.size());
}

PerceptionModel::PerceptionModel(int hidden_width) : hidden_(hidden_width) {
    params_.assign(static_cast<std::size_t>(hidden_) * (kInput + 1) +
                       static_cast<std::size_t>(kOutput) * (hidden_ + 1),
                   0.0);
}

PerceptionModel PerceptionModel::random_init(std::uint64_t seed, int hidden_width) {
    PerceptionModel m(hidden_width);
    m.init_seed_ = seed;
    Rng rng(mix_seed(seed, 0x1417));
    const double s1 = 1.0 / std::sqrt(static_cast<double>(kInput));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_width));
    for (int j = 0; j < hidden_width; ++j) {
        for (int i = 0; i < kInput; ++i) m.params_[m.w1_at(j, i)] = rng.real(-s1, s1);
    }
    for (int j = 0; j < hidden_width; ++j) m.params_[m.b1_at(j)] = rng.real(-s1, s1);
    for (int k = 0; k < kOutput; ++k) {
        for (int j = 0; j < hidden_width; ++j) m.params_[m.w2_at(k, j)] = rng.real(-s2, s2);
    }
    for (int k = 0; k < kOutput; ++k) m.params_[m.b2_at(k)] = rng.real(-s2, s2);
    return m;
}

namespace {

ProbRow softmax(const std::array<double, PerceptionModel::kOutput>& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    ProbRow p{};
    double sum = 0.0;
    for (int k = 0; k < PerceptionModel::kOutput; ++k) {
        p[static_cast<std::size_t>(k)] = std::exp(logits[static_cast<std::size_t>(k)] - mx);
        sum += p[static_cast<std::size_t>(k)];
    }
    for (double& v : p) v /= sum;
    return p;
}

ProbRow target_row(const Target& t) {
    if (const auto* sym = std::get_if<Symbol>(&t)) {
        ProbRow row{};
        row[static_cast<std::size_t>(*sym)] = 1.0;
        return row;
    }
    return std::get<ProbRow>(t);
}

// Nonzero pixels of a glyph; most of the canvas is exact zero, so both the
// input matvec and the W1 gradient skip it.
void nonzero_pixels(const GlyphImage& img, std::vector<std::pair<int, double>>& out) {
    out.clear();
    for (int i = 0; i < GlyphImage::kPixels; ++i) {
        if (img.bytes[static_cast<std::size_t>(i)] != 0) {
            out.emplace_back(i, img.bytes[static_cast<std::size_t>(i)] / 255.0);
        }
    }
}

} // namespace

ProbRow PerceptionModel::forward_with_hidden(const GlyphImage& image,
                                             std::span<double> hidden_out) const {
    std::vector<std::pair<int, double>> px;
    nonzero_pixels(image, px);
    for (int j = 0; j < hidden_; ++j) {
        const double* w = params_.data() + w1_at(j, 0);
        double acc = params_[b1_at(j)];
        for (const auto& [i, v] : px) acc += w[i] * v;
        hidden_out[static_cast<std::size_t>(j)] = std::tanh(acc);
    }
    std::array<double, kOutput> logits{};
    for (int k = 0; k < kOutput; ++k) {
        const double* w = params_.data() + w2_at(k, 0);
        double acc = params_[b2_at(k)];
        for (int j = 0; j < hidden_; ++j) acc += w[j] * hidden_out[static_cast<std::size_t>(j)];
        logits[static_cast<std::size_t>(k)] = acc;
    }
    return softmax(logits);
}

ProbRow forward(const PerceptionModel& model, const GlyphImage& image) {
    std::vector<double> hidden(static_cast<std::size_t>(model.hidden_width()));
    return model.forward_with_hidden(image, hidden);
}

PseudoLabel classify_sequence(const PerceptionModel& model, const EquationSample& sample) {
    if (sample.glyphs.empty()) {
        throw std::invalid_argument("classify_sequence: empty sample");
    }
    PseudoLabel label;
    label.probs.reserve(sample.glyphs.size());
    std::vector<double> hidden(static_cast<std::size_t>(model.hidden_width()));
    for (const GlyphImage& g : sample.glyphs) {
        ProbRow row = model.forward_with_hidden(g, hidden);
        int best = 0;
        for (int k = 1; k < kAlphabetSize; ++k) {
            if (row[static_cast<std::size_t>(k)] > row[static_cast<std::size_t>(best)]) best = k;
        }
        label.argmax_symbols.push_back(static_cast<Symbol>(best));
        label.confidences.push_back(row[static_cast<std::size_t>(best)]);
        label.probs.push_back(row);
    }
    return label;
}

double batch_gradient(const PerceptionModel& model, std::span<const TrainExample> batch,
                      std::vector<double>& grad_out) {
    if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
    const int hidden = model.hidden_width();
    const auto& params = model.params();
    grad_out.assign(params.size(), 0.0);

    std::vector<double> h(static_cast<std::size_t>(hidden));
    std::vector<double> dz1(static_cast<std::size_t>(hidden));
    std::vector<std::pair<int, double>> px;

    double loss_sum = 0.0;
    for (const TrainExample& ex : batch) {
        ProbRow p = model.forward_with_hidden(*ex.image, h);
        ProbRow t = target_row(ex.target);

        double loss = 0.0;
        for (int k = 0; k < PerceptionModel::kOutput; ++k) {
            if (t[static_cast<std::size_t>(k)] > 0.0) {
                loss -= t[static_cast<std::size_t>(k)] * std::log(p[static_cast<std::size_t>(k)]);
            }
        }
        loss_sum += loss;

        ProbRow dz2{};
        for (int k = 0; k < PerceptionModel::kOutput; ++k) {
            dz2[static_cast<std::size_t>(k)] = p[static_cast<std::size_t>(k)] - t[static_cast<std::size_t>(k)];
        }
        for (int k = 0; k < PerceptionModel::kOutput; ++k) {
            double d = dz2[static_cast<std::size_t>(k)];
            double* gw2 = grad_out.data() + model.w2_at(k, 0);
            for (int j = 0; j < hidden; ++j) gw2[j] += d * h[static_cast<std::size_t>(j)];
            grad_out[model.b2_at(k)] += d;
        }
        for (int j = 0; j < hidden; ++j) {
            double dh = 0.0;
            for (int k = 0; k < PerceptionModel::kOutput; ++k) {
                dh += params[model.w2_at(k, j)] * dz2[static_cast<std::size_t>(k)];
            }
            double hj = h[static_cast<std::size_t>(j)];
            dz1[static_cast<std::size_t>(j)] = dh * (1.0 - hj * hj);
        }
        nonzero_pixels(*ex.image, px);
        for (int j = 0; j < hidden; ++j) {
            double d = dz1[static_cast<std::size_t>(j)];
            if (d == 0.0) continue;
            double* gw1 = grad_out.data() + model.w1_at(j, 0);
            for (const auto& [i, v] : px) gw1[i] += d * v;
            grad_out[model.b1_at(j)] += d;
        }
    }

    const double inv = 1.0 / static_cast<double>(batch.size());
    for (double& g : grad_out) g *= inv;
    return loss_sum * inv;
}

double train_step(PerceptionModel& model, std::span<const TrainExample> batch, double lr) {
    if (lr <= 0.0) throw std::invalid_argument("train_step: lr must be positive");
    std::vector<double> grad;
    double loss = batch_gradient(model, batch, grad);
    if (!std::isfinite(loss)) throw TrainingDiverged(loss);
    auto& params = model.params();
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
    return loss;
}

namespace {

double batch_loss(const PerceptionModel& model, std::span<const TrainExample> batch) {
    std::vector<double> h(static_cast<std::size_t>(model.hidden_width()));
    double loss_sum = 0.0;
    for (const TrainExample& ex : batch) {
        ProbRow p = model.forward_with_hidden(*ex.image, h);
        ProbRow t = target_row(ex.target);
        for (int k = 0; k < PerceptionModel::kOutput; ++k) {
            if (t[static_cast<std::size_t>(k)] > 0.0) {
                loss_sum -= t[static_cast<std::size_t>(k)] * std::log(p[static_cast<std::size_t>(k)]);
            }
        }
    }
    return loss_sum / static_cast<double>(batch.size());
}

} // namespace

double grad_check(const PerceptionModel& model, std::span<const TrainExample> batch,
                  std::span<const std::size_t> param_indices) {
    constexpr double kStep = 1e-4;
    std::vector<double> grad;
    batch_gradient(model, batch, grad);

    PerceptionModel probe = model;
    double worst = 0.0;
    for (std::size_t idx : param_indices) {
        const double saved = probe.params()[idx];
        probe.params()[idx] = saved + kStep;
        double up = batch_loss(probe, batch);
        probe.params()[idx] = saved - kStep;
        double down = batch_loss(probe, batch);
        probe.params()[idx] = saved;
        double fd = (up - down) / (2.0 * kStep);
        double err = std::abs(grad[idx] - fd) / std::max(std::abs(fd), 1e-8);
        worst = std::max(worst, err);
    }
    return worst;
}

double grad_check(const PerceptionModel& model, std::span<const TrainExample> batch,
                  int max_probes, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x9c));
    std::vector<std::size_t> indices;
    const std::size_t n = model.param_count();
    if (static_cast<std::size_t>(max_probes) >= n) {
        for (std::size_t i = 0; i < n; ++i) indices.push_back(i);
    } else {
        for (int i = 0; i < max_probes; ++i) indices.push_back(rng.below(n));
    }
    return grad_check(model, batch, indices);
}

Embedding embed(const PerceptionModel& model, const EquationSample& sample) {
    if (sample.glyphs.empty()) throw std::invalid_argument("embed: empty sample");
    const int hidden = model.hidden_width();
    Embedding e;
    e.values.assign(static_cast<std::size_t>(hidden), 0.0);
    std::vector<double> h(static_cast<std::size_t>(hidden));
    for (const GlyphImage& g : sample.glyphs) {
        model.forward_with_hidden(g, h);
        for (int j = 0; j < hidden; ++j) e.values[static_cast<std::size_t>(j)] += h[static_cast<std::size_t>(j)];
    }
    const double inv = 1.0 / static_cast<double>(sample.glyphs.size());
    for (double& v : e.values) v *= inv;
    return e;
}

namespace {

constexpr std::uint32_t kMagic = 0x4c424143; // "CABL"
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::ifstream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

} // namespace

void save_checkpoint(const PerceptionModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path);
    put_u32(out, kMagic);
    put_u32(out, kVersion);
    put_u32(out, PerceptionModel::kInput);
    put_u32(out, static_cast<std::uint32_t>(model.hidden_width()));
    put_u32(out, PerceptionModel::kOutput);
    put_u64(out, model.init_seed());
    for (double p : model.params()) {
        std::uint64_t bits;
        std::memcpy(&bits, &p, sizeof bits);
        put_u64(out, bits);
    }
}

PerceptionModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot read " + path);
    if (get_u32(in) != kMagic) throw std::runtime_error("load_checkpoint: bad magic");
    if (get_u32(in) != kVersion) throw std::runtime_error("load_checkpoint: unsupported version");
    std::uint32_t input = get_u32(in);
    std::uint32_t hidden = get_u32(in);
    std::uint32_t output = get_u32(in);
    if (input != PerceptionModel::kInput || output != PerceptionModel::kOutput) {
        throw std::runtime_error("load_checkpoint: incompatible dimensions");
    }
    std::uint64_t seed = get_u64(in);
    PerceptionModel m = PerceptionModel::random_init(seed, static_cast<int>(hidden));
    for (double& p : m.params()) {
        std::uint64_t bits = get_u64(in);
        std::memcpy(&p, &bits, sizeof p);
    }
    if (!in) throw std::runtime_error("load_checkpoint: truncated payload");
    return m;
}

} // namespace chatabl
