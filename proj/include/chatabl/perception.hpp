#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "chatabl/dataset.hpp"
#include "chatabl/glyph.hpp"
#include "chatabl/symbol.hpp"

namespace chatabl {

using ProbRow = std::array<double, kAlphabetSize>;

// Per-position probability matrix over the alphabet plus the argmax
// reading. Rows sum to 1; argmax ties break toward the lowest symbol index.
struct PseudoLabel {
    std::vector<ProbRow> probs;
    SymbolSeq argmax_symbols;
    std::vector<double> confidences;

    std::size_t size() const { return probs.size(); }
    double mean_confidence() const;
};

struct Embedding {
    std::vector<double> values;
    std::string pooling = "mean";
};

// 784 -> hidden(tanh) -> 4(softmax), double precision, plain full-batch
// gradient descent. Parameters live in one flat vector (W1, b1, W2, b2) so
// checkpoints and finite-difference probing can address them by index.
class PerceptionModel {
public:
    static constexpr int kInput = GlyphImage::kPixels;
    static constexpr int kOutput = kAlphabetSize;

    explicit PerceptionModel(int hidden_width = 64);
    static PerceptionModel random_init(std::uint64_t seed, int hidden_width = 64);

    int hidden_width() const { return hidden_; }
    std::uint64_t init_seed() const { return init_seed_; }
    std::size_t param_count() const { return params_.size(); }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    // Flat layout offsets.
    std::size_t w1_at(int j, int i) const { return static_cast<std::size_t>(j) * kInput + i; }
    std::size_t b1_at(int j) const { return static_cast<std::size_t>(hidden_) * kInput + j; }
    std::size_t w2_at(int k, int j) const {
        return static_cast<std::size_t>(hidden_) * (kInput + 1) + static_cast<std::size_t>(k) * hidden_ + j;
    }
    std::size_t b2_at(int k) const {
        return static_cast<std::size_t>(hidden_) * (kInput + 1) + static_cast<std::size_t>(kOutput) * hidden_ + k;
    }

    // Fills `hidden_out` (size hidden_width) with tanh activations and
    // returns the softmax row.
    ProbRow forward_with_hidden(const GlyphImage& image, std::span<double> hidden_out) const;

private:
    int hidden_;
    std::uint64_t init_seed_ = 0;
    std::vector<double> params_;
};

// Hard symbol or a soft probability row.
using Target = std::variant<Symbol, ProbRow>;

struct TrainExample {
    const GlyphImage* image;
    Target target;
};

struct TrainingDiverged : std::runtime_error {
    double loss;
    explicit TrainingDiverged(double loss_value)
        : std::runtime_error("training diverged: non-finite loss " + std::to_string(loss_value)),
          loss(loss_value) {}
};

// Softmax-normalized probability row; deterministic given parameters.
ProbRow forward(const PerceptionModel& model, const GlyphImage& image);

// Row i is forward() on glyph i. Throws std::invalid_argument on an empty
// sample.
PseudoLabel classify_sequence(const PerceptionModel& model, const EquationSample& sample);

// Mean cross-entropy of the batch and its gradient; building block for
// train_step and the two-term loop update.
double batch_gradient(const PerceptionModel& model, std::span<const TrainExample> batch,
                      std::vector<double>& grad_out);

// One full-gradient descent step; returns the mean cross-entropy before
// the update. Throws TrainingDiverged when the loss is not finite.
double train_step(PerceptionModel& model, std::span<const TrainExample> batch, double lr);

// Max over probed parameters of |g_analytic - g_fd| / max(|g_fd|, 1e-8),
// with central differences of step 1e-4.
double grad_check(const PerceptionModel& model, std::span<const TrainExample> batch,
                  int max_probes = 200, std::uint64_t seed = 1234);
double grad_check(const PerceptionModel& model, std::span<const TrainExample> batch,
                  std::span<const std::size_t> param_indices);

// Mean of hidden activations across glyph positions.
Embedding embed(const PerceptionModel& model, const EquationSample& sample);

// Versioned binary checkpoint (header + little-endian f64 payload);
// round-trips bit-exactly.
void save_checkpoint(const PerceptionModel& model, const std::string& path);
PerceptionModel load_checkpoint(const std::string& path);

} // namespace chatabl
