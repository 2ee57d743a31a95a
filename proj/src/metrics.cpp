#include "chatabl/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace chatabl {

Metrics compute_metrics(const std::vector<bool>& predicted, const std::vector<bool>& truth) {
    if (predicted.empty() || predicted.size() != truth.size()) {
        throw std::invalid_argument("compute_metrics: empty or mismatched inputs");
    }
    double tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] && truth[i]) ++tp;
        else if (predicted[i] && !truth[i]) ++fp;
        else if (!predicted[i] && truth[i]) ++fn;
        else ++tn;
    }
    Metrics m;
    m.accuracy = (tp + tn) / static_cast<double>(predicted.size());
    m.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    m.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

double auc(const std::vector<double>& scores, const std::vector<bool>& truth) {
    if (scores.size() != truth.size() || scores.empty()) {
        throw std::invalid_argument("auc: empty or mismatched inputs");
    }
    std::size_t n_pos = 0;
    for (bool t : truth) n_pos += t ? 1 : 0;
    const std::size_t n_neg = truth.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw std::invalid_argument("auc: both classes must be present");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Midranks over tie groups; AUC from the rank-sum of positives.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        double midrank = 0.5 * static_cast<double>(i + 1 + j); // average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (truth[order[k]]) rank_sum_pos += midrank;
        }
        i = j;
    }
    double n_pos_d = static_cast<double>(n_pos);
    return (rank_sum_pos - n_pos_d * (n_pos_d + 1.0) / 2.0) /
           (n_pos_d * static_cast<double>(n_neg));
}

} // namespace chatabl
