#pragma once

#include <vector>

namespace chatabl {

// Binary classification metrics with "correct equation" as the positive
// class. f1 = 2PR/(P+R) when P+R > 0, else 0; precision/recall fall back
// to 0 on an empty denominator.
struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
};

// Fills everything but auc. Throws std::invalid_argument on empty or
// mismatched inputs.
Metrics compute_metrics(const std::vector<bool>& predicted, const std::vector<bool>& truth);

// Mann-Whitney rank statistic with tie correction:
// P(score_pos > score_neg) + 0.5 * P(tie). Throws std::invalid_argument
// unless both classes are present.
double auc(const std::vector<double>& scores, const std::vector<bool>& truth);

} // namespace chatabl
