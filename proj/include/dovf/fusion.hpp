#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dovf/feature_store.hpp"

namespace dovf {

/// Spatial : temporal late-fusion weights.
inline constexpr double kSpatialWeight = 1.0;
inline constexpr double kTemporalWeight = 1.5;

struct WeightedScores {
    const ScoreMatrix* scores = nullptr;
    double weight = 1.0;
};

/**
 * sum_i w_i * S_i without renormalisation. Inputs must share video order and
 * class count (IntegrityError otherwise); weights must be >= 0 and not all 0.
 */
ScoreMatrix fuse(const std::vector<WeightedScores>& inputs);

/// Rescales each row to [0, 1]; constant rows become all zeros.
ScoreMatrix normalize_rows_minmax(const ScoreMatrix& scores);

/**
 * Reorders externally produced scores to the test order of `split` and, when
 * the CSV header names the manifest classes, to the manifest class order.
 * Missing videos raise IntegrityError listing their ids.
 */
ScoreMatrix align_external(const ScoreMatrix& scores, const Manifest& manifest, const std::string& split);

/// Index of the row maximum, ties to the lowest index.
std::size_t argmax_row(const ScoreMatrix& scores, std::size_t row);

/// Fraction of the split's test videos whose argmax equals the true label.
double accuracy(const ScoreMatrix& scores, const Manifest& manifest, const std::string& split);

double mean_over_splits(const std::vector<double>& accuracies);

}  // namespace dovf
