#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dovf/feature_store.hpp"

namespace dovf {

/// Number of local features to keep per video; nullopt means dense (keep all).
using SampleCount = std::optional<std::size_t>;

/// Parses "25" or "dense".
SampleCount parse_sample_count(const std::string& text);
std::string to_string(const SampleCount& count);

/**
 * Center-of-bin indices floor((i + 0.5) * N / n), i = 0..n-1. When n > N
 * indices repeat, so short videos still yield n samples.
 */
std::vector<std::size_t> even_sample_indices(std::size_t source_length, std::size_t n);

FeatureMatrix sample_evenly(const FeatureMatrix& seq, std::size_t n);

/// The "every frame" plan: returns the sequence unchanged.
FeatureMatrix dense_plan(const FeatureMatrix& seq);

FeatureMatrix apply_sampling(const FeatureMatrix& seq, const SampleCount& count);

}  // namespace dovf
