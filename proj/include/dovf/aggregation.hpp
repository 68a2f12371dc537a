#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dovf/feature_store.hpp"
#include "dovf/types.hpp"

namespace dovf {

enum class AggregationMethod { mean, max, mean_std, bow, vlad, fv };

AggregationMethod parse_method(const std::string& text);
std::string to_string(AggregationMethod method);
/// True for bow / vlad / fv, which need a trained codebook.
bool is_encoder(AggregationMethod method);

/// Fixed-length video descriptor plus where it came from.
struct GlobalFeature {
    Vector data;
    AggregationMethod method = AggregationMethod::max;
    std::size_t segments = 1;
    std::string video_id;
    Stream stream = Stream::spatial;
    std::string feature_set;
};

using Pooler = std::function<Vector(const FeatureMatrix&)>;

Vector pool_mean(const FeatureMatrix& seq);
Vector pool_max(const FeatureMatrix& seq);
/// Mean followed by the population standard deviation of each dimension.
Vector pool_mean_std(const FeatureMatrix& seq);

struct Span {
    std::size_t start = 0;
    std::size_t length = 0;
    friend bool operator==(const Span&, const Span&) = default;
};

/**
 * Splits n rows into s contiguous spans. The first and last spans get
 * floor(n/s) rows each and the middle absorbs the remainder: for s = 3 and
 * n = 25 that is 8/9/8. With more than three segments every inner span gets
 * floor(n/s) and the remainder is spread over the inner spans from the centre
 * outward.
 */
std::vector<Span> segment_bounds(std::size_t n, std::size_t s);

/// Pools each temporal segment separately and concatenates in temporal order.
Vector aggregate_segmented(const FeatureMatrix& seq, std::size_t segments, const Pooler& pooler);

}  // namespace dovf
