#include "dovf/sampling.hpp"

#include "dovf/errors.hpp"
#include "text_util.hpp"

namespace dovf {

SampleCount parse_sample_count(const std::string& text) {
    if (text == "dense" || text == "max") return std::nullopt;
    std::size_t n = 0;
    if (!detail::parse_int(text, n) || n == 0) {
        throw ArgumentError("sample count must be a positive integer or 'dense', got '" + text + "'");
    }
    return n;
}

std::string to_string(const SampleCount& count) { return count ? std::to_string(*count) : "dense"; }

std::vector<std::size_t> even_sample_indices(std::size_t source_length, std::size_t n) {
    if (n == 0) throw ArgumentError("sample count must be >= 1");
    if (source_length == 0) throw ArgumentError("cannot sample from an empty sequence");
    std::vector<std::size_t> idx(n);
    // floor((i + 0.5) * N / n) == floor((2i + 1) * N / (2n)) in exact integer arithmetic
    for (std::size_t i = 0; i < n; ++i) idx[i] = (2 * i + 1) * source_length / (2 * n);
    return idx;
}

FeatureMatrix sample_evenly(const FeatureMatrix& seq, std::size_t n) {
    const auto idx = even_sample_indices(seq.rows(), n);
    return seq.select_rows(idx);
}

FeatureMatrix dense_plan(const FeatureMatrix& seq) { return seq; }

FeatureMatrix apply_sampling(const FeatureMatrix& seq, const SampleCount& count) {
    return count ? sample_evenly(seq, *count) : dense_plan(seq);
}

}  // namespace dovf
