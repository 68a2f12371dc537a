#include "dovf/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dovf/errors.hpp"

namespace dovf {

AggregationMethod parse_method(const std::string& text) {
    if (text == "mean") return AggregationMethod::mean;
    if (text == "max") return AggregationMethod::max;
    if (text == "mean_std") return AggregationMethod::mean_std;
    if (text == "bow") return AggregationMethod::bow;
    if (text == "vlad") return AggregationMethod::vlad;
    if (text == "fv") return AggregationMethod::fv;
    throw ArgumentError("unknown aggregation method '" + text + "'");
}

std::string to_string(AggregationMethod method) {
    switch (method) {
        case AggregationMethod::mean: return "mean";
        case AggregationMethod::max: return "max";
        case AggregationMethod::mean_std: return "mean_std";
        case AggregationMethod::bow: return "bow";
        case AggregationMethod::vlad: return "vlad";
        case AggregationMethod::fv: return "fv";
    }
    return "?";
}

bool is_encoder(AggregationMethod method) {
    return method == AggregationMethod::bow || method == AggregationMethod::vlad || method == AggregationMethod::fv;
}

namespace {

void require_rows(const FeatureMatrix& seq) {
    if (seq.empty()) throw ArgumentError("cannot pool an empty sequence");
}

}  // namespace

Vector pool_mean(const FeatureMatrix& seq) {
    require_rows(seq);
    Vector out = Vector::Zero(static_cast<Eigen::Index>(seq.cols()));
    for (std::size_t i = 0; i < seq.rows(); ++i) {
        const auto r = seq.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j];
    }
    return out / static_cast<double>(seq.rows());
}

Vector pool_max(const FeatureMatrix& seq) {
    require_rows(seq);
    const auto first = seq.row(0);
    Vector out(static_cast<Eigen::Index>(seq.cols()));
    for (std::size_t j = 0; j < first.size(); ++j) out[j] = first[j];
    for (std::size_t i = 1; i < seq.rows(); ++i) {
        const auto r = seq.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) out[j] = std::max<double>(out[j], r[j]);
    }
    return out;
}

Vector pool_mean_std(const FeatureMatrix& seq) {
    const Vector mean = pool_mean(seq);
    const auto d = static_cast<Eigen::Index>(seq.cols());
    Vector var = Vector::Zero(d);
    for (std::size_t i = 0; i < seq.rows(); ++i) {
        const auto r = seq.row(i);
        for (Eigen::Index j = 0; j < d; ++j) {
            const double diff = r[j] - mean[j];
            var[j] += diff * diff;
        }
    }
    Vector out(2 * d);
    out.head(d) = mean;
    out.tail(d) = (var / static_cast<double>(seq.rows())).cwiseSqrt();
    return out;
}

std::vector<Span> segment_bounds(std::size_t n, std::size_t s) {
    if (s == 0) throw ArgumentError("segment count must be >= 1");
    if (n < s) {
        throw ArgumentError("cannot split " + std::to_string(n) + " local features into " + std::to_string(s) +
                            " segments");
    }
    const std::size_t q = n / s;
    std::size_t r = n - q * s;
    std::vector<std::size_t> sizes(s, q);
    if (s <= 2) {
        sizes.back() += r;
    } else {
        const std::size_t inner = s - 2;
        for (std::size_t k = 1; k + 1 < s; ++k) sizes[k] += r / inner;
        r %= inner;
        // leftover rows go to the inner segments closest to the centre
        std::vector<std::size_t> order(inner);
        std::iota(order.begin(), order.end(), std::size_t{1});
        const double centre = (static_cast<double>(s) - 1.0) / 2.0;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return std::abs(static_cast<double>(a) - centre) < std::abs(static_cast<double>(b) - centre);
        });
        for (std::size_t k = 0; k < r; ++k) sizes[order[k]] += 1;
    }
    std::vector<Span> out;
    std::size_t start = 0;
    for (auto len : sizes) {
        out.push_back({start, len});
        start += len;
    }
    return out;
}

Vector aggregate_segmented(const FeatureMatrix& seq, std::size_t segments, const Pooler& pooler) {
    if (segments == 1) return pooler(seq);
    const auto spans = segment_bounds(seq.rows(), segments);
    std::vector<Vector> parts;
    Eigen::Index total = 0;
    for (const auto& sp : spans) {
        parts.push_back(pooler(seq.slice_rows(sp.start, sp.length)));
        total += parts.back().size();
    }
    Vector out(total);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.segment(at, p.size()) = p;
        at += p.size();
    }
    return out;
}

}  // namespace dovf
