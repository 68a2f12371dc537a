#pragma once

#include <variant>

#include "dovf/aggregation.hpp"
#include "dovf/codebook.hpp"
#include "dovf/feature_store.hpp"

namespace dovf {

/// Post-processing applied to VLAD and Fisher vectors.
struct EncodingNormalization {
    bool signed_sqrt = true;
    bool l2 = true;
};

struct EncoderSpec {
    AggregationMethod kind = AggregationMethod::fv;
    PcaModel pca;
    std::variant<KmeansModel, GmmModel> codebook;
    EncodingNormalization normalization;

    /// Throws ArgumentError when the kind, codebook type and dimensions disagree.
    void validate() const;
    std::size_t output_dim() const;
};

/// L1-normalised histogram of hard nearest-centroid assignments (k values).
Vector encode_bow(const EncoderSpec& spec, const FeatureMatrix& seq);
/// Per-centroid residual sums, concatenated (k * p values).
Vector encode_vlad(const EncoderSpec& spec, const FeatureMatrix& seq);
/**
 * Fisher vector (2 * k * p values): for every component c, with soft
 * assignments g_i(c) and whitened residuals u_i = (x_i - mu_c) / sigma_c,
 *   first order  (1 / (n sqrt(w_c)))    sum_i g_i(c) u_i
 *   second order (1 / (n sqrt(2 w_c)))  sum_i g_i(c) (u_i^2 - 1)
 * All first-order blocks come before all second-order blocks.
 */
Vector encode_fv(const EncoderSpec& spec, const FeatureMatrix& seq);

/// Dispatches on spec.kind.
Vector encode(const EncoderSpec& spec, const FeatureMatrix& seq);

/// Signed square root then L2 normalisation, as selected; a zero vector stays zero.
Vector normalize_encoding(Vector v, const EncodingNormalization& norm);

}  // namespace dovf
