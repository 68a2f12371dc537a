#include "dovf/encoding.hpp"

#include <cmath>

#include "dovf/errors.hpp"

namespace dovf {

namespace {

std::size_t codebook_dim(const EncoderSpec& spec) {
    return std::visit([](const auto& cb) { return cb.dim(); }, spec.codebook);
}

std::size_t codebook_k(const EncoderSpec& spec) {
    return std::visit([](const auto& cb) { return cb.k(); }, spec.codebook);
}

Matrix project(const EncoderSpec& spec, const FeatureMatrix& seq) {
    if (seq.empty()) throw ArgumentError("cannot encode an empty sequence");
    if (seq.cols() != spec.pca.input_dim()) {
        throw ArgumentError("local features have dimension " + std::to_string(seq.cols()) + ", encoder expects " +
                            std::to_string(spec.pca.input_dim()));
    }
    return pca_project_rows(spec.pca, seq.to_matrix());
}

const KmeansModel& kmeans_of(const EncoderSpec& spec) {
    const auto* km = std::get_if<KmeansModel>(&spec.codebook);
    if (!km) throw ArgumentError(to_string(spec.kind) + " encoding needs a k-means codebook");
    return *km;
}

}  // namespace

void EncoderSpec::validate() const {
    if (!is_encoder(kind)) throw ArgumentError("'" + to_string(kind) + "' is not an encoding method");
    const bool wants_gmm = kind == AggregationMethod::fv;
    if (wants_gmm != std::holds_alternative<GmmModel>(codebook)) {
        throw ArgumentError(to_string(kind) + " encoding got the wrong codebook type");
    }
    if (pca.output_dim() != codebook_dim(*this)) {
        throw ArgumentError("PCA output dimension " + std::to_string(pca.output_dim()) +
                            " does not match codebook dimension " + std::to_string(codebook_dim(*this)));
    }
}

std::size_t EncoderSpec::output_dim() const {
    const auto k = codebook_k(*this);
    switch (kind) {
        case AggregationMethod::bow: return k;
        case AggregationMethod::vlad: return k * pca.output_dim();
        case AggregationMethod::fv: return 2 * k * pca.output_dim();
        default: throw ArgumentError("'" + to_string(kind) + "' is not an encoding method");
    }
}

Vector normalize_encoding(Vector v, const EncodingNormalization& norm) {
    if (norm.signed_sqrt) v = v.unaryExpr([](double x) { return std::copysign(std::sqrt(std::abs(x)), x); });
    if (norm.l2) {
        const double n = v.norm();
        if (n > 0) v /= n;
    }
    return v;
}

Vector encode_bow(const EncoderSpec& spec, const FeatureMatrix& seq) {
    const auto& km = kmeans_of(spec);
    const Matrix x = project(spec, seq);
    Vector hist = Vector::Zero(static_cast<Eigen::Index>(km.k()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) hist[static_cast<Eigen::Index>(nearest_centroid(km.centroids, x.row(i).transpose()))] += 1;
    return hist / static_cast<double>(x.rows());
}

Vector encode_vlad(const EncoderSpec& spec, const FeatureMatrix& seq) {
    const auto& km = kmeans_of(spec);
    const Matrix x = project(spec, seq);
    const auto p = x.cols();
    Vector v = Vector::Zero(static_cast<Eigen::Index>(km.k()) * p);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto c = static_cast<Eigen::Index>(nearest_centroid(km.centroids, x.row(i).transpose()));
        v.segment(c * p, p) += (x.row(i) - km.centroids.row(c)).transpose();
    }
    return normalize_encoding(std::move(v), spec.normalization);
}

Vector encode_fv(const EncoderSpec& spec, const FeatureMatrix& seq) {
    const auto* gmm = std::get_if<GmmModel>(&spec.codebook);
    if (!gmm) throw ArgumentError("fisher vector encoding needs a GMM codebook");
    const Matrix x = project(spec, seq);
    const auto p = x.cols();
    const auto k = static_cast<Eigen::Index>(gmm->k());
    const double n = static_cast<double>(x.rows());
    Vector fv = Vector::Zero(2 * k * p);
    auto first = fv.head(k * p);
    auto second = fv.tail(k * p);
    const Matrix sigma = gmm->variances.cwiseSqrt();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Vector gamma = gmm_posteriors(*gmm, x.row(i).transpose());
        for (Eigen::Index c = 0; c < k; ++c) {
            const Eigen::ArrayXd u = (x.row(i) - gmm->means.row(c)).array() / sigma.row(c).array();
            first.segment(c * p, p).array() += gamma[c] * u;
            second.segment(c * p, p).array() += gamma[c] * (u.square() - 1.0);
        }
    }
    for (Eigen::Index c = 0; c < k; ++c) {
        first.segment(c * p, p) /= n * std::sqrt(gmm->weights[c]);
        second.segment(c * p, p) /= n * std::sqrt(2.0 * gmm->weights[c]);
    }
    return normalize_encoding(std::move(fv), spec.normalization);
}

Vector encode(const EncoderSpec& spec, const FeatureMatrix& seq) {
    switch (spec.kind) {
        case AggregationMethod::bow: return encode_bow(spec, seq);
        case AggregationMethod::vlad: return encode_vlad(spec, seq);
        case AggregationMethod::fv: return encode_fv(spec, seq);
        default: throw ArgumentError("'" + to_string(spec.kind) + "' is not an encoding method");
    }
}

}  // namespace dovf
