#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "dovf/types.hpp"

namespace dovf {

/// Defaults for the projection and codebook sizes used by the encoders.
inline constexpr std::size_t kDefaultPcaDim = 256;
inline constexpr std::size_t kDefaultClusters = 256;
inline constexpr double kVarianceFloor = 1e-6;
inline constexpr double kWeightFloor = 1e-4;
/// Maximum number of local features used to train a codebook.
inline constexpr std::size_t kMaxCodebookSamples = 200000;

struct PcaModel {
    Vector mean;                 ///< d
    Matrix basis;                ///< p x d, orthonormal rows, decreasing variance
    Vector explained_variance;   ///< p
    bool whiten = false;

    std::size_t input_dim() const { return static_cast<std::size_t>(mean.size()); }
    std::size_t output_dim() const { return static_cast<std::size_t>(basis.rows()); }
};

/**
 * Principal directions of the mean-centred rows of `data`.
 *
 * Requires m >= 2 and 1 <= p <= min(m - 1, d). Eigenvector signs are fixed so
 * that the largest-magnitude entry of each basis row is positive. Zero-variance
 * data still yields an orthonormal basis, with zero explained variances.
 * With `whiten`, projections are divided by sqrt(variance + 1e-12).
 */
PcaModel fit_pca(const Matrix& data, std::size_t p, bool whiten = false);

Vector pca_project(const PcaModel& model, const Vector& x);
/// Projects every row.
Matrix pca_project_rows(const PcaModel& model, const Matrix& rows);

struct KmeansOptions {
    std::size_t max_iterations = 100;
    double tolerance = 1e-6;  ///< stop when no centroid moves farther than this
};

struct KmeansModel {
    Matrix centroids;  ///< k x p
    double inertia = 0;
    /// Inertia measured after every assignment step (the last entry is `inertia`).
    std::vector<double> inertia_history;
    std::size_t iterations = 0;

    std::size_t k() const { return static_cast<std::size_t>(centroids.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(centroids.cols()); }
};

/// Index of the nearest centroid; ties go to the lowest index.
std::size_t nearest_centroid(const Matrix& centroids, const Eigen::Ref<const Vector>& x);

/**
 * k-means++ seeding then Lloyd iterations. An empty cluster is re-seeded
 * with the point currently farthest from its own centroid.
 */
KmeansModel fit_kmeans(const Matrix& data, std::size_t k, std::uint64_t seed, const KmeansOptions& options = {});

struct GmmOptions {
    std::size_t max_iterations = 100;
    double tolerance = 1e-6;  ///< relative log-likelihood improvement
    double variance_floor = kVarianceFloor;
    double weight_floor = kWeightFloor;
    KmeansOptions kmeans;
};

/// Diagonal-covariance Gaussian mixture.
struct GmmModel {
    Vector weights;    ///< k
    Matrix means;      ///< k x p
    Matrix variances;  ///< k x p
    /// Average per-sample log-likelihood of the training data under the final model.
    double log_likelihood = 0;
    /// Average log-likelihood evaluated at the start of every EM iteration and after the last one.
    std::vector<double> log_likelihood_history;
    std::size_t iterations = 0;

    std::size_t k() const { return static_cast<std::size_t>(means.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(means.cols()); }
};

GmmModel fit_gmm(const Matrix& data, std::size_t k, std::uint64_t seed, const GmmOptions& options = {});

/// Log of w_k * N(x; mu_k, diag var_k) for every component.
Vector gmm_log_joint(const GmmModel& model, const Eigen::Ref<const Vector>& x);
/// Soft assignments; sums to one for any finite x.
Vector gmm_posteriors(const GmmModel& model, const Eigen::Ref<const Vector>& x);
/// Average per-row log-likelihood.
double gmm_log_likelihood(const GmmModel& model, const Matrix& data);

/// Solves max sum_k counts_k log w_k over the simplex with w_k >= floor.
Vector floored_weights(const Vector& counts, double floor);

// Binary model files: "DOVM", version, type tag, dimensions, float32 payload.
void write_model(const PcaModel& model, const std::filesystem::path& path);
void write_model(const KmeansModel& model, const std::filesystem::path& path);
void write_model(const GmmModel& model, const std::filesystem::path& path);
PcaModel load_pca_model(const std::filesystem::path& path);
KmeansModel load_kmeans_model(const std::filesystem::path& path);
GmmModel load_gmm_model(const std::filesystem::path& path);

}  // namespace dovf
