#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dovf/feature_store.hpp"
#include "dovf/types.hpp"

namespace dovf {

inline constexpr double kDefaultC = 100.0;
inline constexpr double kChi2Epsilon = 1e-10;

enum class KernelKind {
    linear,
    chi2,           ///< exp(-gamma * chi2 distance)
    chi2_additive,  ///< sum_j 2 x_j y_j / (x_j + y_j)
};

KernelKind parse_kernel(const std::string& text);
std::string to_string(KernelKind kind);
/// chi2 variants need non-negative inputs.
bool is_chi2(KernelKind kind);

struct KernelSpec {
    KernelKind kind = KernelKind::chi2;
    std::optional<double> gamma;  ///< exponential chi2 only; empty until resolved
    double epsilon = kChi2Epsilon;
};

/// sum_j (x_j - y_j)^2 / (x_j + y_j + eps)
double chi2_distance(std::span<const double> x, std::span<const double> y, double eps = kChi2Epsilon);

/// Throws ArgumentError on dimension mismatch, negative chi2 input or an unresolved gamma.
double kernel_eval(const KernelSpec& spec, const Vector& x, const Vector& y);

/**
 * 1 / mean pairwise chi2 distance over the training features (at most 1000 of
 * them, drawn with `seed`). Falls back to 1 when every pair coincides.
 */
double resolve_gamma(const std::vector<Vector>& train, std::uint64_t seed = 0, double eps = kChi2Epsilon);

/// Gram matrix K(a_i, b_j).
Matrix kernel_matrix(const KernelSpec& spec, const std::vector<Vector>& a, const std::vector<Vector>& b);

/**
 * Per-feature normalisation that makes features fit the kernel: L2 for
 * linear, shift-by-training-minimum then L1 for chi2. Fitted once on
 * training data and replayed unchanged at test time.
 */
struct FeatureTransform {
    KernelKind kernel = KernelKind::linear;
    double shift = 0;  ///< added to every value before L1 normalisation (chi2 only)

    Vector apply(const Vector& x) const;
    std::vector<Vector> apply(const std::vector<Vector>& xs) const;
};

FeatureTransform fit_feature_transform(const std::vector<Vector>& train, KernelKind kernel);
std::vector<Vector> feature_transform_for_kernel(const std::vector<Vector>& features, KernelKind kernel);

struct SvmOptions {
    double C = kDefaultC;
    double tolerance = 1e-3;  ///< maximal KKT violation gap at convergence
    std::size_t max_iterations = 100000;
};

/// Dual solution of one binary C-SVM, restricted to its support vectors.
struct BinarySvm {
    std::vector<Vector> support_vectors;
    std::vector<double> coefficients;  ///< alpha_i * y_i
    double bias = 0;
    double C = kDefaultC;
    std::size_t iterations = 0;

    double decision(const KernelSpec& kernel, const Vector& x) const;
};

/// Full dual variables of a solved problem, kept for verification.
struct SvmSolution {
    std::vector<double> alpha;
    double bias = 0;
    std::size_t iterations = 0;
};

/**
 * SMO on  min 1/2 a'Qa - sum a,  0 <= a <= C,  y'a = 0,  Q_ij = y_i y_j K_ij,
 * choosing the maximal-violating pair each step. Throws ConvergenceError at
 * the iteration cap.
 */
SvmSolution solve_svm_dual(const Matrix& gram, const std::vector<int>& y, const SvmOptions& options);

BinarySvm train_binary(const std::vector<Vector>& features, const std::vector<int>& y, const KernelSpec& kernel,
                       const SvmOptions& options = {});

struct TrainedClassifier {
    std::vector<std::string> classes;
    std::vector<BinarySvm> models;  ///< one per class, positive = that class
    KernelSpec kernel;
    FeatureTransform transform;
    std::size_t input_dim = 0;
};

/**
 * One-vs-rest training: resolves gamma (exponential chi2 without a fixed
 * gamma), fits the feature transform, then trains one binary SVM per class
 * on a single shared Gram matrix.
 */
TrainedClassifier train_ovr(const std::vector<Vector>& features, const std::vector<std::size_t>& labels,
                            const std::vector<std::string>& classes, KernelSpec kernel, const SvmOptions& options = {},
                            std::uint64_t seed = 0);

/// Raw decision values f_c(x), one row per feature.
Matrix decision_values(const TrainedClassifier& model, const std::vector<Vector>& features);

/// Row-wise softmax of the decision values.
ScoreMatrix predict_scores(const TrainedClassifier& model, const std::vector<Vector>& features,
                           const std::vector<std::string>& video_ids);

/// Row-wise softmax.
Matrix softmax_rows(const Matrix& values);

void write_classifier(const TrainedClassifier& model, const std::filesystem::path& path);
TrainedClassifier load_classifier(const std::filesystem::path& path);

}  // namespace dovf
