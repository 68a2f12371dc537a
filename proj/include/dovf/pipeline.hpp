#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dovf/aggregation.hpp"
#include "dovf/classifier.hpp"
#include "dovf/codebook.hpp"
#include "dovf/encoding.hpp"
#include "dovf/feature_store.hpp"
#include "dovf/fusion.hpp"
#include "dovf/sampling.hpp"

namespace dovf {

/// Everything that selects one train/evaluate run.
struct PipelineConfig {
    AggregationMethod method = AggregationMethod::max;
    SampleCount samples = 25;
    std::size_t segments = 3;
    bool segment_encoders = false;
    std::optional<KernelKind> kernel;  ///< empty: linear for vlad/fv, chi2 otherwise
    double C = kDefaultC;
    std::size_t pca_dim = kDefaultPcaDim;
    std::size_t clusters = kDefaultClusters;
    bool pca_whiten = false;
    std::string split;        ///< empty: first split of the manifest
    std::string feature_set;  ///< empty: the manifest's only feature set
    std::uint64_t seed = 0;
};

KernelKind default_kernel(AggregationMethod method);
KernelKind effective_kernel(const PipelineConfig& config);
/// Segment count actually applied to `method`.
std::size_t effective_segments(const PipelineConfig& config);

/// Fills split and feature_set defaults from the manifest; throws ArgumentError when ambiguous.
PipelineConfig resolve_config(PipelineConfig config, const Manifest& manifest);

/// Loads feature matrices once per path.
class FeatureCache {
public:
    const FeatureMatrix& get(const std::filesystem::path& path);

private:
    std::map<std::filesystem::path, FeatureMatrix> cache_;
};

/// Text lines recorded while training (constants, segmentation, per-iteration objectives).
using TrainingLog = std::vector<std::string>;

struct StreamModel {
    Stream stream = Stream::spatial;
    std::optional<EncoderSpec> encoder;
    TrainedClassifier classifier;
};

struct Bundle {
    PipelineConfig config;  ///< resolved
    std::string manifest_hash;
    std::vector<StreamModel> streams;
    TrainingLog log;
};

/// Stable fingerprint of a manifest's content (hex FNV-1a of its canonical text).
std::string manifest_hash(const Manifest& manifest);

/// Global features of the given records, sampled and aggregated per `config`.
std::vector<Vector> global_features(const Manifest& manifest, const std::vector<const VideoRecord*>& records,
                                    const PipelineConfig& config, const std::optional<EncoderSpec>& encoder,
                                    FeatureCache& cache);

StreamModel train_stream(const Manifest& manifest, Stream stream, const PipelineConfig& config, FeatureCache& cache,
                         TrainingLog& log);

/// Trains every stream present for the configured feature set.
Bundle train_bundle(const Manifest& manifest, PipelineConfig config, FeatureCache& cache);

/// Scores of the split's test videos, in manifest test order.
ScoreMatrix score_stream(const Manifest& manifest, const StreamModel& model, const PipelineConfig& config,
                         FeatureCache& cache);

void write_bundle(const Bundle& bundle, const std::filesystem::path& dir);
Bundle load_bundle(const std::filesystem::path& dir);

struct ExternalScores {
    std::string name;
    ScoreMatrix scores;
    double weight = 1.0;
};

struct EvalOptions {
    double spatial_weight = kSpatialWeight;
    double temporal_weight = kTemporalWeight;
    std::vector<ExternalScores> externals;
};

struct EvalResult {
    std::string split;
    std::vector<std::string> columns;
    std::vector<double> accuracies;
    std::map<std::string, ScoreMatrix> scores;  ///< per column
};

EvalResult evaluate(const Manifest& manifest, const Bundle& bundle, const EvalOptions& options, FeatureCache& cache);

/// Accuracy as printed and written to CSV: percent with two decimals.
std::string format_accuracy(double accuracy);
std::string format_eval_table(const EvalResult& result);
std::string format_eval_csv(const EvalResult& result);

enum class SweepAxis { method, samples };
SweepAxis parse_sweep_axis(const std::string& text);

struct SweepRow {
    std::string value;
    std::vector<std::optional<double>> cells;  ///< empty optional = ERR
    std::string error;
};

struct SweepTable {
    SweepAxis axis = SweepAxis::samples;
    std::vector<std::string> columns;
    std::vector<SweepRow> rows;
};

/// Train + evaluate once per value; failing cells are recorded, not thrown.
SweepTable run_sweep(const Manifest& manifest, const PipelineConfig& base, SweepAxis axis,
                     const std::vector<std::string>& values, const EvalOptions& options, FeatureCache& cache);

std::string format_sweep_table(const SweepTable& table);
std::string format_sweep_csv(const SweepTable& table);

}  // namespace dovf
