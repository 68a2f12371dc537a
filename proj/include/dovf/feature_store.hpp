#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dovf/types.hpp"

namespace dovf {

/**
 * One video's local features for one stream: n rows (temporal order) of
 * dimension d, stored as float32 exactly as on disk.
 */
class FeatureMatrix {
public:
    FeatureMatrix() = default;

    /// Throws ArgumentError when rows or cols is 0, the size does not match,
    /// or a value is not finite.
    FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> data);

    static FeatureMatrix from_rows(const std::vector<std::vector<float>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0; }

    std::span<const float> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }
    float operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    const std::vector<float>& data() const { return data_; }

    /// Copy of rows [start, start + len).
    FeatureMatrix slice_rows(std::size_t start, std::size_t len) const;
    /// Copy of the given rows, in the given order (repetition allowed).
    FeatureMatrix select_rows(std::span<const std::size_t> indices) const;

    Matrix to_matrix() const;

    friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

enum class SplitRole { train, test };
enum class Stream { spatial, temporal };

std::string to_string(SplitRole role);
std::string to_string(Stream stream);
Stream parse_stream(const std::string& text);

struct VideoRecord {
    std::string video_id;
    std::size_t label = 0;
    std::string split;
    SplitRole role = SplitRole::train;
    Stream stream = Stream::spatial;
    std::string feature_set;
    std::filesystem::path path;  ///< as written in the manifest (relative to it)
};

/**
 * Dataset description. Record lines carry their split membership, so a video
 * taking part in several splits appears once per split.
 */
struct Manifest {
    std::vector<std::string> classes;
    std::vector<std::string> splits;
    std::vector<VideoRecord> records;
    std::filesystem::path base_dir;  ///< directory record paths are relative to

    std::size_t class_count() const { return classes.size(); }
    bool has_split(const std::string& name) const;

    /// Records of one split/role/stream/feature_set, in manifest order.
    std::vector<const VideoRecord*> select(const std::string& split, SplitRole role, Stream stream,
                                           const std::string& feature_set) const;

    /// Distinct video ids of a split's test partition, in first-appearance order.
    std::vector<std::string> test_videos(const std::string& split) const;
    /// Label of a video; throws IntegrityError when unknown.
    std::size_t label_of(const std::string& video_id) const;

    std::vector<std::string> feature_sets() const;
    std::vector<Stream> streams(const std::string& feature_set) const;

    std::filesystem::path resolve(const VideoRecord& record) const { return base_dir / record.path; }
};

/// Checks every manifest invariant; throws IntegrityError on the first violation.
void validate_manifest(const Manifest& manifest);

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir = {});
Manifest load_manifest(const std::filesystem::path& path);
std::string format_manifest(const Manifest& manifest);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

FeatureMatrix load_feature_matrix(const std::filesystem::path& path);
void write_feature_matrix(const FeatureMatrix& m, const std::filesystem::path& path);

/// Per-video per-class scores; rows align with video_ids.
struct ScoreMatrix {
    std::vector<std::string> video_ids;
    std::vector<std::string> columns;  ///< class column names from the CSV header
    Matrix scores;

    std::size_t class_count() const { return static_cast<std::size_t>(scores.cols()); }
    std::size_t video_count() const { return video_ids.size(); }
};

/// Default column names score_0 .. score_{c-1}.
std::vector<std::string> default_score_columns(std::size_t class_count);

ScoreMatrix load_scores(const std::filesystem::path& path);
void write_scores(const ScoreMatrix& scores, const std::filesystem::path& path);

}  // namespace dovf
