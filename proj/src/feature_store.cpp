#include "dovf/feature_store.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "binary_io.hpp"
#include "dovf/errors.hpp"
#include "text_util.hpp"

namespace dovf {

namespace {

constexpr std::string_view kMatrixMagic = "DOVF";
constexpr std::uint8_t kMatrixVersion = 1;

bool all_finite(const std::vector<float>& v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows_ == 0 || cols_ == 0) throw ArgumentError("feature matrix must have n >= 1 and d >= 1");
    if (data_.size() != rows_ * cols_) {
        throw ArgumentError("feature matrix holds " + std::to_string(data_.size()) + " values, expected " +
                            std::to_string(rows_ * cols_));
    }
    if (!all_finite(data_)) throw ArgumentError("feature matrix contains a non-finite value");
}

FeatureMatrix FeatureMatrix::from_rows(const std::vector<std::vector<float>>& rows) {
    if (rows.empty()) throw ArgumentError("feature matrix must have n >= 1");
    const auto d = rows.front().size();
    std::vector<float> data;
    data.reserve(rows.size() * d);
    for (const auto& r : rows) {
        if (r.size() != d) throw ArgumentError("ragged rows in feature matrix");
        data.insert(data.end(), r.begin(), r.end());
    }
    return {rows.size(), d, std::move(data)};
}

FeatureMatrix FeatureMatrix::slice_rows(std::size_t start, std::size_t len) const {
    if (len == 0 || start + len > rows_) throw ArgumentError("row slice out of range");
    std::vector<float> out(data_.begin() + static_cast<std::ptrdiff_t>(start * cols_),
                           data_.begin() + static_cast<std::ptrdiff_t>((start + len) * cols_));
    return {len, cols_, std::move(out)};
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
    std::vector<float> out;
    out.reserve(indices.size() * cols_);
    for (auto i : indices) {
        if (i >= rows_) throw ArgumentError("row index out of range");
        auto r = row(i);
        out.insert(out.end(), r.begin(), r.end());
    }
    return {indices.size(), cols_, std::move(out)};
}

Matrix FeatureMatrix::to_matrix() const {
    Matrix m(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) m(i, j) = data_[i * cols_ + j];
    return m;
}

std::string to_string(SplitRole role) { return role == SplitRole::train ? "train" : "test"; }
std::string to_string(Stream stream) { return stream == Stream::spatial ? "spatial" : "temporal"; }

Stream parse_stream(const std::string& text) {
    if (text == "spatial") return Stream::spatial;
    if (text == "temporal") return Stream::temporal;
    throw ArgumentError("unknown stream '" + text + "'");
}

// ---------------------------------------------------------------- manifest

bool Manifest::has_split(const std::string& name) const {
    return std::find(splits.begin(), splits.end(), name) != splits.end();
}

std::vector<const VideoRecord*> Manifest::select(const std::string& split, SplitRole role, Stream stream,
                                                 const std::string& feature_set) const {
    std::vector<const VideoRecord*> out;
    for (const auto& r : records) {
        if (r.split == split && r.role == role && r.stream == stream && r.feature_set == feature_set) {
            out.push_back(&r);
        }
    }
    return out;
}

std::vector<std::string> Manifest::test_videos(const std::string& split) const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& r : records) {
        if (r.split == split && r.role == SplitRole::test && seen.insert(r.video_id).second) {
            out.push_back(r.video_id);
        }
    }
    return out;
}

std::size_t Manifest::label_of(const std::string& video_id) const {
    for (const auto& r : records)
        if (r.video_id == video_id) return r.label;
    throw IntegrityError("unknown video '" + video_id + "'");
}

std::vector<std::string> Manifest::feature_sets() const {
    std::vector<std::string> out;
    for (const auto& r : records)
        if (std::find(out.begin(), out.end(), r.feature_set) == out.end()) out.push_back(r.feature_set);
    return out;
}

std::vector<Stream> Manifest::streams(const std::string& feature_set) const {
    bool spatial = false;
    bool temporal = false;
    for (const auto& r : records) {
        if (r.feature_set != feature_set) continue;
        (r.stream == Stream::spatial ? spatial : temporal) = true;
    }
    std::vector<Stream> out;
    if (spatial) out.push_back(Stream::spatial);
    if (temporal) out.push_back(Stream::temporal);
    return out;
}

void validate_manifest(const Manifest& m) {
    if (m.classes.empty()) throw IntegrityError("manifest declares no classes");
    std::set<std::string> class_names(m.classes.begin(), m.classes.end());
    if (class_names.size() != m.classes.size()) throw IntegrityError("duplicate class name in manifest");
    std::set<std::string> split_names(m.splits.begin(), m.splits.end());
    if (split_names.size() != m.splits.size()) throw IntegrityError("duplicate split name in manifest");

    std::set<std::tuple<std::string, std::string, Stream, std::string>> keys;
    std::map<std::pair<std::string, std::string>, SplitRole> roles;  // (split, video) -> role
    std::map<std::string, std::size_t> labels;
    for (const auto& r : m.records) {
        if (r.video_id.empty()) throw IntegrityError("record with empty video_id");
        if (r.label >= m.classes.size()) {
            throw IntegrityError("video '" + r.video_id + "' has label " + std::to_string(r.label) + " but only " +
                                 std::to_string(m.classes.size()) + " classes are declared");
        }
        if (!split_names.count(r.split)) {
            throw IntegrityError("video '" + r.video_id + "' references undeclared split '" + r.split + "'");
        }
        if (!keys.emplace(r.split, r.video_id, r.stream, r.feature_set).second) {
            throw IntegrityError("duplicate record (video_id=" + r.video_id + ", stream=" + to_string(r.stream) +
                                 ", feature_set=" + r.feature_set + ") in split '" + r.split + "'");
        }
        auto [role_it, fresh_role] = roles.emplace(std::pair{r.split, r.video_id}, r.role);
        if (!fresh_role && role_it->second != r.role) {
            throw IntegrityError("video '" + r.video_id + "' is in both train and test of split '" + r.split + "'");
        }
        auto [label_it, fresh_label] = labels.emplace(r.video_id, r.label);
        if (!fresh_label && label_it->second != r.label) {
            throw IntegrityError("video '" + r.video_id + "' has conflicting labels");
        }
    }
}

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
    Manifest m;
    m.base_dir = base_dir;
    bool have_classes = false;
    const auto all = detail::lines(text);
    for (std::size_t ln = 0; ln < all.size(); ++ln) {
        const std::string& line = all[ln];
        const auto where = "manifest line " + std::to_string(ln + 1) + ": ";
        if (line.empty()) continue;
        if (line.rfind("#classes:", 0) == 0) {
            if (have_classes) throw FormatError(where + "repeated #classes header");
            m.classes = detail::split(std::string_view(line).substr(9), ',');
            for (const auto& c : m.classes)
                if (c.empty()) throw FormatError(where + "empty class name");
            have_classes = true;
            continue;
        }
        if (line.rfind("#split", 0) == 0) {
            const auto name = std::string(detail::trim(std::string_view(line).substr(6)));
            if (name.empty() || name.find(',') != std::string::npos) throw FormatError(where + "bad split name");
            m.splits.push_back(name);
            continue;
        }
        if (line.front() == '#') continue;  // comment

        const auto f = detail::split(line, ',');
        if (f.size() != 7) {
            throw FormatError(where + "expected 7 comma-separated fields, got " + std::to_string(f.size()));
        }
        VideoRecord r;
        r.video_id = f[0];
        if (!detail::parse_int(f[1], r.label)) throw FormatError(where + "bad label index '" + f[1] + "'");
        r.split = f[2];
        if (f[3] == "train") {
            r.role = SplitRole::train;
        } else if (f[3] == "test") {
            r.role = SplitRole::test;
        } else {
            throw FormatError(where + "split role must be train or test, got '" + f[3] + "'");
        }
        if (f[4] == "spatial") {
            r.stream = Stream::spatial;
        } else if (f[4] == "temporal") {
            r.stream = Stream::temporal;
        } else {
            throw FormatError(where + "stream must be spatial or temporal, got '" + f[4] + "'");
        }
        r.feature_set = f[5];
        if (f[6].empty()) throw FormatError(where + "empty feature path");
        r.path = f[6];
        m.records.push_back(std::move(r));
    }
    if (!have_classes) throw FormatError("manifest: missing #classes header");
    validate_manifest(m);
    return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
    return parse_manifest(detail::read_text_file(path), path.parent_path());
}

std::string format_manifest(const Manifest& m) {
    std::ostringstream out;
    out << "#classes: ";
    for (std::size_t i = 0; i < m.classes.size(); ++i) out << (i ? "," : "") << m.classes[i];
    out << '\n';
    for (const auto& s : m.splits) out << "#split " << s << '\n';
    for (const auto& r : m.records) {
        out << r.video_id << ',' << r.label << ',' << r.split << ',' << to_string(r.role) << ','
            << to_string(r.stream) << ',' << r.feature_set << ',' << r.path.generic_string() << '\n';
    }
    return out.str();
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
    detail::write_text_file(path, format_manifest(m));
}

// ---------------------------------------------------------------- matrices

FeatureMatrix load_feature_matrix(const std::filesystem::path& path) {
    detail::ByteReader in(detail::read_file(path), "feature matrix " + path.string());
    in.expect_magic(kMatrixMagic);
    if (const auto v = in.u8(); v != kMatrixVersion) in.fail("unsupported version " + std::to_string(v));
    const std::size_t n = in.u32();
    const std::size_t d = in.u32();
    if (n == 0 || d == 0) in.fail("empty matrix (n=" + std::to_string(n) + ", d=" + std::to_string(d) + ")");
    if (in.remaining() != n * d * 4) {
        in.fail("truncated or oversized payload: header says " + std::to_string(n) + "x" + std::to_string(d) +
                ", payload has " + std::to_string(in.remaining()) + " bytes");
    }
    std::vector<float> data(n * d);
    for (auto& x : data) {
        x = in.f32();
        if (!std::isfinite(x)) in.fail("non-finite value in payload");
    }
    return {n, d, std::move(data)};
}

void write_feature_matrix(const FeatureMatrix& m, const std::filesystem::path& path) {
    if (m.empty()) throw ArgumentError("cannot write an empty feature matrix");
    detail::ByteWriter out;
    out.bytes(kMatrixMagic);
    out.u8(kMatrixVersion);
    out.u32(static_cast<std::uint32_t>(m.rows()));
    out.u32(static_cast<std::uint32_t>(m.cols()));
    for (float x : m.data()) out.f32(x);
    detail::write_file(path, out.buffer());
}

// ---------------------------------------------------------------- scores

std::vector<std::string> default_score_columns(std::size_t class_count) {
    std::vector<std::string> out;
    for (std::size_t c = 0; c < class_count; ++c) out.push_back("score_" + std::to_string(c));
    return out;
}

ScoreMatrix load_scores(const std::filesystem::path& path) {
    const auto all = detail::lines(detail::read_text_file(path));
    const auto where = [&](std::size_t ln) { return "score file " + path.string() + " line " + std::to_string(ln + 1) + ": "; };
    std::size_t ln = 0;
    while (ln < all.size() && all[ln].empty()) ++ln;
    if (ln == all.size()) throw FormatError("score file " + path.string() + ": missing header");
    auto header = detail::split(all[ln], ',');
    if (header.size() < 2 || header.front() != "video_id") {
        throw FormatError(where(ln) + "header must be video_id followed by one column per class");
    }
    ScoreMatrix s;
    s.columns.assign(header.begin() + 1, header.end());
    const auto c = s.columns.size();
    std::vector<double> values;
    for (++ln; ln < all.size(); ++ln) {
        if (all[ln].empty()) continue;
        const auto f = detail::split(all[ln], ',');
        if (f.size() != c + 1) {
            throw FormatError(where(ln) + "ragged row: expected " + std::to_string(c + 1) + " fields, got " +
                              std::to_string(f.size()));
        }
        s.video_ids.push_back(f[0]);
        for (std::size_t j = 1; j <= c; ++j) {
            double v = 0;
            if (!detail::parse_double(f[j], v) || !std::isfinite(v)) {
                throw FormatError(where(ln) + "bad score value '" + f[j] + "'");
            }
            values.push_back(v);
        }
    }
    s.scores = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(s.video_ids.size()),
                                  static_cast<Eigen::Index>(c));
    return s;
}

void write_scores(const ScoreMatrix& s, const std::filesystem::path& path) {
    if (static_cast<std::size_t>(s.scores.rows()) != s.video_ids.size()) {
        throw ArgumentError("score rows do not align with video ids");
    }
    const auto columns = s.columns.empty() ? default_score_columns(s.class_count()) : s.columns;
    if (columns.size() != s.class_count()) throw ArgumentError("score column names do not match class count");
    std::string out = "video_id";
    for (const auto& c : columns) out += "," + c;
    out += '\n';
    for (std::size_t i = 0; i < s.video_ids.size(); ++i) {
        out += s.video_ids[i];
        for (Eigen::Index j = 0; j < s.scores.cols(); ++j) {
            const double v = s.scores(static_cast<Eigen::Index>(i), j);
            if (!std::isfinite(v)) throw ArgumentError("non-finite score for video " + s.video_ids[i]);
            out += "," + detail::format_double(v);
        }
        out += '\n';
    }
    detail::write_text_file(path, out);
}

}  // namespace dovf
