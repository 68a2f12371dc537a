#include "dovf/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "dovf/errors.hpp"
#include "dovf/random.hpp"
#include "text_util.hpp"

namespace dovf {

KernelKind default_kernel(AggregationMethod method) {
    return method == AggregationMethod::vlad || method == AggregationMethod::fv ? KernelKind::linear
                                                                                 : KernelKind::chi2;
}

KernelKind effective_kernel(const PipelineConfig& config) {
    return config.kernel.value_or(default_kernel(config.method));
}

std::size_t effective_segments(const PipelineConfig& config) {
    return is_encoder(config.method) && !config.segment_encoders ? 1 : config.segments;
}

PipelineConfig resolve_config(PipelineConfig config, const Manifest& manifest) {
    if (config.segments < 1) throw ArgumentError("segment count must be >= 1");
    if (config.samples && *config.samples < effective_segments(config)) {
        throw ArgumentError("cannot split " + std::to_string(*config.samples) + " samples into " +
                            std::to_string(effective_segments(config)) + " segments");
    }
    if (config.split.empty()) {
        if (manifest.splits.empty()) throw ArgumentError("manifest declares no splits");
        config.split = manifest.splits.front();
    } else if (!manifest.has_split(config.split)) {
        throw ArgumentError("manifest has no split '" + config.split + "'");
    }
    const auto sets = manifest.feature_sets();
    if (config.feature_set.empty()) {
        if (sets.size() != 1) throw ArgumentError("manifest has " + std::to_string(sets.size()) + " feature sets; pick one");
        config.feature_set = sets.front();
    } else if (std::find(sets.begin(), sets.end(), config.feature_set) == sets.end()) {
        throw ArgumentError("manifest has no feature set '" + config.feature_set + "'");
    }
    if (!config.kernel) config.kernel = default_kernel(config.method);
    return config;
}

const FeatureMatrix& FeatureCache::get(const std::filesystem::path& path) {
    auto it = cache_.find(path);
    if (it == cache_.end()) it = cache_.emplace(path, load_feature_matrix(path)).first;
    return it->second;
}

std::string manifest_hash(const Manifest& manifest) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(format_manifest(manifest))));
    return buf;
}

namespace {

std::string fmt(double v) { return detail::format_double(v); }

// Round-trip models through float32 right away so in-memory runs match reloaded bundles.
void quantize(Matrix& m) { m = m.cast<float>().cast<double>(); }
void quantize(Vector& v) { v = v.cast<float>().cast<double>(); }

std::string segmentation_line(std::size_t n, std::size_t s) {
    const auto spans = segment_bounds(n, s);
    std::string out = "segmentation: n=" + std::to_string(n) + " s=" + std::to_string(s) + " ->";
    std::string sizes;
    for (const auto& sp : spans) {
        out += " [" + std::to_string(sp.start) + "," + std::to_string(sp.start + sp.length) + ")";
        sizes += (sizes.empty() ? "" : "/") + std::to_string(sp.length);
    }
    return out + " sizes " + sizes;
}

Matrix codebook_training_data(const Manifest& manifest, const std::vector<const VideoRecord*>& records,
                              const PipelineConfig& config, FeatureCache& cache, std::uint64_t seed) {
    std::vector<FeatureMatrix> seqs;
    std::size_t total = 0;
    std::size_t dim = 0;
    for (const auto* r : records) {
        seqs.push_back(apply_sampling(cache.get(manifest.resolve(*r)), config.samples));
        total += seqs.back().rows();
        if (dim == 0) dim = seqs.back().cols();
        if (seqs.back().cols() != dim) throw IntegrityError("video '" + r->video_id + "' has a different feature dimension");
    }
    std::vector<std::pair<std::size_t, std::size_t>> where;  // (sequence, row)
    where.reserve(total);
    for (std::size_t s = 0; s < seqs.size(); ++s)
        for (std::size_t i = 0; i < seqs[s].rows(); ++i) where.emplace_back(s, i);
    if (where.size() > kMaxCodebookSamples) {
        Rng rng(seed);
        shuffle(where.begin(), where.end(), rng);
        where.resize(kMaxCodebookSamples);
        std::sort(where.begin(), where.end());
    }
    Matrix data(static_cast<Eigen::Index>(where.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t t = 0; t < where.size(); ++t) {
        const auto row = seqs[where[t].first].row(where[t].second);
        for (std::size_t j = 0; j < dim; ++j) data(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = row[j];
    }
    return data;
}

EncoderSpec train_encoder(const Manifest& manifest, const std::vector<const VideoRecord*>& records,
                          const PipelineConfig& config, const std::string& tag, FeatureCache& cache, TrainingLog& log) {
    const auto data = codebook_training_data(manifest, records, config, cache, derive_seed(config.seed, tag + "/subsample"));
    const auto m = static_cast<std::size_t>(data.rows());
    const auto d = static_cast<std::size_t>(data.cols());
    if (m < 2) throw ArgumentError("codebook training needs at least 2 local features, got " + std::to_string(m));
    const auto p = std::min({config.pca_dim, d, m - 1});
    log.push_back(tag + " codebook: " + std::to_string(m) + " local features, pca " + std::to_string(d) + " -> " +
                  std::to_string(p) + " (requested " + std::to_string(config.pca_dim) + "), clusters " +
                  std::to_string(config.clusters));

    EncoderSpec spec;
    spec.kind = config.method;
    spec.pca = fit_pca(data, p, config.pca_whiten);
    quantize(spec.pca.mean);
    quantize(spec.pca.basis);
    quantize(spec.pca.explained_variance);
    const Matrix projected = pca_project_rows(spec.pca, data);

    const auto cb_seed = derive_seed(config.seed, tag + "/codebook");
    if (config.method == AggregationMethod::fv) {
        auto gmm = fit_gmm(projected, config.clusters, cb_seed);
        for (std::size_t i = 0; i < gmm.log_likelihood_history.size(); ++i) {
            log.push_back(tag + " gmm iter " + std::to_string(i) + " loglik " + fmt(gmm.log_likelihood_history[i]));
        }
        quantize(gmm.weights);
        gmm.weights /= gmm.weights.sum();
        quantize(gmm.means);
        quantize(gmm.variances);
        gmm.variances = gmm.variances.cwiseMax(kVarianceFloor);
        spec.codebook = std::move(gmm);
    } else {
        auto km = fit_kmeans(projected, config.clusters, cb_seed);
        for (std::size_t i = 0; i < km.inertia_history.size(); ++i) {
            log.push_back(tag + " kmeans iter " + std::to_string(i) + " inertia " + fmt(km.inertia_history[i]));
        }
        quantize(km.centroids);
        spec.codebook = std::move(km);
    }
    spec.validate();
    return spec;
}

Pooler pooler_for(AggregationMethod method) {
    switch (method) {
        case AggregationMethod::mean: return pool_mean;
        case AggregationMethod::max: return pool_max;
        case AggregationMethod::mean_std: return pool_mean_std;
        default: throw ArgumentError("'" + to_string(method) + "' is not a pooling method");
    }
}

template <typename Fn>
auto with_context(const std::string& context, Fn&& fn) {
    try {
        return fn();
    } catch (const ArgumentError& e) {
        throw ArgumentError(context + ": " + e.what());
    } catch (const IntegrityError& e) {
        throw IntegrityError(context + ": " + e.what());
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(context + ": " + e.what());
    }
}

}  // namespace

std::vector<Vector> global_features(const Manifest& manifest, const std::vector<const VideoRecord*>& records,
                                    const PipelineConfig& config, const std::optional<EncoderSpec>& encoder,
                                    FeatureCache& cache) {
    const auto segments = effective_segments(config);
    Pooler pooler;
    if (is_encoder(config.method)) {
        if (!encoder) throw ArgumentError(to_string(config.method) + " needs a trained encoder");
        pooler = [&encoder](const FeatureMatrix& seq) { return encode(*encoder, seq); };
    } else {
        pooler = pooler_for(config.method);
    }
    std::vector<Vector> out;
    out.reserve(records.size());
    for (const auto* r : records) {
        const auto seq = apply_sampling(cache.get(manifest.resolve(*r)), config.samples);
        out.push_back(aggregate_segmented(seq, segments, pooler));
    }
    return out;
}

StreamModel train_stream(const Manifest& manifest, Stream stream, const PipelineConfig& config, FeatureCache& cache,
                         TrainingLog& log) {
    const auto tag = to_string(stream);
    return with_context("training " + tag + " stream", [&] {
        const auto records = manifest.select(config.split, SplitRole::train, stream, config.feature_set);
        if (records.empty()) throw ArgumentError("no training videos");
        StreamModel model;
        model.stream = stream;

        const auto first = apply_sampling(cache.get(manifest.resolve(*records.front())), config.samples);
        log.push_back(tag + " train videos " + std::to_string(records.size()) + ", local features per video " +
                      std::to_string(first.rows()) + " (samples=" + to_string(config.samples) + "), dim " +
                      std::to_string(first.cols()));
        log.push_back(tag + " " + segmentation_line(first.rows(), effective_segments(config)));

        if (is_encoder(config.method)) model.encoder = train_encoder(manifest, records, config, tag, cache, log);
        const auto features = global_features(manifest, records, config, model.encoder, cache);
        std::vector<std::size_t> labels;
        for (const auto* r : records) labels.push_back(r->label);

        KernelSpec kernel;
        kernel.kind = effective_kernel(config);
        SvmOptions opts;
        opts.C = config.C;
        model.classifier = train_ovr(features, labels, manifest.classes, kernel, opts, derive_seed(config.seed, tag + "/svm"));
        log.push_back(tag + " classifier: kernel " + to_string(kernel.kind) +
                      (model.classifier.kernel.gamma ? " gamma " + fmt(*model.classifier.kernel.gamma) : std::string()) +
                      " C " + fmt(config.C) + " global dim " + std::to_string(model.classifier.input_dim));
        for (std::size_t c = 0; c < model.classifier.models.size(); ++c) {
            const auto& svm = model.classifier.models[c];
            log.push_back(tag + " svm class " + std::to_string(c) + " iterations " + std::to_string(svm.iterations) +
                          " support vectors " + std::to_string(svm.support_vectors.size()));
        }
        return model;
    });
}

Bundle train_bundle(const Manifest& manifest, PipelineConfig config, FeatureCache& cache) {
    config = resolve_config(std::move(config), manifest);
    Bundle b;
    b.config = config;
    b.manifest_hash = manifest_hash(manifest);
    b.log.push_back("constants: C=" + fmt(config.C) + " pca_dim=" + std::to_string(config.pca_dim) +
                    " clusters=" + std::to_string(config.clusters) + " fusion_weights=" + fmt(kSpatialWeight) + ":" +
                    fmt(kTemporalWeight));
    b.log.push_back("config: method=" + to_string(config.method) + " samples=" + to_string(config.samples) +
                    " segments=" + std::to_string(effective_segments(config)) + " kernel=" +
                    to_string(*config.kernel) + " split=" + config.split + " feature_set=" + config.feature_set +
                    " seed=" + std::to_string(config.seed));
    for (auto stream : manifest.streams(config.feature_set)) {
        b.streams.push_back(train_stream(manifest, stream, config, cache, b.log));
    }
    if (b.streams.empty()) throw ArgumentError("no streams for feature set '" + config.feature_set + "'");
    return b;
}

ScoreMatrix score_stream(const Manifest& manifest, const StreamModel& model, const PipelineConfig& config,
                         FeatureCache& cache) {
    return with_context("scoring " + to_string(model.stream) + " stream", [&] {
        const auto records = manifest.select(config.split, SplitRole::test, model.stream, config.feature_set);
        const auto order = manifest.test_videos(config.split);
        if (records.size() != order.size()) {
            throw IntegrityError("stream has " + std::to_string(records.size()) + " test videos, split has " +
                                 std::to_string(order.size()));
        }
        std::vector<std::string> ids;
        for (const auto* r : records) ids.push_back(r->video_id);
        auto scores = predict_scores(model.classifier, global_features(manifest, records, config, model.encoder, cache), ids);
        if (ids != order) {
            // align to the split's test order
            ScoreMatrix sorted = scores;
            sorted.video_ids = order;
            for (std::size_t i = 0; i < order.size(); ++i) {
                const auto it = std::find(ids.begin(), ids.end(), order[i]);
                if (it == ids.end()) throw IntegrityError("stream lacks test video '" + order[i] + "'");
                sorted.scores.row(static_cast<Eigen::Index>(i)) = scores.scores.row(it - ids.begin());
            }
            return sorted;
        }
        return scores;
    });
}

// ---------------------------------------------------------------- bundle files

void write_bundle(const Bundle& b, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create bundle directory " + dir.string() + ": " + ec.message());
    const auto& c = b.config;
    std::ostringstream meta;
    meta << "format=dovf-bundle-1\n"
         << "manifest_hash=" << b.manifest_hash << '\n'
         << "method=" << to_string(c.method) << '\n'
         << "samples=" << to_string(c.samples) << '\n'
         << "segments=" << c.segments << '\n'
         << "segment_encoders=" << (c.segment_encoders ? 1 : 0) << '\n'
         << "kernel=" << to_string(effective_kernel(c)) << '\n'
         << "C=" << fmt(c.C) << '\n'
         << "pca_dim=" << c.pca_dim << '\n'
         << "clusters=" << c.clusters << '\n'
         << "pca_whiten=" << (c.pca_whiten ? 1 : 0) << '\n'
         << "split=" << c.split << '\n'
         << "feature_set=" << c.feature_set << '\n'
         << "seed=" << c.seed << '\n';
    std::string streams;
    for (const auto& s : b.streams) streams += (streams.empty() ? "" : ",") + to_string(s.stream);
    meta << "streams=" << streams << '\n';
    detail::write_text_file(dir / "bundle.txt", meta.str());

    for (const auto& s : b.streams) {
        const auto tag = to_string(s.stream);
        write_classifier(s.classifier, dir / (tag + ".dovc"));
        if (s.encoder) {
            write_model(s.encoder->pca, dir / (tag + ".pca.dovm"));
            std::visit([&](const auto& cb) { write_model(cb, dir / (tag + ".codebook.dovm")); }, s.encoder->codebook);
        }
    }
    std::string log;
    for (const auto& line : b.log) log += line + '\n';
    detail::write_text_file(dir / "train_log.txt", log);
}

Bundle load_bundle(const std::filesystem::path& dir) {
    std::map<std::string, std::string> kv;
    const auto text = detail::read_text_file(dir / "bundle.txt");
    for (const auto& line : detail::lines(text)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("bundle.txt: bad line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const std::string& key) {
        const auto it = kv.find(key);
        if (it == kv.end()) throw FormatError("bundle.txt: missing key '" + key + "'");
        return it->second;
    };
    auto get_count = [&](const std::string& key) {
        std::uint64_t v = 0;
        if (!detail::parse_int(get(key), v)) throw FormatError("bundle.txt: bad value for '" + key + "'");
        return v;
    };
    if (get("format") != "dovf-bundle-1") throw FormatError("unsupported bundle format '" + get("format") + "'");

    Bundle b;
    b.manifest_hash = get("manifest_hash");
    auto& c = b.config;
    c.method = parse_method(get("method"));
    c.samples = parse_sample_count(get("samples"));
    c.segments = get_count("segments");
    c.segment_encoders = get_count("segment_encoders") != 0;
    c.kernel = parse_kernel(get("kernel"));
    if (!detail::parse_double(get("C"), c.C)) throw FormatError("bundle.txt: bad C");
    c.pca_dim = get_count("pca_dim");
    c.clusters = get_count("clusters");
    c.pca_whiten = get_count("pca_whiten") != 0;
    c.split = get("split");
    c.feature_set = get("feature_set");
    c.seed = get_count("seed");

    for (const auto& name : detail::split(get("streams"), ',')) {
        StreamModel s;
        s.stream = parse_stream(name);
        s.classifier = load_classifier(dir / (name + ".dovc"));
        if (is_encoder(c.method)) {
            EncoderSpec spec;
            spec.kind = c.method;
            spec.pca = load_pca_model(dir / (name + ".pca.dovm"));
            if (c.method == AggregationMethod::fv) {
                spec.codebook = load_gmm_model(dir / (name + ".codebook.dovm"));
            } else {
                spec.codebook = load_kmeans_model(dir / (name + ".codebook.dovm"));
            }
            spec.validate();
            s.encoder = std::move(spec);
        }
        b.streams.push_back(std::move(s));
    }
    if (std::filesystem::exists(dir / "train_log.txt")) {
        for (auto& line : detail::lines(detail::read_text_file(dir / "train_log.txt"))) {
            if (!line.empty()) b.log.push_back(std::move(line));
        }
    }
    return b;
}

// ---------------------------------------------------------------- evaluation

EvalResult evaluate(const Manifest& manifest, const Bundle& bundle, const EvalOptions& options, FeatureCache& cache) {
    const auto& config = bundle.config;
    if (!manifest.has_split(config.split)) throw IntegrityError("manifest has no split '" + config.split + "'");
    EvalResult r;
    r.split = config.split;
    std::map<Stream, ScoreMatrix> per_stream;
    for (const auto& s : bundle.streams) {
        auto scores = score_stream(manifest, s, config, cache);
        r.columns.push_back(to_string(s.stream));
        r.accuracies.push_back(accuracy(scores, manifest, config.split));
        r.scores[to_string(s.stream)] = scores;
        per_stream[s.stream] = std::move(scores);
    }
    const ScoreMatrix* base = nullptr;
    std::string base_name;
    if (per_stream.size() == 2) {
        auto fused = fuse({{&per_stream.at(Stream::spatial), options.spatial_weight},
                           {&per_stream.at(Stream::temporal), options.temporal_weight}});
        r.columns.push_back("fused");
        r.accuracies.push_back(accuracy(fused, manifest, config.split));
        r.scores["fused"] = std::move(fused);
        base = &r.scores.at("fused");
        base_name = "fused";
    } else if (!per_stream.empty()) {
        base = &per_stream.begin()->second;
        base_name = to_string(per_stream.begin()->first);
    }
    for (const auto& ext : options.externals) {
        const auto aligned = normalize_rows_minmax(align_external(ext.scores, manifest, config.split));
        r.columns.push_back(ext.name);
        r.accuracies.push_back(accuracy(aligned, manifest, config.split));
        r.scores[ext.name] = aligned;
        if (base) {
            const auto name = base_name + "+" + ext.name;
            auto fused = fuse({{base, 1.0}, {&aligned, ext.weight}});
            r.columns.push_back(name);
            r.accuracies.push_back(accuracy(fused, manifest, config.split));
            r.scores[name] = std::move(fused);
        }
    }
    return r;
}

std::string format_accuracy(double accuracy) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * accuracy);
    return buf;
}

namespace {

std::string render_table(const std::string& first_header, const std::vector<std::string>& columns,
                         const std::vector<std::pair<std::string, std::vector<std::string>>>& rows) {
    std::vector<std::size_t> width(columns.size() + 1, first_header.size());
    for (std::size_t c = 0; c < columns.size(); ++c) width[c + 1] = columns[c].size();
    for (const auto& [label, cells] : rows) {
        width[0] = std::max(width[0], label.size());
        for (std::size_t c = 0; c < cells.size(); ++c) width[c + 1] = std::max(width[c + 1], cells[c].size());
    }
    auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w - s.size(), ' '); };
    std::string out = pad(first_header, width[0]);
    for (std::size_t c = 0; c < columns.size(); ++c) out += " | " + pad(columns[c], width[c + 1]);
    out += '\n';
    std::string rule(width[0], '-');
    for (std::size_t c = 0; c < columns.size(); ++c) rule += "-+-" + std::string(width[c + 1], '-');
    out += rule + '\n';
    for (const auto& [label, cells] : rows) {
        out += pad(label, width[0]);
        for (std::size_t c = 0; c < cells.size(); ++c) out += " | " + pad(cells[c], width[c + 1]);
        out += '\n';
    }
    return out;
}

}  // namespace

std::string format_eval_table(const EvalResult& result) {
    std::vector<std::string> cells;
    for (double a : result.accuracies) cells.push_back(format_accuracy(a));
    return render_table("split", result.columns, {{result.split, cells}});
}

std::string format_eval_csv(const EvalResult& result) {
    std::string out = "split";
    for (const auto& c : result.columns) out += "," + c;
    out += "\n" + result.split;
    for (double a : result.accuracies) out += "," + format_accuracy(a);
    return out + "\n";
}

SweepAxis parse_sweep_axis(const std::string& text) {
    if (text == "method") return SweepAxis::method;
    if (text == "samples") return SweepAxis::samples;
    throw ArgumentError("sweep axis must be 'method' or 'samples', got '" + text + "'");
}

SweepTable run_sweep(const Manifest& manifest, const PipelineConfig& base, SweepAxis axis,
                     const std::vector<std::string>& values, const EvalOptions& options, FeatureCache& cache) {
    if (values.empty()) throw ArgumentError("sweep needs at least one value");
    // validate every value before spending time on any cell
    for (const auto& v : values) {
        if (axis == SweepAxis::method) {
            parse_method(v);
        } else {
            parse_sample_count(v);
        }
    }
    const auto resolved = resolve_config(base, manifest);
    SweepTable table;
    table.axis = axis;
    for (auto s : manifest.streams(resolved.feature_set)) table.columns.push_back(to_string(s));
    if (table.columns.size() == 2) table.columns.push_back("fused");
    const auto base_name = table.columns.size() == 3 ? std::string("fused") : table.columns.front();
    for (const auto& ext : options.externals) {
        table.columns.push_back(ext.name);
        table.columns.push_back(base_name + "+" + ext.name);
    }

    for (const auto& v : values) {
        SweepRow row;
        row.value = v;
        row.cells.assign(table.columns.size(), std::nullopt);
        try {
            PipelineConfig cfg = base;
            if (axis == SweepAxis::method) {
                cfg.method = parse_method(v);
                if (!base.kernel) cfg.kernel.reset();
            } else {
                cfg.samples = parse_sample_count(v);
            }
            const auto bundle = train_bundle(manifest, cfg, cache);
            const auto result = evaluate(manifest, bundle, options, cache);
            for (std::size_t c = 0; c < table.columns.size(); ++c) {
                const auto it = std::find(result.columns.begin(), result.columns.end(), table.columns[c]);
                if (it != result.columns.end()) row.cells[c] = result.accuracies[static_cast<std::size_t>(it - result.columns.begin())];
            }
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

namespace {

std::vector<std::string> sweep_cells(const SweepRow& row) {
    std::vector<std::string> cells;
    for (const auto& c : row.cells) cells.push_back(c ? format_accuracy(*c) : "ERR");
    return cells;
}

}  // namespace

std::string format_sweep_table(const SweepTable& table) {
    std::vector<std::pair<std::string, std::vector<std::string>>> rows;
    for (const auto& r : table.rows) rows.emplace_back(r.value, sweep_cells(r));
    std::string out = render_table(table.axis == SweepAxis::method ? "method" : "samples", table.columns, rows);
    for (const auto& r : table.rows) {
        if (!r.error.empty()) out += "ERR " + r.value + ": " + r.error + '\n';
    }
    return out;
}

std::string format_sweep_csv(const SweepTable& table) {
    std::string out = table.axis == SweepAxis::method ? "method" : "samples";
    for (const auto& c : table.columns) out += "," + c;
    out += '\n';
    for (const auto& r : table.rows) {
        out += r.value;
        for (const auto& c : sweep_cells(r)) out += "," + c;
        out += '\n';
    }
    return out;
}

}  // namespace dovf
