#include "dovf/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <ostream>

#include "binary_io.hpp"
#include "dovf/errors.hpp"
#include "dovf/pipeline.hpp"
#include "dovf/synth.hpp"
#include "text_util.hpp"

namespace dovf {

namespace {

/// Bad flag values found before any work starts.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename Fn>
auto usage_checked(Fn&& fn) {
    try {
        return fn();
    } catch (const ArgumentError& e) {
        throw UsageError(e.what());
    }
}

struct TrainFlags {
    std::string manifest;
    std::string method = "max";
    std::string samples = "25";
    std::size_t segments = 3;
    bool segment_encoders = false;
    std::string kernel = "auto";
    double C = kDefaultC;
    std::size_t pca_dim = kDefaultPcaDim;
    std::size_t clusters = kDefaultClusters;
    bool pca_whiten = false;
    std::string split;
    std::string feature_set;
    std::uint64_t seed = 0;

    void add_to(CLI::App* app, bool with_method) {
        app->add_option("--manifest", manifest, "Dataset manifest")->required();
        if (with_method) {
            app->add_option("--method", method, "mean | max | mean_std | bow | vlad | fv")->capture_default_str();
            app->add_option("--samples", samples, "Local features per video, or 'dense'")->capture_default_str();
        }
        app->add_option("--segments", segments, "Temporal segments per video")->capture_default_str();
        app->add_flag("--segment-encoders", segment_encoders, "Also segment bow/vlad/fv");
        app->add_option("--kernel", kernel, "auto | linear | chi2 | chi2_additive")->capture_default_str();
        app->add_option("--C", C, "SVM cost")->capture_default_str();
        app->add_option("--pca-dim", pca_dim, "PCA dimension for encoders")->capture_default_str();
        app->add_option("--clusters", clusters, "Codebook size for encoders")->capture_default_str();
        app->add_flag("--pca-whiten", pca_whiten, "Whiten PCA projections");
        app->add_option("--split", split, "Split name (default: first in manifest)");
        app->add_option("--feature-set", feature_set, "Feature set tag (default: the only one)");
        app->add_option("--seed", seed, "Root random seed")->capture_default_str();
    }

    PipelineConfig config() const {
        return usage_checked([&] {
            PipelineConfig c;
            c.method = parse_method(method);
            c.samples = parse_sample_count(samples);
            c.segments = segments;
            if (segments < 1) throw ArgumentError("--segments must be >= 1");
            c.segment_encoders = segment_encoders;
            if (kernel != "auto") c.kernel = parse_kernel(kernel);
            if (!(C > 0)) throw ArgumentError("--C must be positive");
            c.C = C;
            if (pca_dim < 1 || clusters < 1) throw ArgumentError("--pca-dim and --clusters must be >= 1");
            c.pca_dim = pca_dim;
            c.clusters = clusters;
            c.pca_whiten = pca_whiten;
            c.split = split;
            c.feature_set = feature_set;
            c.seed = seed;
            return c;
        });
    }
};

struct FusionFlags {
    std::string weights = "1,1.5";
    std::vector<std::string> externals;
    double external_weight = 1.0;

    void add_to(CLI::App* app) {
        app->add_option("--fusion-weights", weights, "Spatial,temporal late-fusion weights")->capture_default_str();
        app->add_option("--external-scores", externals, "Score CSV(s) from other systems to fuse with");
        app->add_option("--external-weight", external_weight, "Weight of each external score file")->capture_default_str();
    }

    EvalOptions options() const {
        EvalOptions o;
        usage_checked([&] {
            const auto parts = detail::split(weights, ',');
            if (parts.size() != 2 || !detail::parse_double(parts[0], o.spatial_weight) ||
                !detail::parse_double(parts[1], o.temporal_weight) || o.spatial_weight < 0 || o.temporal_weight < 0 ||
                o.spatial_weight + o.temporal_weight <= 0) {
                throw ArgumentError("--fusion-weights expects two non-negative numbers, got '" + weights + "'");
            }
            if (!(external_weight >= 0)) throw ArgumentError("--external-weight must be >= 0");
            return 0;
        });
        for (const auto& path : externals) {
            o.externals.push_back({std::filesystem::path(path).stem().string(), load_scores(path), external_weight});
        }
        return o;
    }
};

int cmd_synth(const SynthConfig& config, const std::string& out_dir, std::ostream& out) {
    usage_checked([&] {
        config.validate();
        return 0;
    });
    const auto manifest = generate(config, out_dir);
    out << "wrote " << manifest.records.size() << " feature files and " << (std::filesystem::path(out_dir) / "manifest.txt").string()
        << " (" << config.action_frames() << " action frames of " << config.frames << " per video)\n";
    return kExitOk;
}

int cmd_train(const TrainFlags& flags, const std::string& out_dir, std::ostream& out) {
    const auto config = flags.config();
    const auto manifest = load_manifest(flags.manifest);
    FeatureCache cache;
    const auto bundle = train_bundle(manifest, config, cache);
    write_bundle(bundle, out_dir);
    for (const auto& line : bundle.log) {
        if (line.find(" iter ") == std::string::npos) out << line << '\n';
    }
    out << "bundle written to " << out_dir << '\n';
    return kExitOk;
}

int cmd_eval(const std::string& manifest_path, const std::string& bundle_dir, const FusionFlags& fusion, bool force,
             const std::string& out_dir, std::ostream& out, std::ostream& err) {
    const auto manifest = load_manifest(manifest_path);
    const auto options = fusion.options();
    const auto bundle = load_bundle(bundle_dir);
    if (bundle.manifest_hash != manifest_hash(manifest)) {
        if (!force) {
            throw IntegrityError("bundle was trained on a different manifest (hash " + bundle.manifest_hash + ", now " +
                                 manifest_hash(manifest) + "); use --force to evaluate anyway");
        }
        err << "warning: manifest hash mismatch ignored (--force)\n";
    }
    FeatureCache cache;
    const auto result = evaluate(manifest, bundle, options, cache);
    if (std::find(result.columns.begin(), result.columns.end(), "fused") != result.columns.end()) {
        out << "fusion weights spatial:temporal = " << detail::format_double(options.spatial_weight) << ":"
            << detail::format_double(options.temporal_weight) << "\n";
    }
    out << format_eval_table(result);
    if (!out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
        detail::write_text_file(std::filesystem::path(out_dir) / "accuracy.csv", format_eval_csv(result));
        for (const auto& [name, scores] : result.scores) {
            write_scores(scores, std::filesystem::path(out_dir) / ("scores_" + name + ".csv"));
        }
    }
    return kExitOk;
}

int cmd_sweep(const TrainFlags& flags, const std::string& axis_text, const std::string& values_text,
              const FusionFlags& fusion, const std::string& out_dir, std::ostream& out) {
    const auto axis = usage_checked([&] { return parse_sweep_axis(axis_text); });
    std::vector<std::string> values;
    for (auto& v : detail::split(values_text, ',')) {
        if (!v.empty()) values.push_back(v);
    }
    if (values.empty()) throw UsageError("--values needs at least one entry");
    usage_checked([&] {
        for (const auto& v : values) {
            if (axis == SweepAxis::method) {
                parse_method(v);
            } else {
                parse_sample_count(v);
            }
        }
        return 0;
    });
    auto config = flags.config();
    const auto manifest = load_manifest(flags.manifest);
    const auto options = fusion.options();
    FeatureCache cache;
    const auto table = run_sweep(manifest, config, axis, values, options, cache);
    out << format_sweep_table(table);
    if (!out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
        detail::write_text_file(std::filesystem::path(out_dir) / "sweep.csv", format_sweep_csv(table));
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Aggregate local video features, train one-vs-rest SVMs and fuse two-stream scores"};
    app.require_subcommand(1);

    SynthConfig synth;
    std::string synth_out;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic two-stream dataset");
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();
    synth_cmd->add_option("--classes", synth.classes)->capture_default_str();
    synth_cmd->add_option("--videos-per-class", synth.videos_per_class)->capture_default_str();
    synth_cmd->add_option("--frames", synth.frames, "Local features per video")->capture_default_str();
    synth_cmd->add_option("--dim", synth.dim)->capture_default_str();
    synth_cmd->add_option("--action-fraction", synth.action_fraction, "Share of frames showing the action")
        ->capture_default_str();
    synth_cmd->add_option("--noise", synth.noise, "Per-value Gaussian noise scale")->capture_default_str();
    synth_cmd->add_option("--streams", synth.streams, "1 or 2")->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed)->capture_default_str();

    TrainFlags train;
    std::string train_out;
    auto* train_cmd = app.add_subcommand("train", "Train codebooks and classifiers into a model bundle");
    train.add_to(train_cmd, true);
    train_cmd->add_option("--out", train_out, "Bundle directory")->required();

    std::string eval_manifest;
    std::string eval_bundle;
    std::string eval_out;
    bool eval_force = false;
    FusionFlags eval_fusion;
    auto* eval_cmd = app.add_subcommand("eval", "Score test videos, fuse streams and report accuracy");
    eval_cmd->add_option("--manifest", eval_manifest)->required();
    eval_cmd->add_option("--bundle", eval_bundle)->required();
    eval_cmd->add_flag("--force", eval_force, "Accept a bundle trained on a different manifest");
    eval_cmd->add_option("--out", eval_out, "Directory for accuracy.csv and score files");
    eval_fusion.add_to(eval_cmd);

    TrainFlags sweep;
    std::string sweep_axis;
    std::string sweep_values;
    std::string sweep_out;
    FusionFlags sweep_fusion;
    auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate over a list of methods or sample counts");
    sweep.add_to(sweep_cmd, true);
    sweep_cmd->add_option("--axis", sweep_axis, "method | samples")->required();
    sweep_cmd->add_option("--values", sweep_values, "Comma-separated values, e.g. 3,9,15,21,25,dense")->required();
    sweep_cmd->add_option("--out", sweep_out, "Directory for sweep.csv");
    sweep_fusion.add_to(sweep_cmd);

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth, synth_out, out);
        if (train_cmd->parsed()) return cmd_train(train, train_out, out);
        if (eval_cmd->parsed()) return cmd_eval(eval_manifest, eval_bundle, eval_fusion, eval_force, eval_out, out, err);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep, sweep_axis, sweep_values, sweep_fusion, sweep_out, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace dovf
