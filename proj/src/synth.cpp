#include "dovf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <system_error>

#include "dovf/errors.hpp"
#include "dovf/random.hpp"

namespace dovf {

void SynthConfig::validate() const {
    if (classes < 1 || videos_per_class < 1 || frames < 1 || dim < 1) {
        throw ArgumentError("synthetic dataset counts must all be >= 1");
    }
    if (!(action_fraction > 0.0 && action_fraction <= 1.0)) {
        throw ArgumentError("action fraction must lie in (0, 1]");
    }
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw ArgumentError("noise scale must be >= 0");
    if (streams < 1 || streams > 2) throw ArgumentError("stream count must be 1 or 2");
}

std::size_t SynthConfig::action_frames() const {
    const auto n = static_cast<std::size_t>(std::llround(action_fraction * static_cast<double>(frames)));
    return std::clamp<std::size_t>(n, 1, frames);
}

namespace {

Vector normal_vector(std::size_t d, Rng& rng) {
    Vector v(static_cast<Eigen::Index>(d));
    for (auto& x : v) x = standard_normal(rng);
    return v;
}

std::string video_name(std::size_t c, std::size_t v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "c%02zu_v%03zu", c, v);
    return buf;
}

}  // namespace

SynthPrototypes make_prototypes(const SynthConfig& config) {
    config.validate();
    SynthPrototypes p;
    Rng rng(derive_seed(config.seed, "synth/prototypes"));
    for (std::size_t s = 0; s < config.streams; ++s) {
        p.background.push_back(normal_vector(config.dim, rng));
        p.classes.emplace_back();
        for (std::size_t c = 0; c < config.classes; ++c) p.classes[s].push_back(normal_vector(config.dim, rng));
    }
    return p;
}

Manifest generate(const SynthConfig& config, const std::filesystem::path& out_dir) {
    config.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directory(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
    const Stream streams[] = {Stream::spatial, Stream::temporal};
    for (std::size_t s = 0; s < config.streams; ++s) {
        fs::create_directories(out_dir / "features" / to_string(streams[s]), ec);
        if (ec) throw IoError("cannot create feature directory under " + out_dir.string() + ": " + ec.message());
    }

    const auto protos = make_prototypes(config);
    Rng layout_rng(derive_seed(config.seed, "synth/layout"));
    Rng noise_rng(derive_seed(config.seed, "synth/noise"));
    Rng split_rng(derive_seed(config.seed, "synth/split"));

    Manifest m;
    m.base_dir = out_dir;
    for (std::size_t c = 0; c < config.classes; ++c) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "class%02zu", c);
        m.classes.emplace_back(buf);
    }
    m.splits = {kSynthSplit};

    const auto n = config.frames;
    const auto action = config.action_frames();
    const auto train_per_class = (config.videos_per_class + 1) / 2;
    for (std::size_t c = 0; c < config.classes; ++c) {
        std::vector<std::size_t> order(config.videos_per_class);
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle(order.begin(), order.end(), split_rng);
        std::vector<bool> is_train(config.videos_per_class, false);
        for (std::size_t t = 0; t < train_per_class; ++t) is_train[order[t]] = true;

        for (std::size_t v = 0; v < config.videos_per_class; ++v) {
            const auto id = video_name(c, v);
            const auto offset = static_cast<std::size_t>(uniform_index(layout_rng, n - action + 1));
            for (std::size_t s = 0; s < config.streams; ++s) {
                std::vector<float> data(n * config.dim);
                for (std::size_t f = 0; f < n; ++f) {
                    const bool in_action = f >= offset && f < offset + action;
                    const Vector& base = in_action ? protos.classes[s][c] : protos.background[s];
                    for (std::size_t j = 0; j < config.dim; ++j) {
                        const double noise = config.noise > 0 ? config.noise * standard_normal(noise_rng) : 0.0;
                        data[f * config.dim + j] = static_cast<float>(base[static_cast<Eigen::Index>(j)] + noise);
                    }
                }
                const auto rel = fs::path("features") / to_string(streams[s]) / (id + ".dovf");
                write_feature_matrix(FeatureMatrix(n, config.dim, std::move(data)), out_dir / rel);
                m.records.push_back({id, c, kSynthSplit, is_train[v] ? SplitRole::train : SplitRole::test, streams[s],
                                     kSynthFeatureSet, rel});
            }
        }
    }
    validate_manifest(m);
    write_manifest(m, out_dir / "manifest.txt");
    return m;
}

}  // namespace dovf
