#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "dovf/feature_store.hpp"
#include "dovf/types.hpp"

namespace dovf {

/**
 * Synthetic two-stream dataset with false label assignment: only a
 * contiguous block of round(action_fraction * frames) local features per
 * video shows the class prototype, every other frame shows a background
 * prototype shared by all classes. Each frame adds N(0, noise^2) per value.
 */
struct SynthConfig {
    std::size_t classes = 10;
    std::size_t videos_per_class = 40;
    std::size_t frames = 60;
    std::size_t dim = 32;
    double action_fraction = 0.25;
    double noise = 1.0;
    std::size_t streams = 2;  ///< 1 = spatial only, 2 = spatial + temporal
    std::uint64_t seed = 0;

    /// Throws ArgumentError on an invalid combination.
    void validate() const;
    std::size_t action_frames() const;
};

struct SynthPrototypes {
    /// [stream][class] -> d-vector
    std::vector<std::vector<Vector>> classes;
    /// [stream] -> d-vector, shared by every class
    std::vector<Vector> background;
};

SynthPrototypes make_prototypes(const SynthConfig& config);

/**
 * Writes features/<stream>/<video>.dovf and manifest.txt under out_dir
 * (created if missing; its parent must exist) and returns the manifest.
 * Videos are split 50/50 per class into train/test of split "split1".
 */
Manifest generate(const SynthConfig& config, const std::filesystem::path& out_dir);

inline constexpr const char* kSynthFeatureSet = "synth";
inline constexpr const char* kSynthSplit = "split1";

}  // namespace dovf
