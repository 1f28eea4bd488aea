#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "dbl/audio.hpp"

namespace dbl {

// Measurement grid shared by block loudness and dialogue gating.
inline constexpr double kBlockSeconds = 0.4;
inline constexpr double kHopSeconds = 0.1;
inline constexpr int kLoudnessRate = 48000;
inline constexpr double kDefaultGateThresholdLu = 20.0;

struct BlockLoudness {
    double start_s = 0.0;
    std::optional<double> lufs;  // empty for digital silence
};

struct LoudnessReport {
    double integrated_lufs = 0.0;
    std::vector<BlockLoudness> blocks;
    bool gated = false;
};

// Per-block activity on the 400 ms / 100 ms grid, derived from a dialogue stem.
struct GatingMask {
    std::vector<bool> active;
    std::size_t source_length = 0;
    int sample_rate = kLoudnessRate;
    double threshold_rel = kDefaultGateThresholdLu;

    std::size_t active_count() const noexcept;
};

struct BlockGrid {
    std::size_t block_len = 0;
    std::size_t hop = 0;
    std::size_t count = 0;
};

// Blocks start every hop; a clip shorter than one block yields a single
// partial block covering the whole clip.
BlockGrid block_grid(std::size_t length, int sample_rate);

// BS.1770-1 pre-filter (high shelf) followed by the RLB high-pass. 48 kHz only.
AudioClip k_weight(const AudioClip& clip);

// Ungated BS.1770-1 integrated loudness (no level gating).
LoudnessReport integrated_loudness(const AudioClip& clip);

// Integrated loudness over the union of the mask's active block spans.
LoudnessReport integrated_loudness(const AudioClip& clip, const GatingMask& mask);

// Block b is active iff its loudness is at least the ungated integrated
// loudness of fg minus threshold_rel.
GatingMask dialogue_activity(const AudioClip& fg, double threshold_rel = kDefaultGateThresholdLu);

struct Normalized {
    AudioClip clip;
    double gain_db = 0.0;
};

Normalized normalize_to(const AudioClip& clip, double target_lufs);

// Gated loudness of fg minus gated loudness of bg; higher means a quieter background.
double measure_ld(const StemPair& stems, const GatingMask& mask);

}  // namespace dbl
