#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dbl/audio.hpp"
#include "dbl/loudness.hpp"
#include "dbl/projection.hpp"

namespace dbl {

inline constexpr double kReferenceLoudnessLufs = -23.0;
inline constexpr double kConditionStepLu = 3.0;
inline constexpr int kConditionCount = 8;

enum class ItemClass { CoM, CoA, DoM, DoA };

std::string_view to_string(ItemClass cls) noexcept;
ItemClass parse_item_class(std::string_view name);

// {0, 3, ..., 21} LU.
std::vector<double> standard_grid();

// Both stems normalized to the reference loudness, i.e. a 0 LU starting
// difference before any background attenuation.
struct PreparedStems {
    StemPair stems;
    double fg_gain_db = 0.0;
    double bg_gain_db = 0.0;
};

PreparedStems prepare_stems(const StemPair& raw, double target_lufs = kReferenceLoudnessLufs);

// fg + 10^(-attenuation/20) * bg. Samples are not limited.
AudioClip render_condition(const StemPair& stems, double attenuation_lu);

struct Condition {
    int index = 0;
    double attenuation_lu = 0.0;
    double nominal_ld_lu = 0.0;   // ungated LD of the stems plus attenuation
    double measured_ld_lu = 0.0;  // dialogue-gated LD of (fg, attenuated bg)
    std::optional<double> projected_ld_lu;
    double peak = 0.0;  // after headroom gain
    bool clipped = false;
    AudioClip audio;
};

struct ConditionSet {
    std::string item_id;
    ItemClass item_class = ItemClass::CoM;
    bool trial = false;
    double headroom_db = 0.0;  // common gain applied to every stimulus of the item
    bool clipped = false;
    std::vector<Condition> conditions;
};

struct RenderOptions {
    std::vector<double> grid = standard_grid();
    double gate_threshold_rel = kDefaultGateThresholdLu;
    // When set, a common negative gain keeps every stimulus at or below this peak.
    std::optional<double> peak_limit;
    // Projected LDs are computed when reference stems are supplied. Pass the
    // rendered stems themselves when no separate originals exist.
    const StemPair* projection_refs = nullptr;
    std::size_t projection_taps = kDefaultFilterTaps;
};

ConditionSet render_condition_set(const StemPair& stems, std::string item_id, ItemClass item_class,
                                  const RenderOptions& options = {});

struct Stimulus {
    std::string id;
    int condition_index = 0;
    std::string file;  // relative to the run directory
};

struct SessionItem {
    std::string item_id;
    ItemClass item_class = ItemClass::CoM;
    bool trial = false;
    bool clipped = false;
    double headroom_db = 0.0;
    std::vector<Stimulus> stimuli;   // sorted by id
    std::vector<std::string> order;  // stimulus ids in presentation order
};

struct SessionManifest {
    std::uint64_t seed = 0;
    std::string subject_slot;
    std::vector<SessionItem> items;
};

// Opaque, seed-dependent stimulus id; carries no information about the condition.
std::string stimulus_id(std::uint64_t seed, std::string_view item_id, int condition_index);

// Deterministic in (seed, slot). Trial items come first, then the rest in input order.
SessionManifest build_session(const std::vector<ConditionSet>& items, std::uint64_t seed,
                              std::string subject_slot = "S01");

}  // namespace dbl
