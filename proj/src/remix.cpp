#include "dbl/remix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <string_view>

#include "dbl/error.hpp"
#include "hash.hpp"

namespace dbl {

std::string_view to_string(ItemClass cls) noexcept {
    switch (cls) {
    case ItemClass::CoM: return "CoM";
    case ItemClass::CoA: return "CoA";
    case ItemClass::DoM: return "DoM";
    case ItemClass::DoA: return "DoA";
    }
    return "CoM";
}

ItemClass parse_item_class(std::string_view name) {
    if (name == "CoM") return ItemClass::CoM;
    if (name == "CoA") return ItemClass::CoA;
    if (name == "DoM") return ItemClass::DoM;
    if (name == "DoA") return ItemClass::DoA;
    throw Error(ErrorCode::InvalidArgument, "unknown item class '" + std::string(name) + "' (CoM|CoA|DoM|DoA)");
}

std::vector<double> standard_grid() {
    std::vector<double> grid(kConditionCount);
    for (int k = 0; k < kConditionCount; ++k) grid[static_cast<std::size_t>(k)] = kConditionStepLu * k;
    return grid;
}

PreparedStems prepare_stems(const StemPair& raw, double target_lufs) {
    Normalized fg = normalize_to(raw.fg, target_lufs);
    Normalized bg = normalize_to(raw.bg, target_lufs);
    return {StemPair(std::move(fg.clip), std::move(bg.clip)), fg.gain_db, bg.gain_db};
}

AudioClip render_condition(const StemPair& stems, double attenuation_lu) {
    return mix(stems.fg, apply_gain_db(stems.bg, -attenuation_lu));
}

ConditionSet render_condition_set(const StemPair& stems, std::string item_id, ItemClass item_class,
                                  const RenderOptions& options) {
    require_same_shape(stems.fg, stems.bg);
    if (options.grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty attenuation grid");

    const GatingMask mask = dialogue_activity(stems.fg, options.gate_threshold_rel);
    const double base_nominal =
        integrated_loudness(stems.fg).integrated_lufs - integrated_loudness(stems.bg).integrated_lufs;

    std::unique_ptr<Projector> projector;
    std::optional<GatingMask> ref_mask;
    if (options.projection_refs != nullptr) {
        projector = std::make_unique<Projector>(*options.projection_refs, options.projection_taps);
        ref_mask = dialogue_activity(options.projection_refs->fg, options.gate_threshold_rel);
    }

    ConditionSet set;
    set.item_id = std::move(item_id);
    set.item_class = item_class;
    for (std::size_t k = 0; k < options.grid.size(); ++k) {
        const double att = options.grid[k];
        Condition c;
        c.index = static_cast<int>(k);
        c.attenuation_lu = att;
        c.nominal_ld_lu = base_nominal + att;
        const StemPair attenuated(stems.fg, apply_gain_db(stems.bg, -att));
        c.measured_ld_lu = measure_ld(attenuated, mask);
        c.audio = mix(attenuated.fg, attenuated.bg);
        if (projector) {
            Decomposition parts = projector->project(c.audio);
            c.projected_ld_lu =
                measure_ld(StemPair(std::move(parts.fg_part), std::move(parts.bg_part)), *ref_mask);
        }
        set.conditions.push_back(std::move(c));
    }

    double peak = 0.0;
    for (const auto& c : set.conditions) peak = std::max(peak, c.audio.peak());
    if (options.peak_limit && peak > *options.peak_limit) {
        set.headroom_db = 20.0 * std::log10(*options.peak_limit / peak);
        for (auto& c : set.conditions) c.audio = apply_gain_db(c.audio, set.headroom_db);
    }
    for (auto& c : set.conditions) {
        c.peak = c.audio.peak();
        c.clipped = c.peak > 1.0;
        set.clipped = set.clipped || c.clipped;
    }
    return set;
}

std::string stimulus_id(std::uint64_t seed, std::string_view item_id, int condition_index) {
    std::uint64_t h = detail::fnv1a64(item_id, detail::splitmix64(seed));
    h = detail::splitmix64(h ^ detail::splitmix64(static_cast<std::uint64_t>(condition_index) + 1));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

SessionManifest build_session(const std::vector<ConditionSet>& items, std::uint64_t seed, std::string subject_slot) {
    if (items.empty()) throw Error(ErrorCode::EmptyItemList, "a session needs at least one item");

    SessionManifest manifest;
    manifest.seed = seed;
    manifest.subject_slot = std::move(subject_slot);

    std::vector<const ConditionSet*> ordered;
    for (const auto& item : items) {
        if (item.trial) ordered.push_back(&item);
    }
    for (const auto& item : items) {
        if (!item.trial) ordered.push_back(&item);
    }

    std::set<std::string_view> seen;
    for (const ConditionSet* set : ordered) {
        if (!seen.insert(set->item_id).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate item id '" + set->item_id + "'");
        }
    }

    const std::uint64_t slot_hash = detail::fnv1a64(manifest.subject_slot);
    for (const ConditionSet* set : ordered) {
        SessionItem item;
        item.item_id = set->item_id;
        item.item_class = set->item_class;
        item.trial = set->trial;
        item.clipped = set->clipped;
        item.headroom_db = set->headroom_db;
        for (const auto& c : set->conditions) {
            Stimulus s;
            s.id = stimulus_id(seed, set->item_id, c.index);
            s.condition_index = c.index;
            s.file = "stimuli/" + set->item_id + "/" + s.id + ".wav";
            item.stimuli.push_back(std::move(s));
        }

        // Fisher-Yates driven by raw engine output.
        std::vector<std::size_t> perm(item.stimuli.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::mt19937_64 rng(detail::splitmix64(seed ^ slot_hash) ^ detail::fnv1a64(set->item_id));
        for (std::size_t i = perm.size(); i > 1; --i) {
            std::swap(perm[i - 1], perm[detail::bounded(rng, i)]);
        }
        for (std::size_t p : perm) item.order.push_back(item.stimuli[p].id);

        std::sort(item.stimuli.begin(), item.stimuli.end(),
                  [](const Stimulus& a, const Stimulus& b) { return a.id < b.id; });
        manifest.items.push_back(std::move(item));
    }
    return manifest;
}

}  // namespace dbl
