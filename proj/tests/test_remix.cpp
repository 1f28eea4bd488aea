#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "dbl/loudness.hpp"
#include "dbl/remix.hpp"
#include "dbl/synth.hpp"
#include "test_util.hpp"

using namespace dbl;
using testutil::error_code_of;

namespace {

// Index-only condition sets; build_session never touches the audio.
ConditionSet stub_set(const std::string& id, bool trial = false) {
    ConditionSet set;
    set.item_id = id;
    set.trial = trial;
    for (int k = 0; k < 8; ++k) {
        Condition c;
        c.index = k;
        c.attenuation_lu = 3.0 * k;
        set.conditions.push_back(std::move(c));
    }
    return set;
}

int condition_of(const SessionItem& item, const std::string& id) {
    for (const auto& s : item.stimuli) {
        if (s.id == id) return s.condition_index;
    }
    return -1;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
        return r;
    };
    const auto rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

StemPair demo_stems(std::uint64_t seed, double secs = 3.0) {
    return prepare_stems(StemPair(synth::speech_like(secs, 2, seed), synth::music_like(secs, 2, seed + 1))).stems;
}

}  // namespace

TEST_CASE("render_condition") {
    const AudioClip d = synth::speech_like(1.0, 2, 1);
    const AudioClip b = synth::ambience_like(1.0, 2, 2);
    const StemPair stems(d, b);
    CHECK(testutil::max_abs_diff(render_condition(stems, 0.0), mix(d, b)) == 0.0);
    const AudioClip r21 = render_condition(stems, 21.0);
    const double beta = std::pow(10.0, -21.0 / 20.0);
    CHECK(beta == doctest::Approx(0.0891).epsilon(0.001));
    CHECK(testutil::max_abs_diff(subtract(r21, d), scale(b, beta)) < 1e-15);

    const GatingMask mask = dialogue_activity(d);
    const double base = measure_ld(stems, mask);
    for (double att : {3.0, 12.0, 21.0}) {
        CHECK(std::abs(measure_ld(StemPair(d, apply_gain_db(b, -att)), mask) - base - att) <= 0.02);
    }
    CHECK_THROWS_AS(StemPair(d, synth::ambience_like(0.5, 2, 2)), Error);
}

TEST_CASE("prepare_stems puts both stems at the reference loudness") {
    const PreparedStems p = prepare_stems(StemPair(synth::speech_like(2.0, 2, 5), synth::music_like(2.0, 2, 6)));
    CHECK(std::abs(integrated_loudness(p.stems.fg).integrated_lufs - kReferenceLoudnessLufs) <= 0.05);
    CHECK(std::abs(integrated_loudness(p.stems.bg).integrated_lufs - kReferenceLoudnessLufs) <= 0.05);
}

TEST_CASE("render_condition_set") {
    const StemPair stems = demo_stems(11);
    RenderOptions opts;
    opts.projection_refs = &stems;
    opts.projection_taps = 64;
    const ConditionSet set = render_condition_set(stems, "it", ItemClass::DoM, opts);
    REQUIRE(set.conditions.size() == 8);
    for (std::size_t k = 0; k < 8; ++k) {
        const Condition& c = set.conditions[k];
        CHECK(c.index == static_cast<int>(k));
        CHECK(c.attenuation_lu == 3.0 * k);
        CHECK(std::abs(c.nominal_ld_lu - 3.0 * k) <= 0.05);
        CHECK(std::abs(c.measured_ld_lu - set.conditions[0].measured_ld_lu - 3.0 * k) <= 0.05);
        REQUIRE(c.projected_ld_lu.has_value());
        CHECK(std::abs(*c.projected_ld_lu - c.measured_ld_lu) <= 0.2);
        if (k > 0) {
            CHECK(c.measured_ld_lu > set.conditions[k - 1].measured_ld_lu);
            CHECK(energy(subtract(c.audio, stems.fg)) < energy(subtract(set.conditions[k - 1].audio, stems.fg)));
        }
    }
    CHECK(set.item_id == "it");
    CHECK(set.item_class == ItemClass::DoM);
    CHECK(standard_grid() == std::vector<double>{0, 3, 6, 9, 12, 15, 18, 21});

    RenderOptions bad;
    bad.grid.clear();
    CHECK(error_code_of([&] { render_condition_set(stems, "x", ItemClass::CoM, bad); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("render_condition_set: clipping and headroom") {
    const StemPair raw = demo_stems(21, 2.0);
    const StemPair loud(apply_gain_db(raw.fg, 24.0), apply_gain_db(raw.bg, 24.0));
    const ConditionSet flagged = render_condition_set(loud, "a", ItemClass::CoM);
    CHECK(flagged.clipped);
    CHECK(flagged.headroom_db == 0.0);
    CHECK(flagged.conditions[0].clipped);

    RenderOptions opts;
    opts.peak_limit = 1.0;
    const ConditionSet limited = render_condition_set(loud, "a", ItemClass::CoM, opts);
    CHECK_FALSE(limited.clipped);
    CHECK(limited.headroom_db < 0.0);
    for (std::size_t k = 0; k < 8; ++k) {
        CHECK(limited.conditions[k].peak <= 1.0 + 1e-12);
        CHECK(limited.conditions[k].measured_ld_lu == flagged.conditions[k].measured_ld_lu);
        CHECK(limited.conditions[k].audio.peak() ==
              doctest::Approx(flagged.conditions[k].audio.peak() * std::pow(10.0, limited.headroom_db / 20.0)));
    }
}

TEST_CASE("stimulus ids") {
    std::set<std::string> ids;
    for (int k = 0; k < 8; ++k) {
        const std::string id = stimulus_id(5, "item", k);
        CHECK(id.size() == 16);
        CHECK(id.find_first_not_of("0123456789abcdef") == std::string::npos);
        ids.insert(id);
    }
    CHECK(ids.size() == 8);
    CHECK(stimulus_id(5, "item", 3) == stimulus_id(5, "item", 3));
    CHECK(stimulus_id(5, "item", 3) != stimulus_id(6, "item", 3));
    CHECK(stimulus_id(5, "item", 3) != stimulus_id(5, "other", 3));

    // No monotone relation between id order and condition index.
    double mean_rho = 0.0;
    const int seeds = 400;
    for (int s = 0; s < seeds; ++s) {
        std::vector<double> idx, key;
        for (int k = 0; k < 8; ++k) {
            idx.push_back(k);
            key.push_back(static_cast<double>(std::stoull(stimulus_id(static_cast<std::uint64_t>(s), "x", k).substr(0, 12), nullptr, 16)));
        }
        mean_rho += spearman(idx, key);
    }
    mean_rho /= seeds;
    CHECK(std::abs(mean_rho) < 0.05);
}

TEST_CASE("build_session") {
    const std::vector<ConditionSet> sets = {stub_set("a"), stub_set("b"), stub_set("warmup", true)};
    const SessionManifest m1 = build_session(sets, 42, "S03");
    const SessionManifest m2 = build_session(sets, 42, "S03");
    REQUIRE(m1.items.size() == 3);
    CHECK(m1.items[0].item_id == "warmup");
    CHECK(m1.items[0].trial);
    CHECK(m1.items[1].item_id == "a");
    CHECK(m1.seed == 42);
    CHECK(m1.subject_slot == "S03");
    for (std::size_t i = 0; i < m1.items.size(); ++i) {
        const SessionItem& it = m1.items[i];
        CHECK(it.order == m2.items[i].order);
        REQUIRE(it.order.size() == 8);
        std::set<int> seen;
        for (const auto& id : it.order) seen.insert(condition_of(it, id));
        CHECK(seen == std::set<int>{0, 1, 2, 3, 4, 5, 6, 7});
        CHECK(std::is_sorted(it.stimuli.begin(), it.stimuli.end(),
                             [](const Stimulus& x, const Stimulus& y) { return x.id < y.id; }));
        for (const auto& s : it.stimuli) CHECK(s.file == "stimuli/" + it.item_id + "/" + s.id + ".wav");
    }
    // Same files for every slot, different orders somewhere.
    const SessionManifest other = build_session(sets, 42, "S04");
    bool differs = false;
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(other.items[i].stimuli.size() == m1.items[i].stimuli.size());
        for (std::size_t k = 0; k < 8; ++k) CHECK(other.items[i].stimuli[k].id == m1.items[i].stimuli[k].id);
        differs = differs || other.items[i].order != m1.items[i].order;
    }
    CHECK(differs);

    CHECK(error_code_of([] { build_session({}, 1); }) == ErrorCode::EmptyItemList);
    CHECK(error_code_of([] { build_session({stub_set("a"), stub_set("a")}, 1); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("presentation order is uniform over seeds") {
    const std::vector<ConditionSet> sets = {stub_set("item")};
    const int trials = 1000;
    std::vector<int> first(8, 0);
    for (int s = 0; s < trials; ++s) {
        const SessionManifest m = build_session(sets, static_cast<std::uint64_t>(s));
        ++first[static_cast<std::size_t>(condition_of(m.items[0], m.items[0].order[0]))];
    }
    const double p = 1.0 / 8.0;
    const double sigma = std::sqrt(trials * p * (1 - p));
    for (int k = 0; k < 8; ++k) CHECK(std::abs(first[static_cast<std::size_t>(k)] - trials * p) <= 3.0 * sigma);
}

TEST_CASE("item classes") {
    for (ItemClass c : {ItemClass::CoM, ItemClass::CoA, ItemClass::DoM, ItemClass::DoA}) {
        CHECK(parse_item_class(to_string(c)) == c);
    }
    CHECK(error_code_of([] { parse_item_class("XoX"); }) == ErrorCode::InvalidArgument);
}
