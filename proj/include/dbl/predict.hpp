#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dbl/audio.hpp"
#include "dbl/glimpse.hpp"
#include "dbl/loudness.hpp"
#include "dbl/projection.hpp"
#include "dbl/remix.hpp"

namespace dbl {

// Target intelligibility score and the offset added to the LD found for it.
struct PredictorParams {
    double target_score = 0.5;
    double offset_lu = 0.0;

    void validate() const;
};

struct NamedPreset {
    std::string_view name;
    PredictorParams params;
};

// Parameter sets from the literature (baselines) and the refitted ones.
inline constexpr NamedPreset kPresets[] = {
    {"baseline-5.5", {0.5, 5.5}},
    {"baseline-17.7", {0.5, 17.7}},
    {"proposed-13.2", {0.5, 13.2}},
    {"proposed-0.1-22.5", {0.1, 22.5}},
};

std::optional<PredictorParams> find_preset(std::string_view name);

enum class Reached { exact, boundary_low, boundary_high };
std::string_view to_string(Reached reached) noexcept;

struct SearchOptions {
    double tolerance = 0.01;
    double min_attenuation_db = -20.0;
    double max_attenuation_db = 60.0;
    double scan_step_db = 1.0;
    int max_bisections = 60;
};

struct SearchResult {
    double attenuation_db = 0.0;
    double ld_lu = 0.0;
    double score = 0.0;
    Reached reached = Reached::exact;
};

// Score and LD as functions of the background attenuation in dB.
using ScoreFn = std::function<double(double)>;
using LdFn = std::function<double(double)>;

// Coarse scan from low to high attenuation, then bisection inside the first
// bracket whose end points straddle the target. Targets outside the scanned
// score range clamp to the matching end of the attenuation range.
SearchResult search_target(const ScoreFn& score, const LdFn& ld, double target, const SearchOptions& options = {});

struct PredictionItem {
    std::string item_id;
    std::optional<ItemClass> item_class;
    ScoreFn score;
    LdFn ld;
};

enum class LdMode { measured, projected };

struct ItemOptions {
    OimConfig oim;
    LdMode ld_mode = LdMode::measured;
    double gate_threshold_rel = kDefaultGateThresholdLu;
    // Projection references for LdMode::projected; the stems themselves when empty.
    std::optional<StemPair> projection_refs;
    std::size_t projection_taps = kDefaultFilterTaps;
};

// Glimpse-proportion score with the excitation patterns cached; LD is either
// the dialogue-gated stem LD (base + attenuation) or the projected LD of the
// rendered remix.
PredictionItem make_item(std::string item_id, const StemPair& stems, const ItemOptions& options = {},
                         std::optional<ItemClass> item_class = std::nullopt);

SearchResult search_target_ld(const PredictionItem& item, double target, const SearchOptions& options = {});

struct Prediction {
    std::string item_id;
    double attenuation_db = 0.0;
    double searched_ld_lu = 0.0;
    double predicted_pld_lu = 0.0;  // searched_ld_lu + offset
    Reached reached = Reached::exact;
};

Prediction predict_pld(const PredictionItem& item, const PredictorParams& params, const SearchOptions& options = {});

// Applies an offset to an already searched LD.
Prediction make_prediction(const std::string& item_id, const SearchResult& search, double offset_lu);

struct FitOptions {
    std::vector<double> target_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    double offset_min_lu = 0.0;
    double offset_max_lu = 40.0;
    double offset_step_lu = 0.1;
    SearchOptions search;

    std::vector<double> offset_grid() const;
};

struct FitResult {
    PredictorParams params;
    double mae = 0.0;
    std::vector<double> residuals;  // predicted minus ground truth, per item
    std::vector<Prediction> predictions;
    std::size_t item_count = 0;
    std::size_t boundary_items = 0;
};

// searched[t][q]: search result for target_grid[t] on item q.
using SearchTable = std::vector<std::vector<SearchResult>>;

SearchTable build_search_table(const std::vector<PredictionItem>& items, const std::vector<double>& targets,
                               const SearchOptions& options = {});

// Exhaustive (target, offset) grid reduction over a precomputed table. Ties go
// to the smaller target, then the smaller offset.
FitResult fit_search_table(const SearchTable& table, const std::vector<std::string>& item_ids,
                           const std::vector<double>& ground_truth, const FitOptions& options);

FitResult fit_parameters(const std::vector<PredictionItem>& items, const std::vector<double>& ground_truth,
                         const FitOptions& options = {});

// Separate fits per item class (off by default in the pipeline).
std::map<ItemClass, FitResult> fit_parameters_by_class(const std::vector<PredictionItem>& items,
                                                      const std::vector<double>& ground_truth,
                                                      const FitOptions& options = {});

FitResult evaluate_params(const std::vector<PredictionItem>& items, const std::vector<double>& ground_truth,
                          const PredictorParams& params, const SearchOptions& options = {});

// Fills predictions, residuals and MAE for fixed params from search results.
FitResult score_predictions(const std::vector<std::string>& item_ids, const std::vector<SearchResult>& searched,
                            const std::vector<double>& ground_truth, const PredictorParams& params);

}  // namespace dbl
