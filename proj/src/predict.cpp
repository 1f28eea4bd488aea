#include "dbl/predict.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "dbl/error.hpp"

namespace dbl {

void PredictorParams::validate() const {
    if (!(target_score >= 0.0 && target_score <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "target score must lie in [0, 1]");
    }
    if (!std::isfinite(offset_lu)) throw Error(ErrorCode::InvalidArgument, "offset must be finite");
}

std::optional<PredictorParams> find_preset(std::string_view name) {
    for (const auto& p : kPresets) {
        if (p.name == name) return p.params;
    }
    return std::nullopt;
}

std::string_view to_string(Reached reached) noexcept {
    switch (reached) {
    case Reached::exact: return "exact";
    case Reached::boundary_low: return "boundary_low";
    case Reached::boundary_high: return "boundary_high";
    }
    return "exact";
}

namespace {

double evaluate(const ScoreFn& score, double attenuation) {
    const double s = score(attenuation);
    if (!std::isfinite(s)) {
        throw Error(ErrorCode::NonEvaluable, "score is not finite at " + std::to_string(attenuation) + " dB");
    }
    return s;
}

}  // namespace

SearchResult search_target(const ScoreFn& score, const LdFn& ld, double target, const SearchOptions& options) {
    if (!(target >= 0.0 && target <= 1.0)) throw Error(ErrorCode::InvalidArgument, "target score must lie in [0, 1]");
    if (!(options.scan_step_db > 0.0) || !(options.max_attenuation_db > options.min_attenuation_db)) {
        throw Error(ErrorCode::InvalidArgument, "invalid attenuation range");
    }
    const double tol = options.tolerance;
    const auto steps =
        static_cast<int>(std::llround((options.max_attenuation_db - options.min_attenuation_db) / options.scan_step_db));

    auto finish = [&](double attenuation, double s, Reached reached) {
        return SearchResult{attenuation, ld(attenuation), s, reached};
    };

    double prev_a = 0.0, prev_f = 0.0;
    for (int k = 0; k <= steps; ++k) {
        const double a = k == steps ? options.max_attenuation_db : options.min_attenuation_db + k * options.scan_step_db;
        const double s = evaluate(score, a);
        const double f = s - target;
        if (std::abs(f) <= tol) return finish(a, s, Reached::exact);
        if (k > 0 && (prev_f < 0.0) != (f < 0.0)) {
            double lo = prev_a, hi = a, f_lo = prev_f;
            for (int i = 0; i < options.max_bisections; ++i) {
                const double mid = 0.5 * (lo + hi);
                const double sm = evaluate(score, mid);
                const double fm = sm - target;
                if (std::abs(fm) <= tol) return finish(mid, sm, Reached::exact);
                if ((fm < 0.0) == (f_lo < 0.0)) {
                    lo = mid;
                    f_lo = fm;
                } else {
                    hi = mid;
                }
            }
            throw Error(ErrorCode::NonEvaluable, "score jumps across the tolerance window near " +
                                                     std::to_string(0.5 * (lo + hi)) + " dB");
        }
        prev_a = a;
        prev_f = f;
    }
    // No crossing: every scanned score lies on one side of the target.
    if (prev_f > 0.0) {
        return finish(options.min_attenuation_db, evaluate(score, options.min_attenuation_db), Reached::boundary_low);
    }
    return finish(options.max_attenuation_db, evaluate(score, options.max_attenuation_db), Reached::boundary_high);
}

PredictionItem make_item(std::string item_id, const StemPair& stems, const ItemOptions& options,
                         std::optional<ItemClass> item_class) {
    require_same_shape(stems.fg, stems.bg);
    auto scorer = std::make_shared<const GlimpseScorer>(stems, options.oim);

    PredictionItem item;
    item.item_id = std::move(item_id);
    item.item_class = item_class;
    item.score = [scorer](double attenuation) { return scorer->score(attenuation).value; };

    if (options.ld_mode == LdMode::measured) {
        const GatingMask mask = dialogue_activity(stems.fg, options.gate_threshold_rel);
        const double base = measure_ld(stems, mask);
        item.ld = [base](double attenuation) { return base + attenuation; };
    } else {
        const StemPair& refs = options.projection_refs ? *options.projection_refs : stems;
        auto projector = std::make_shared<const Projector>(refs, options.projection_taps);
        auto mask = std::make_shared<const GatingMask>(dialogue_activity(refs.fg, options.gate_threshold_rel));
        auto owned = std::make_shared<const StemPair>(stems);
        item.ld = [projector, mask, owned](double attenuation) {
            Decomposition parts = projector->project(render_condition(*owned, attenuation));
            return measure_ld(StemPair(std::move(parts.fg_part), std::move(parts.bg_part)), *mask);
        };
    }
    return item;
}

SearchResult search_target_ld(const PredictionItem& item, double target, const SearchOptions& options) {
    return search_target(item.score, item.ld, target, options);
}

Prediction make_prediction(const std::string& item_id, const SearchResult& search, double offset_lu) {
    return {item_id, search.attenuation_db, search.ld_lu, search.ld_lu + offset_lu, search.reached};
}

Prediction predict_pld(const PredictionItem& item, const PredictorParams& params, const SearchOptions& options) {
    params.validate();
    return make_prediction(item.item_id, search_target_ld(item, params.target_score, options), params.offset_lu);
}

std::vector<double> FitOptions::offset_grid() const {
    if (!(offset_step_lu > 0.0) || offset_max_lu < offset_min_lu) {
        throw Error(ErrorCode::InvalidArgument, "invalid offset grid");
    }
    const auto count = static_cast<std::size_t>(std::floor((offset_max_lu - offset_min_lu) / offset_step_lu + 1e-9)) + 1;
    std::vector<double> grid(count);
    for (std::size_t k = 0; k < count; ++k) {
        grid[k] = std::round((offset_min_lu + static_cast<double>(k) * offset_step_lu) * 1e9) / 1e9;
    }
    return grid;
}

SearchTable build_search_table(const std::vector<PredictionItem>& items, const std::vector<double>& targets,
                               const SearchOptions& options) {
    SearchTable table;
    table.reserve(targets.size());
    for (double target : targets) {
        std::vector<SearchResult> row;
        row.reserve(items.size());
        for (const auto& item : items) row.push_back(search_target_ld(item, target, options));
        table.push_back(std::move(row));
    }
    return table;
}

FitResult score_predictions(const std::vector<std::string>& item_ids, const std::vector<SearchResult>& searched,
                            const std::vector<double>& ground_truth, const PredictorParams& params) {
    if (item_ids.empty()) throw Error(ErrorCode::NoItems, "no items to evaluate");
    if (searched.size() != item_ids.size() || ground_truth.size() != item_ids.size()) {
        throw Error(ErrorCode::ShapeMismatch, "items, search results and ground truth differ in count");
    }
    FitResult result;
    result.params = params;
    result.item_count = item_ids.size();
    double sum = 0.0;
    for (std::size_t q = 0; q < item_ids.size(); ++q) {
        Prediction p = make_prediction(item_ids[q], searched[q], params.offset_lu);
        const double residual = p.predicted_pld_lu - ground_truth[q];
        sum += std::abs(residual);
        if (p.reached != Reached::exact) ++result.boundary_items;
        result.residuals.push_back(residual);
        result.predictions.push_back(std::move(p));
    }
    result.mae = sum / static_cast<double>(item_ids.size());
    return result;
}

namespace {

void check_truth(std::size_t items, const std::vector<double>& ground_truth) {
    if (items == 0) throw Error(ErrorCode::NoItems, "fit needs at least one item");
    if (ground_truth.size() != items) throw Error(ErrorCode::ShapeMismatch, "one ground-truth PLD per item required");
    for (double g : ground_truth) {
        if (!std::isfinite(g)) throw Error(ErrorCode::InvalidArgument, "ground truth must be finite");
    }
}

}  // namespace

FitResult fit_search_table(const SearchTable& table, const std::vector<std::string>& item_ids,
                           const std::vector<double>& ground_truth, const FitOptions& options) {
    check_truth(item_ids.size(), ground_truth);
    if (table.size() != options.target_grid.size() || table.empty()) {
        throw Error(ErrorCode::ShapeMismatch, "search table does not match the target grid");
    }
    bool any_exact = false;
    for (const auto& row : table) {
        if (row.size() != item_ids.size()) throw Error(ErrorCode::ShapeMismatch, "search table row size mismatch");
        for (const auto& r : row) any_exact = any_exact || r.reached == Reached::exact;
    }
    if (!any_exact) {
        throw Error(ErrorCode::AllUnreachable, "every item is boundary-clamped for every target score");
    }

    const std::vector<double> offsets = options.offset_grid();
    const auto q = static_cast<double>(item_ids.size());
    std::size_t best_t = 0, best_e = 0;
    double best_mae = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < table.size(); ++t) {
        for (std::size_t e = 0; e < offsets.size(); ++e) {
            double sum = 0.0;
            for (std::size_t i = 0; i < item_ids.size(); ++i) {
                sum += std::abs((table[t][i].ld_lu + offsets[e]) - ground_truth[i]);
            }
            const double mae = sum / q;
            if (mae < best_mae) {
                best_mae = mae;
                best_t = t;
                best_e = e;
            }
        }
    }
    return score_predictions(item_ids, table[best_t], ground_truth, {options.target_grid[best_t], offsets[best_e]});
}

FitResult fit_parameters(const std::vector<PredictionItem>& items, const std::vector<double>& ground_truth,
                         const FitOptions& options) {
    check_truth(items.size(), ground_truth);
    for (double t : options.target_grid) PredictorParams{t, 0.0}.validate();
    std::vector<std::string> ids;
    for (const auto& item : items) ids.push_back(item.item_id);
    return fit_search_table(build_search_table(items, options.target_grid, options.search), ids, ground_truth, options);
}

std::map<ItemClass, FitResult> fit_parameters_by_class(const std::vector<PredictionItem>& items,
                                                      const std::vector<double>& ground_truth,
                                                      const FitOptions& options) {
    check_truth(items.size(), ground_truth);
    std::map<ItemClass, std::pair<std::vector<PredictionItem>, std::vector<double>>> groups;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!items[i].item_class) {
            throw Error(ErrorCode::InvalidArgument, "item '" + items[i].item_id + "' has no class label");
        }
        auto& g = groups[*items[i].item_class];
        g.first.push_back(items[i]);
        g.second.push_back(ground_truth[i]);
    }
    std::map<ItemClass, FitResult> fits;
    for (const auto& [cls, group] : groups) fits.emplace(cls, fit_parameters(group.first, group.second, options));
    return fits;
}

FitResult evaluate_params(const std::vector<PredictionItem>& items, const std::vector<double>& ground_truth,
                          const PredictorParams& params, const SearchOptions& options) {
    check_truth(items.size(), ground_truth);
    params.validate();
    std::vector<std::string> ids;
    std::vector<SearchResult> searched;
    for (const auto& item : items) {
        ids.push_back(item.item_id);
        searched.push_back(search_target_ld(item, params.target_score, options));
    }
    return score_predictions(ids, searched, ground_truth, params);
}

}  // namespace dbl
