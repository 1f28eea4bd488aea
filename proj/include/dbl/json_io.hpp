#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbl/analysis.hpp"
#include "dbl/glimpse.hpp"
#include "dbl/loudness.hpp"
#include "dbl/predict.hpp"
#include "dbl/remix.hpp"

// JSON encodings of reports, configs and manifests. Every top-level document
// carries a "schema" string.
namespace dbl::json_io {

using nlohmann::json;

inline constexpr const char* kLoudnessSchema = "dbl.loudness_report/1";
inline constexpr const char* kMeasureSchema = "dbl.measure/1";
inline constexpr const char* kOimSchema = "dbl.oim_score/1";
inline constexpr const char* kProjectionSchema = "dbl.projection/1";
inline constexpr const char* kManifestSchema = "dbl.session_manifest/1";
inline constexpr const char* kConditionKeySchema = "dbl.condition_key/1";
inline constexpr const char* kPredictionSchema = "dbl.prediction/1";
inline constexpr const char* kFitSchema = "dbl.fit_result/1";
inline constexpr const char* kSummarySchema = "dbl.summary/1";
inline constexpr const char* kSessionSchema = "dbl.session/1";
inline constexpr const char* kRatingsSchema = "dbl.ratings/1";
inline constexpr const char* kCorpusSchema = "dbl.corpus/1";
inline constexpr const char* kRunConfigSchema = "dbl.run_config/1";
inline constexpr const char* kRunIndexSchema = "dbl.run_index/1";

// Human-readable description of the dialogue-activity rule, attached to reports.
std::string gating_rule(double threshold_rel);

json to_json(const LoudnessReport& report);
json to_json(const GlimpseScore& score);
json to_json(const OimConfig& config);
OimConfig oim_config_from_json(const json& j);

json to_json(const PredictorParams& params);
json to_json(const SearchResult& search);
json to_json(const Prediction& prediction);
json to_json(const FitResult& fit);

json to_json(const Spread& spread);
json to_json(const SummaryTables& tables);
// Quartiles and whiskers per class for external box plots.
json boxplot_json(const SummaryTables& tables);

// Manifest schema: {schema, seed, subject_slot, items:[{item_id, class, trial,
// clipped, headroom_db, stimuli:[{id, file}], order:[ids]}]}. Condition indices
// are not part of it.
json to_json(const SessionManifest& manifest);
SessionManifest manifest_from_json(const json& j);

// Operator-side mapping from stimulus ids to conditions and their LDs.
struct KeyEntry {
    std::string stimulus_id;
    int condition_index = 0;
    double attenuation_lu = 0.0;
    double nominal_ld_lu = 0.0;
    double measured_ld_lu = 0.0;
    std::optional<double> projected_ld_lu;
};
using ConditionKey = std::map<std::string, std::vector<KeyEntry>>;  // by item id, in condition order

ConditionKey make_condition_key(const std::vector<ConditionSet>& sets, std::uint64_t seed);
json to_json(const ConditionKey& key);
ConditionKey condition_key_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);
// Pretty-printed with a trailing newline.
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace dbl::json_io
