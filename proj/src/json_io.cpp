#include "dbl/json_io.hpp"

#include <fstream>
#include <sstream>

#include "dbl/error.hpp"

namespace dbl::json_io {

namespace {

void require_schema(const json& j, const char* schema) {
    if (!j.is_object() || j.value("schema", std::string()) != schema) {
        throw Error(ErrorCode::InvalidConfig, std::string("expected a document with schema ") + schema);
    }
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string gating_rule(double threshold_rel) {
    std::ostringstream s;
    s << "block-energy dialogue activity on the FG stem: 400 ms blocks, 100 ms hop, active when block loudness >= "
         "ungated integrated - "
      << threshold_rel << " LU";
    return s.str();
}

json to_json(const LoudnessReport& report) {
    json blocks = json::array();
    for (const auto& b : report.blocks) blocks.push_back({{"t_s", b.start_s}, {"lufs", optional_number(b.lufs)}});
    return {{"schema", kLoudnessSchema},
            {"integrated_lufs", report.integrated_lufs},
            {"gated", report.gated},
            {"blocks", std::move(blocks)}};
}

json to_json(const GlimpseScore& score) {
    return {{"schema", kOimSchema},
            {"value", score.value},
            {"glimpsed_units", score.glimpsed_units},
            {"total_units", score.total_units}};
}

json to_json(const OimConfig& config) {
    json j = {{"bands", config.bands},         {"fmin_hz", config.fmin_hz},   {"fmax_hz", config.fmax_hz},
              {"frame_ms", config.frame_ms}, {"glimpse_db", config.glimpse_db}};
    if (config.weights.empty()) {
        j["weights"] = "uniform";
    } else {
        j["weights"] = config.weights;
    }
    return j;
}

OimConfig oim_config_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "OIM config must be an object");
    OimConfig c;
    try {
        c.bands = j.value("bands", c.bands);
        c.fmin_hz = j.value("fmin_hz", c.fmin_hz);
        c.fmax_hz = j.value("fmax_hz", c.fmax_hz);
        c.frame_ms = j.value("frame_ms", c.frame_ms);
        c.glimpse_db = j.value("glimpse_db", c.glimpse_db);
        if (j.contains("weights")) {
            const json& w = j.at("weights");
            if (w.is_string()) {
                if (w.get<std::string>() != "uniform") {
                    throw Error(ErrorCode::InvalidConfig, "weights must be \"uniform\" or an array");
                }
            } else {
                c.weights = w.get<std::vector<double>>();
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
    c.validate();
    return c;
}

json to_json(const PredictorParams& params) {
    return {{"target_score", params.target_score}, {"offset_lu", params.offset_lu}};
}

json to_json(const SearchResult& search) {
    return {{"attenuation_db", search.attenuation_db},
            {"ld_lu", search.ld_lu},
            {"score", search.score},
            {"reached", to_string(search.reached)}};
}

json to_json(const Prediction& prediction) {
    return {{"schema", kPredictionSchema},
            {"item_id", prediction.item_id},
            {"attenuation_db", prediction.attenuation_db},
            {"searched_ld_lu", prediction.searched_ld_lu},
            {"predicted_pld_lu", prediction.predicted_pld_lu},
            {"reached", to_string(prediction.reached)}};
}

json to_json(const FitResult& fit) {
    json preds = json::array();
    for (const auto& p : fit.predictions) {
        json e = to_json(p);
        e.erase("schema");
        preds.push_back(std::move(e));
    }
    return {{"schema", kFitSchema},
            {"params", to_json(fit.params)},
            {"mae_lu", fit.mae},
            {"q", fit.item_count},
            {"boundary_items", fit.boundary_items},
            {"residuals_lu", fit.residuals},
            {"predictions", std::move(preds)}};
}

json to_json(const Spread& s) {
    return {{"n", s.count},   {"median", s.median}, {"q1", s.q1},
            {"q3", s.q3},     {"iqr", s.iqr},       {"min", s.min},
            {"max", s.max},   {"whisker_low", s.whisker_low}, {"whisker_high", s.whisker_high}};
}

json to_json(const SummaryTables& tables) {
    auto table = [](const std::map<std::string, Spread>& m) {
        json j = json::object();
        for (const auto& [k, v] : m) j[k] = to_json(v);
        return j;
    };
    return {{"schema", kSummarySchema},
            {"quantile_convention", std::string(kQuantileConvention)},
            {"experience_filter",
             tables.experience_filter ? json(std::string(to_string(*tables.experience_filter))) : json(nullptr)},
            {"per_item", table(tables.per_item)},
            {"per_class", table(tables.per_class)},
            {"per_subject", table(tables.per_subject)},
            {"average_subject_iqr_lu", tables.average_subject_iqr}};
}

json boxplot_json(const SummaryTables& tables) {
    json groups = json::array();
    for (const auto& [cls, s] : tables.per_class) {
        groups.push_back({{"class", cls},
                          {"median", s.median},
                          {"q1", s.q1},
                          {"q3", s.q3},
                          {"whisker_low", s.whisker_low},
                          {"whisker_high", s.whisker_high},
                          {"n", s.count}});
    }
    return {{"schema", "dbl.boxplot/1"},
            {"quantile_convention", std::string(kQuantileConvention)},
            {"groups", std::move(groups)}};
}

json to_json(const SessionManifest& manifest) {
    json items = json::array();
    for (const auto& item : manifest.items) {
        json stimuli = json::array();
        for (const auto& s : item.stimuli) stimuli.push_back({{"id", s.id}, {"file", s.file}});
        items.push_back({{"item_id", item.item_id},
                         {"class", to_string(item.item_class)},
                         {"trial", item.trial},
                         {"clipped", item.clipped},
                         {"headroom_db", item.headroom_db},
                         {"stimuli", std::move(stimuli)},
                         {"order", item.order}});
    }
    return {{"schema", kManifestSchema},
            {"seed", manifest.seed},
            {"subject_slot", manifest.subject_slot},
            {"items", std::move(items)}};
}

SessionManifest manifest_from_json(const json& j) {
    require_schema(j, kManifestSchema);
    SessionManifest m;
    try {
        m.seed = j.at("seed").get<std::uint64_t>();
        m.subject_slot = j.at("subject_slot").get<std::string>();
        for (const auto& ji : j.at("items")) {
            SessionItem item;
            item.item_id = ji.at("item_id").get<std::string>();
            item.item_class = parse_item_class(ji.at("class").get<std::string>());
            item.trial = ji.value("trial", false);
            item.clipped = ji.value("clipped", false);
            item.headroom_db = ji.value("headroom_db", 0.0);
            for (const auto& js : ji.at("stimuli")) {
                Stimulus s;
                s.id = js.at("id").get<std::string>();
                s.file = js.at("file").get<std::string>();
                s.condition_index = -1;
                item.stimuli.push_back(std::move(s));
            }
            item.order = ji.at("order").get<std::vector<std::string>>();
            m.items.push_back(std::move(item));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("malformed manifest: ") + e.what());
    }
    return m;
}

ConditionKey make_condition_key(const std::vector<ConditionSet>& sets, std::uint64_t seed) {
    ConditionKey key;
    for (const auto& set : sets) {
        auto& entries = key[set.item_id];
        for (const auto& c : set.conditions) {
            entries.push_back({stimulus_id(seed, set.item_id, c.index), c.index, c.attenuation_lu, c.nominal_ld_lu,
                               c.measured_ld_lu, c.projected_ld_lu});
        }
    }
    return key;
}

json to_json(const ConditionKey& key) {
    json items = json::object();
    for (const auto& [item, entries] : key) {
        json arr = json::array();
        for (const auto& e : entries) {
            arr.push_back({{"stimulus_id", e.stimulus_id},
                           {"condition_index", e.condition_index},
                           {"attenuation_lu", e.attenuation_lu},
                           {"nominal_ld_lu", e.nominal_ld_lu},
                           {"measured_ld_lu", e.measured_ld_lu},
                           {"projected_ld_lu", optional_number(e.projected_ld_lu)}});
        }
        items[item] = std::move(arr);
    }
    return {{"schema", kConditionKeySchema}, {"items", std::move(items)}};
}

ConditionKey condition_key_from_json(const json& j) {
    require_schema(j, kConditionKeySchema);
    ConditionKey key;
    try {
        for (const auto& [item, arr] : j.at("items").items()) {
            auto& entries = key[item];
            for (const auto& e : arr) {
                KeyEntry k;
                k.stimulus_id = e.at("stimulus_id").get<std::string>();
                k.condition_index = e.at("condition_index").get<int>();
                k.attenuation_lu = e.at("attenuation_lu").get<double>();
                k.nominal_ld_lu = e.at("nominal_ld_lu").get<double>();
                k.measured_ld_lu = e.at("measured_ld_lu").get<double>();
                if (e.contains("projected_ld_lu") && !e.at("projected_ld_lu").is_null()) {
                    k.projected_ld_lu = e.at("projected_ld_lu").get<double>();
                }
                entries.push_back(std::move(k));
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("malformed condition key: ") + e.what());
    }
    return key;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace dbl::json_io
