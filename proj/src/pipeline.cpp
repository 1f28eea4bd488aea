#include "dbl/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "dbl/analysis.hpp"
#include "dbl/error.hpp"
#include "dbl/json_io.hpp"
#include "dbl/wav.hpp"

namespace dbl {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

struct PreparedItem {
    const RunItem* source = nullptr;
    PreparedStems prepared;
    std::optional<StemPair> refs;
};

}  // namespace

std::filesystem::path data_root() {
    if (const char* env = std::getenv("DBL_DATA_DIR"); env != nullptr && *env != '\0') return env;
    return std::filesystem::current_path() / "dbl-data";
}

RunConfig load_run_config(const std::filesystem::path& path) {
    const json j = json_io::read_json_file(path);
    if (j.value("schema", std::string()) != json_io::kRunConfigSchema) {
        throw Error(ErrorCode::InvalidConfig, path.string() + ": expected schema " + json_io::kRunConfigSchema);
    }
    const auto base = std::filesystem::absolute(path).parent_path();
    RunConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        if (j.contains("slots")) {
            if (j.at("slots").is_number_integer()) {
                const int n = j.at("slots").get<int>();
                if (n < 1) throw Error(ErrorCode::InvalidConfig, "slots must be >= 1");
                c.slots.clear();
                for (int i = 1; i <= n; ++i) {
                    char buf[16];
                    std::snprintf(buf, sizeof buf, "S%02d", i);
                    c.slots.emplace_back(buf);
                }
            } else {
                c.slots = j.at("slots").get<std::vector<std::string>>();
            }
        }
        c.taps = j.value("taps", c.taps);
        c.gate_threshold_rel = j.value("gate_threshold_rel", c.gate_threshold_rel);
        if (j.contains("peak_limit")) {
            c.peak_limit = j.at("peak_limit").is_null() ? std::nullopt : std::optional(j.at("peak_limit").get<double>());
        }
        c.project = j.value("project", c.project);
        if (j.contains("oim")) c.oim = json_io::oim_config_from_json(j.at("oim"));
        for (const auto& ji : j.at("items")) {
            RunItem item;
            item.item_id = ji.at("item_id").get<std::string>();
            item.item_class = parse_item_class(ji.at("class").get<std::string>());
            item.fg = resolve(base, ji.at("fg").get<std::string>());
            item.bg = resolve(base, ji.at("bg").get<std::string>());
            if (ji.contains("ref_fg") != ji.contains("ref_bg")) {
                throw Error(ErrorCode::InvalidConfig, "ref_fg and ref_bg must be given together");
            }
            if (ji.contains("ref_fg")) {
                item.ref_fg = resolve(base, ji.at("ref_fg").get<std::string>());
                item.ref_bg = resolve(base, ji.at("ref_bg").get<std::string>());
            }
            item.trial = ji.value("trial", false);
            c.items.push_back(std::move(item));
        }
        if (j.contains("ground_truth")) c.ground_truth = resolve(base, j.at("ground_truth").get<std::string>());
        if (j.contains("ratings")) c.ratings = resolve(base, j.at("ratings").get<std::string>());
        const std::string mode = j.value("fit_ld_mode", std::string("measured"));
        if (mode == "projected") {
            c.fit_ld_mode = LdMode::projected;
        } else if (mode != "measured") {
            throw Error(ErrorCode::InvalidConfig, "fit_ld_mode must be measured or projected");
        }
        c.class_specific = j.value("class_specific", c.class_specific);
        c.output_dir = j.contains("output_dir") ? resolve(base, j.at("output_dir").get<std::string>())
                                                : data_root() / "runs" / path.stem();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
    }
    if (c.items.empty()) throw Error(ErrorCode::EmptyItemList, "run config lists no items");
    std::set<std::string> ids;
    for (const auto& item : c.items) {
        if (!ids.insert(item.item_id).second) {
            throw Error(ErrorCode::InvalidConfig, "duplicate item id '" + item.item_id + "'");
        }
    }
    if (c.slots.empty()) throw Error(ErrorCode::InvalidConfig, "at least one subject slot required");
    return c;
}

std::map<std::string, double> read_ground_truth_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::map<std::string, double> truth;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw Error(ErrorCode::InvalidArgument, path.string() + ":" + std::to_string(line_no) + ": expected item_id,pld_lu");
        }
        const std::string id = line.substr(0, comma);
        const std::string value = line.substr(comma + 1);
        if (line_no == 1 && id == "item_id") continue;
        try {
            std::size_t used = 0;
            const double v = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument(value);
            if (!truth.emplace(id, v).second) {
                throw Error(ErrorCode::InvalidArgument, "duplicate ground truth for '" + id + "'");
            }
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::InvalidArgument, path.string() + ":" + std::to_string(line_no) + ": bad number");
        }
    }
    return truth;
}

RunOutcome run_pipeline(const RunConfig& config, std::ostream& log) {
    if (config.items.empty()) throw Error(ErrorCode::EmptyItemList, "no items");
    const auto final_dir = std::filesystem::absolute(config.output_dir);
    auto staging = final_dir;
    staging += ".partial";
    std::filesystem::remove_all(staging);
    std::filesystem::create_directories(staging);

    RunOutcome outcome;
    outcome.run_dir = final_dir;
    try {
        std::filesystem::create_directories(staging / "manifests");

        // Stage 1: stems and condition sets.
        std::vector<PreparedItem> prepared;
        std::vector<ConditionSet> sets;
        json measurements = json::array();
        for (const auto& item : config.items) {
            log << "[render] " << item.item_id << '\n';
            PreparedItem p;
            p.source = &item;
            p.prepared = prepare_stems(StemPair(read_wav(item.fg), read_wav(item.bg)));
            if (item.ref_fg) p.refs = StemPair(read_wav(*item.ref_fg), read_wav(*item.ref_bg));

            RenderOptions opts;
            opts.gate_threshold_rel = config.gate_threshold_rel;
            opts.peak_limit = config.peak_limit;
            opts.projection_taps = config.taps;
            if (config.project) opts.projection_refs = p.refs ? &*p.refs : &p.prepared.stems;
            ConditionSet set = render_condition_set(p.prepared.stems, item.item_id, item.item_class, opts);
            set.trial = item.trial;

            const GlimpseScorer scorer(p.prepared.stems, config.oim);
            json conditions = json::array();
            for (const auto& c : set.conditions) {
                conditions.push_back({{"condition_index", c.index},
                                      {"attenuation_lu", c.attenuation_lu},
                                      {"nominal_ld_lu", c.nominal_ld_lu},
                                      {"measured_ld_lu", c.measured_ld_lu},
                                      {"projected_ld_lu", c.projected_ld_lu ? json(*c.projected_ld_lu) : json(nullptr)},
                                      {"oim_score", scorer.score(c.attenuation_lu).value},
                                      {"peak", c.peak},
                                      {"clipped", c.clipped}});
            }
            measurements.push_back({{"item_id", item.item_id},
                                    {"class", to_string(item.item_class)},
                                    {"trial", item.trial},
                                    {"fg_gain_db", p.prepared.fg_gain_db},
                                    {"bg_gain_db", p.prepared.bg_gain_db},
                                    {"headroom_db", set.headroom_db},
                                    {"clipped", set.clipped},
                                    {"conditions", std::move(conditions)}});
            prepared.push_back(std::move(p));
            sets.push_back(std::move(set));
        }

        // Stage 2: stimuli and manifests.
        for (const auto& set : sets) {
            std::filesystem::create_directories(staging / "stimuli" / set.item_id);
            for (const auto& c : set.conditions) {
                const std::string id = stimulus_id(config.seed, set.item_id, c.index);
                write_wav(c.audio, staging / "stimuli" / set.item_id / (id + ".wav"), WavFormat::float32);
            }
        }
        json manifests = json::array();
        for (const auto& slot : config.slots) {
            const SessionManifest manifest = build_session(sets, config.seed, slot);
            const auto rel = std::filesystem::path("manifests") / (slot + ".json");
            json_io::write_json_file(staging / rel, json_io::to_json(manifest));
            manifests.push_back(rel.generic_string());
        }
        json_io::write_json_file(staging / "condition_key.json",
                                 json_io::to_json(json_io::make_condition_key(sets, config.seed)));
        json_io::write_json_file(staging / "measurements.json",
                                 {{"schema", "dbl.measurements/1"},
                                  {"reference_lufs", kReferenceLoudnessLufs},
                                  {"gating_rule", json_io::gating_rule(config.gate_threshold_rel)},
                                  {"oim", json_io::to_json(config.oim)},
                                  {"projection_taps", config.project ? json(config.taps) : json(nullptr)},
                                  {"items", std::move(measurements)}});

        // Stage 3: prediction, only with ground truth.
        json index_stages = json::object();
        json artifacts = {"condition_key.json", "measurements.json"};
        for (const auto& m : manifests) artifacts.push_back(m);

        std::optional<std::map<std::string, double>> truth;
        if (config.ground_truth) {
            truth = read_ground_truth_csv(*config.ground_truth);
        } else if (config.ratings) {
            std::ifstream in(*config.ratings);
            if (!in) throw Error(ErrorCode::IoError, "cannot open " + config.ratings->string());
            std::vector<PldRecord> plds;
            for (const auto& r : read_ratings_csv(in)) plds.push_back(extract_pld(r));
            truth = ground_truth_medians(plds, Experience::non_expert);
        }

        if (!truth) {
            const std::string notice = "prediction skipped: no ground truth configured";
            log << "[predict] " << notice << '\n';
            outcome.notices.push_back(notice);
            index_stages["prediction"] = "skipped: no ground truth";
        } else {
            std::vector<PredictionItem> items;
            std::vector<double> gt;
            for (const auto& p : prepared) {
                if (p.source->trial) continue;
                auto it = truth->find(p.source->item_id);
                if (it == truth->end()) {
                    throw Error(ErrorCode::MissingItemCoverage, "no ground truth for item '" + p.source->item_id + "'");
                }
                ItemOptions opts;
                opts.oim = config.oim;
                opts.ld_mode = config.fit_ld_mode;
                opts.gate_threshold_rel = config.gate_threshold_rel;
                opts.projection_refs = p.refs;
                opts.projection_taps = config.taps;
                items.push_back(make_item(p.source->item_id, p.prepared.stems, opts, p.source->item_class));
                gt.push_back(it->second);
            }
            log << "[predict] fitting " << items.size() << " items\n";
            FitOptions fit_options;
            std::vector<std::string> ids;
            for (const auto& item : items) ids.push_back(item.item_id);
            const SearchTable table = build_search_table(items, fit_options.target_grid, fit_options.search);

            json presets = json::array();
            for (const auto& preset : kPresets) {
                std::vector<SearchResult> row;
                for (const auto& item : items) row.push_back(search_target_ld(item, preset.params.target_score));
                json e = json_io::to_json(score_predictions(ids, row, gt, preset.params));
                e["name"] = std::string(preset.name);
                presets.push_back(std::move(e));
            }
            json predictions = {{"schema", "dbl.predictions/1"},
                                {"ld_mode", config.fit_ld_mode == LdMode::measured ? "measured" : "projected"},
                                {"presets", std::move(presets)},
                                {"fit", json_io::to_json(fit_search_table(table, ids, gt, fit_options))}};
            if (config.class_specific) {
                json by_class = json::object();
                for (const auto& [cls, fit] : fit_parameters_by_class(items, gt, fit_options)) {
                    by_class[std::string(to_string(cls))] = json_io::to_json(fit);
                }
                predictions["fit_by_class"] = std::move(by_class);
            }
            json_io::write_json_file(staging / "predictions.json", predictions);
            artifacts.push_back("predictions.json");
            index_stages["prediction"] = "done";
            outcome.predicted = true;
        }

        index_stages["render"] = "done";
        json_io::write_json_file(staging / "index.json", {{"schema", json_io::kRunIndexSchema},
                                                          {"seed", config.seed},
                                                          {"items", config.items.size()},
                                                          {"stages", std::move(index_stages)},
                                                          {"artifacts", std::move(artifacts)}});
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove_all(staging, ec);
        throw;
    }

    std::filesystem::remove_all(final_dir);
    std::filesystem::rename(staging, final_dir);
    log << "[done] " << final_dir.string() << '\n';
    return outcome;
}

}  // namespace dbl
