// dbl: command-line front end for loudness, OIM, projection, rendering,
// prediction, fitting, analysis, the listening-test service and full runs.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dbl/analysis.hpp"
#include "dbl/error.hpp"
#include "dbl/glimpse.hpp"
#include "dbl/json_io.hpp"
#include "dbl/loudness.hpp"
#include "dbl/pipeline.hpp"
#include "dbl/predict.hpp"
#include "dbl/projection.hpp"
#include "dbl/remix.hpp"
#include "dbl/service.hpp"
#include "dbl/store.hpp"
#include "dbl/synth.hpp"
#include "dbl/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dbl;

namespace {

void emit(const json& j, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << j.dump(2) << '\n';
    } else {
        json_io::write_json_file(out, j);
    }
}

StemPair load_stems(const std::string& fg, const std::string& bg) { return StemPair(read_wav(fg), read_wav(bg)); }

OimConfig load_oim(const std::string& path) {
    return path.empty() ? OimConfig{} : json_io::oim_config_from_json(json_io::read_json_file(path));
}

LdMode parse_ld_mode(const std::string& s) {
    if (s == "measured") return LdMode::measured;
    if (s == "projected") return LdMode::projected;
    throw Error(ErrorCode::InvalidArgument, "ld mode must be measured or projected");
}

struct CorpusEntry {
    std::string item_id;
    ItemClass item_class = ItemClass::CoM;
    fs::path fg, bg;
    std::optional<fs::path> ref_fg, ref_bg;
};

std::vector<CorpusEntry> load_corpus(const fs::path& path) {
    const json j = json_io::read_json_file(path);
    if (j.value("schema", std::string()) != json_io::kCorpusSchema) {
        throw Error(ErrorCode::InvalidConfig, path.string() + ": expected schema " + json_io::kCorpusSchema);
    }
    const fs::path base = fs::absolute(path).parent_path();
    auto at = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
    std::vector<CorpusEntry> out;
    try {
        for (const auto& ji : j.at("items")) {
            CorpusEntry e;
            e.item_id = ji.at("item_id").get<std::string>();
            e.item_class = parse_item_class(ji.at("class").get<std::string>());
            e.fg = at(ji.at("fg").get<std::string>());
            e.bg = at(ji.at("bg").get<std::string>());
            if (ji.contains("ref_fg") && ji.contains("ref_bg")) {
                e.ref_fg = at(ji.at("ref_fg").get<std::string>());
                e.ref_bg = at(ji.at("ref_bg").get<std::string>());
            }
            out.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
    }
    if (out.empty()) throw Error(ErrorCode::NoItems, "corpus lists no items");
    return out;
}

std::optional<StemPair> refs_of(const CorpusEntry& e) {
    if (!e.ref_fg) return std::nullopt;
    return StemPair(read_wav(*e.ref_fg), read_wav(*e.ref_bg));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dialogue/background loudness toolkit"};
    app.require_subcommand(1);
    std::string out;

    // measure
    auto* measure = app.add_subcommand("measure", "Integrated loudness of FG and BG stems and their LD");
    std::string m_fg, m_bg;
    bool m_gate = false;
    double m_threshold = kDefaultGateThresholdLu;
    measure->add_option("--fg", m_fg, "Foreground WAV")->required()->check(CLI::ExistingFile);
    measure->add_option("--bg", m_bg, "Background WAV")->required()->check(CLI::ExistingFile);
    measure->add_flag("--gate", m_gate, "Gate both stems on dialogue activity of the FG");
    measure->add_option("--threshold-rel", m_threshold, "Dialogue gate threshold below FG loudness (LU)");
    measure->add_option("-o,--out", out, "Output JSON (stdout by default)");
    measure->callback([&] {
        const StemPair stems = load_stems(m_fg, m_bg);
        json j = {{"schema", json_io::kMeasureSchema}};
        if (m_gate) {
            const GatingMask mask = dialogue_activity(stems.fg, m_threshold);
            const auto fg = integrated_loudness(stems.fg, mask);
            const auto bg = integrated_loudness(stems.bg, mask);
            j["fg"] = json_io::to_json(fg);
            j["bg"] = json_io::to_json(bg);
            j["ld_lu"] = fg.integrated_lufs - bg.integrated_lufs;
            j["gating_rule"] = json_io::gating_rule(m_threshold);
            j["active_blocks"] = mask.active_count();
        } else {
            const auto fg = integrated_loudness(stems.fg);
            const auto bg = integrated_loudness(stems.bg);
            j["fg"] = json_io::to_json(fg);
            j["bg"] = json_io::to_json(bg);
            j["ld_lu"] = fg.integrated_lufs - bg.integrated_lufs;
        }
        emit(j, out);
    });

    // oim
    auto* oim = app.add_subcommand("oim", "Better-ear glimpse proportion of FG against BG");
    std::string o_fg, o_bg, o_config;
    double o_beta = 0.0;
    oim->add_option("--fg", o_fg)->required()->check(CLI::ExistingFile);
    oim->add_option("--bg", o_bg)->required()->check(CLI::ExistingFile);
    oim->add_option("--beta", o_beta, "BG attenuation in dB");
    oim->add_option("--config", o_config, "OIM config JSON")->check(CLI::ExistingFile);
    oim->add_option("-o,--out", out);
    oim->callback([&] {
        const OimConfig config = load_oim(o_config);
        json j = json_io::to_json(score_at_attenuation(load_stems(o_fg, o_bg), o_beta, config));
        j["beta_db"] = o_beta;
        j["config"] = json_io::to_json(config);
        emit(j, out);
    });

    // project
    auto* proj = app.add_subcommand("project", "Decompose a mix onto FG/BG references");
    std::string p_mix, p_fg, p_bg, p_dir;
    std::size_t p_taps = kDefaultFilterTaps;
    double p_threshold = kDefaultGateThresholdLu;
    proj->add_option("--mix", p_mix)->required()->check(CLI::ExistingFile);
    proj->add_option("--fg", p_fg)->required()->check(CLI::ExistingFile);
    proj->add_option("--bg", p_bg)->required()->check(CLI::ExistingFile);
    proj->add_option("--taps", p_taps, "Filter length in samples")->check(CLI::PositiveNumber);
    proj->add_option("--threshold-rel", p_threshold);
    proj->add_option("--components", p_dir, "Directory for fg_part/bg_part/artifact WAVs");
    proj->add_option("-o,--out", out);
    proj->callback([&] {
        const AudioClip mixture = read_wav(p_mix);
        const StemPair refs = load_stems(p_fg, p_bg);
        const Decomposition d = project(mixture, refs, p_taps);
        const GatingMask mask = dialogue_activity(refs.fg, p_threshold);
        const double ld = projected_ld(d, mixture, mask);
        if (!p_dir.empty()) {
            fs::create_directories(p_dir);
            write_wav(d.fg_part, fs::path(p_dir) / "fg_part.wav");
            write_wav(d.bg_part, fs::path(p_dir) / "bg_part.wav");
            write_wav(d.artifact, fs::path(p_dir) / "artifact.wav");
        }
        emit({{"schema", json_io::kProjectionSchema},
              {"projected_ld_lu", ld},
              {"filter_len", d.filter_len},
              {"gating_rule", json_io::gating_rule(p_threshold)},
              {"component_rms", {{"fg_part", rms(d.fg_part)}, {"bg_part", rms(d.bg_part)}, {"artifact", rms(d.artifact)}}}},
             out);
    });

    // render
    auto* render = app.add_subcommand("render", "Render the 8-condition stimulus set of one item");
    std::string r_fg, r_bg, r_item, r_class = "CoM", r_dir, r_slot = "S01";
    std::uint64_t r_seed = 1;
    double r_peak = 1.0;
    bool r_no_headroom = false, r_project = false;
    render->add_option("--fg", r_fg)->required()->check(CLI::ExistingFile);
    render->add_option("--bg", r_bg)->required()->check(CLI::ExistingFile);
    render->add_option("--item", r_item, "Item id")->required();
    render->add_option("--class", r_class, "CoM, CoA, DoM or DoA");
    render->add_option("--seed", r_seed);
    render->add_option("--slot", r_slot, "Subject slot for the manifest");
    render->add_option("--peak-limit", r_peak, "Common headroom keeps peaks at or below this value");
    render->add_flag("--no-headroom", r_no_headroom, "Flag clipping but apply no headroom gain");
    render->add_flag("--project", r_project, "Also compute projected LDs");
    render->add_option("--dir", r_dir, "Output directory")->required();
    render->callback([&] {
        const PreparedStems p = prepare_stems(load_stems(r_fg, r_bg));
        RenderOptions opts;
        if (!r_no_headroom) opts.peak_limit = r_peak;
        if (r_project) opts.projection_refs = &p.stems;
        const ConditionSet set = render_condition_set(p.stems, r_item, parse_item_class(r_class), opts);
        const fs::path dir(r_dir);
        fs::create_directories(dir / "stimuli" / r_item);
        fs::create_directories(dir / "manifests");
        for (const auto& c : set.conditions) {
            write_wav(c.audio, dir / "stimuli" / r_item / (stimulus_id(r_seed, r_item, c.index) + ".wav"));
        }
        json_io::write_json_file(dir / "manifests" / (r_slot + ".json"),
                                 json_io::to_json(build_session({set}, r_seed, r_slot)));
        json_io::write_json_file(dir / "condition_key.json", json_io::to_json(json_io::make_condition_key({set}, r_seed)));
        std::cout << "rendered " << set.conditions.size() << " stimuli to " << dir.string() << '\n';
    });

    // predict
    auto* predict = app.add_subcommand("predict", "Predict the preferred LD of one item");
    std::string pr_fg, pr_bg, pr_preset, pr_mode = "measured", pr_config;
    double pr_xi = 0.5, pr_eps = 13.2;
    predict->add_option("--fg", pr_fg)->required()->check(CLI::ExistingFile);
    predict->add_option("--bg", pr_bg)->required()->check(CLI::ExistingFile);
    predict->add_option("--xi", pr_xi, "Target OIM score");
    predict->add_option("--eps", pr_eps, "Offset in LU");
    predict->add_option("--preset", pr_preset, "Named parameter set (overrides --xi/--eps)");
    predict->add_option("--ld-mode", pr_mode, "measured or projected");
    predict->add_option("--config", pr_config, "OIM config JSON")->check(CLI::ExistingFile);
    predict->add_option("-o,--out", out);
    predict->callback([&] {
        PredictorParams params{pr_xi, pr_eps};
        if (!pr_preset.empty()) {
            auto found = find_preset(pr_preset);
            if (!found) throw Error(ErrorCode::InvalidArgument, "unknown preset '" + pr_preset + "'");
            params = *found;
        }
        params.validate();
        ItemOptions opts;
        opts.oim = load_oim(pr_config);
        opts.ld_mode = parse_ld_mode(pr_mode);
        const PredictionItem item = make_item(fs::path(pr_fg).stem().string(),
                                              prepare_stems(load_stems(pr_fg, pr_bg)).stems, opts);
        json j = json_io::to_json(predict_pld(item, params));
        j["params"] = json_io::to_json(params);
        emit(j, out);
    });

    // fit
    auto* fit = app.add_subcommand("fit", "Fit target score and offset to ground-truth PLDs");
    std::string f_corpus, f_truth, f_mode = "measured", f_config;
    bool f_by_class = false;
    fit->add_option("--corpus", f_corpus, "Corpus JSON")->required()->check(CLI::ExistingFile);
    fit->add_option("--truth", f_truth, "CSV item_id,pld_lu")->required()->check(CLI::ExistingFile);
    fit->add_option("--ld-mode", f_mode);
    fit->add_option("--config", f_config, "OIM config JSON")->check(CLI::ExistingFile);
    fit->add_flag("--by-class", f_by_class, "Also fit each item class separately");
    fit->add_option("-o,--out", out);
    fit->callback([&] {
        const auto corpus = load_corpus(f_corpus);
        const auto truth = read_ground_truth_csv(f_truth);
        ItemOptions opts;
        opts.oim = load_oim(f_config);
        opts.ld_mode = parse_ld_mode(f_mode);
        std::vector<PredictionItem> items;
        std::vector<double> gt;
        for (const auto& e : corpus) {
            auto it = truth.find(e.item_id);
            if (it == truth.end()) throw Error(ErrorCode::MissingItemCoverage, "no ground truth for '" + e.item_id + "'");
            opts.projection_refs = refs_of(e);
            items.push_back(make_item(e.item_id, prepare_stems(load_stems(e.fg, e.bg)).stems, opts, e.item_class));
            gt.push_back(it->second);
        }
        json j = json_io::to_json(fit_parameters(items, gt));
        if (f_by_class) {
            json by = json::object();
            for (const auto& [cls, r] : fit_parameters_by_class(items, gt)) by[std::string(to_string(cls))] = json_io::to_json(r);
            j["by_class"] = std::move(by);
        }
        emit(j, out);
    });

    // analyze
    auto* analyze = app.add_subcommand("analyze", "PLD extraction and summaries from ratings");
    std::string a_ratings, a_store, a_corpus, a_experience, a_boxplot, a_truth, a_lds = "measured";
    analyze->add_option("--ratings", a_ratings, "Ratings CSV")->check(CLI::ExistingFile);
    analyze->add_option("--store", a_store, "Results store (JSON lines)")->check(CLI::ExistingFile);
    analyze->add_option("--corpus", a_corpus, "Corpus JSON for item classes")->check(CLI::ExistingFile);
    analyze->add_option("--experience", a_experience, "Restrict summaries to expert or non_expert");
    analyze->add_option("--lds", a_lds, "Condition LDs from the store: measured or projected");
    analyze->add_option("--boxplot", a_boxplot, "Write per-class box-plot data JSON");
    analyze->add_option("--truth-out", a_truth, "Write non-expert median PLDs as CSV");
    analyze->add_option("-o,--out", out);
    analyze->callback([&] {
        if (a_ratings.empty() == a_store.empty()) {
            throw Error(ErrorCode::InvalidArgument, "give exactly one of --ratings or --store");
        }
        std::vector<RatingRecord> records;
        if (!a_ratings.empty()) {
            std::ifstream in(a_ratings);
            records = read_ratings_csv(in);
        } else {
            const ResultsStore store(a_store);
            records = ratings_from(*store.snapshot(), parse_ld_mode(a_lds) == LdMode::projected ? LdChoice::projected
                                                                                                 : LdChoice::measured);
        }
        std::vector<PldRecord> plds;
        for (const auto& r : records) plds.push_back(extract_pld(r));
        std::map<std::string, ItemClass> classes;
        if (!a_corpus.empty()) {
            for (const auto& e : load_corpus(a_corpus)) classes[e.item_id] = e.item_class;
        }
        std::optional<Experience> filter;
        if (!a_experience.empty()) filter = parse_experience(a_experience);
        const SummaryTables tables = summarize(plds, classes, filter);
        if (!a_boxplot.empty()) json_io::write_json_file(a_boxplot, json_io::boxplot_json(tables));
        if (!a_truth.empty()) {
            std::ofstream t(a_truth);
            if (!t) throw Error(ErrorCode::IoError, "cannot write " + a_truth);
            t << "item_id,pld_lu\n";
            char buf[64];
            for (const auto& [id, m] : ground_truth_medians(plds)) {
                std::snprintf(buf, sizeof buf, "%.17g", m);
                t << id << ',' << buf << '\n';
            }
        }
        emit(json_io::to_json(tables), out);
    });

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Serve listening-test sessions of a run directory");
    std::string s_run, s_store, s_host = "127.0.0.1";
    int s_port = 8080;
    serve_cmd->add_option("--run", s_run, "Run directory with manifests/ and condition_key.json")
        ->required()
        ->check(CLI::ExistingDirectory);
    serve_cmd->add_option("--store", s_store, "Results store path (default $DBL_DATA_DIR/results.jsonl)");
    serve_cmd->add_option("--host", s_host);
    serve_cmd->add_option("--port", s_port);
    serve_cmd->callback([&] {
        const fs::path run(s_run);
        std::vector<LoadedSession> sessions;
        std::vector<fs::path> manifests;
        for (const auto& e : fs::directory_iterator(run / "manifests")) {
            if (e.path().extension() == ".json") manifests.push_back(e.path());
        }
        std::sort(manifests.begin(), manifests.end());
        for (const auto& m : manifests) sessions.push_back(load_session(m, run / "condition_key.json"));
        if (sessions.empty()) throw Error(ErrorCode::InvalidConfig, "no manifests in " + (run / "manifests").string());
        ResultsStore store(s_store.empty() ? data_root() / "results.jsonl" : fs::path(s_store));
        SessionService service(std::move(sessions), store);
        std::cerr << "serving " << manifests.size() << " session(s) on " << s_host << ':' << s_port
                  << ", store " << store.path().string() << '\n';
        serve(service, s_host, s_port);
    });

    // run
    auto* run_cmd = app.add_subcommand("run", "Full pipeline from a run config");
    std::string run_config;
    run_cmd->add_option("config", run_config, "Run config JSON")->required()->check(CLI::ExistingFile);
    run_cmd->callback([&] {
        const RunOutcome outcome = run_pipeline(load_run_config(run_config), std::cerr);
        for (const auto& n : outcome.notices) std::cout << "notice: " << n << '\n';
        std::cout << outcome.run_dir.string() << '\n';
    });

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic demo corpus and run config");
    std::string y_dir;
    int y_items = 4;
    double y_seconds = 6.0;
    std::uint64_t y_seed = 1;
    synth_cmd->add_option("--dir", y_dir, "Output directory")->required();
    synth_cmd->add_option("--items", y_items)->check(CLI::Range(1, 1000));
    synth_cmd->add_option("--seconds", y_seconds)->check(CLI::Range(1.0, 600.0));
    synth_cmd->add_option("--seed", y_seed);
    synth_cmd->callback([&] {
        const fs::path dir(y_dir);
        fs::create_directories(dir / "stems");
        json items = json::array();
        static constexpr ItemClass kCycle[] = {ItemClass::CoM, ItemClass::CoA, ItemClass::DoM, ItemClass::DoA};
        for (int i = 0; i < y_items; ++i) {
            char id[16];
            std::snprintf(id, sizeof id, "item%02d", i + 1);
            const ItemClass cls = kCycle[i % 4];
            const std::uint64_t s = y_seed * 1000 + static_cast<std::uint64_t>(i);
            const AudioClip fg = synth::speech_like(y_seconds, 2, s);
            const bool music = cls == ItemClass::CoM || cls == ItemClass::DoM;
            const AudioClip bg = music ? synth::music_like(y_seconds, 2, s + 500) : synth::ambience_like(y_seconds, 2, s + 500);
            const std::string fg_rel = std::string("stems/") + id + "_fg.wav";
            const std::string bg_rel = std::string("stems/") + id + "_bg.wav";
            write_wav(fg, dir / fg_rel);
            write_wav(bg, dir / bg_rel);
            items.push_back({{"item_id", id}, {"class", to_string(cls)}, {"fg", fg_rel}, {"bg", bg_rel}});
        }
        json_io::write_json_file(dir / "corpus.json", {{"schema", json_io::kCorpusSchema}, {"items", items}});
        json_io::write_json_file(dir / "run.json", {{"schema", json_io::kRunConfigSchema},
                                                   {"seed", y_seed},
                                                   {"slots", 2},
                                                   {"output_dir", "run"},
                                                   {"items", items}});
        std::cout << "wrote " << y_items << " items to " << dir.string() << '\n';
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
