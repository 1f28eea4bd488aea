#include <doctest.h>

#include <chrono>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "dbl/json_io.hpp"
#include "dbl/pipeline.hpp"
#include "dbl/service.hpp"
#include "dbl/store.hpp"
#include "dbl/synth.hpp"
#include "dbl/wav.hpp"
#include "test_util.hpp"

using namespace dbl;
using nlohmann::json;
using testutil::error_code_of;

namespace {

void write_stems(const std::filesystem::path& dir, const std::string& id, std::uint64_t seed, double secs = 1.5) {
    write_wav(synth::speech_like(secs, 2, seed), dir / (id + "_fg.wav"));
    write_wav(synth::ambience_like(secs, 2, seed + 1), dir / (id + "_bg.wav"));
}

RunConfig small_config(const std::filesystem::path& dir, bool project = false) {
    write_stems(dir, "i1", 10);
    write_stems(dir, "i2", 20);
    write_stems(dir, "t0", 30);
    RunConfig c;
    c.seed = 99;
    c.slots = {"S01", "S02"};
    c.project = project;
    c.taps = 32;
    for (auto [id, cls, trial] : {std::tuple{"t0", ItemClass::CoA, true}, std::tuple{"i1", ItemClass::CoA, false},
                                  std::tuple{"i2", ItemClass::DoA, false}}) {
        RunItem item;
        item.item_id = id;
        item.item_class = cls;
        item.fg = dir / (std::string(id) + "_fg.wav");
        item.bg = dir / (std::string(id) + "_bg.wav");
        item.trial = trial;
        c.items.push_back(item);
    }
    c.output_dir = dir / "run";
    return c;
}

// Recursively collects object keys.
void keys_of(const json& j, std::set<std::string>& out) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            out.insert(it.key());
            keys_of(it.value(), out);
        }
    } else if (j.is_array()) {
        for (const auto& e : j) keys_of(e, out);
    }
}

json ratings_body(const json& session_item, const std::string& subject, double fill = 50.0) {
    json ratings = json::array();
    for (const auto& s : session_item.at("stimuli")) ratings.push_back({{"stimulus_id", s.at("id")}, {"rating", fill}});
    return {{"subject_slot", "S01"},
            {"subject_id", subject},
            {"experience", "non_expert"},
            {"item_id", session_item.at("item_id")},
            {"ratings", ratings}};
}

struct RunFixture {
    testutil::TempDir dir;
    RunOutcome outcome;
    RunFixture() {
        std::ostringstream log;
        outcome = run_pipeline(small_config(dir.path(), true), log);
    }
    std::vector<LoadedSession> sessions() const {
        return {load_session(outcome.run_dir / "manifests" / "S01.json", outcome.run_dir / "condition_key.json"),
                load_session(outcome.run_dir / "manifests" / "S02.json", outcome.run_dir / "condition_key.json")};
    }
};

}  // namespace

TEST_CASE("results store") {
    testutil::TempDir dir;
    const auto path = dir / "sub" / "results.jsonl";
    Submission s;
    s.record = {"p1", Experience::expert, "i1", {1, 2, 3, 4, 5, 6, 7, 8}, {0, 3, 6, 9, 12, 15, 18, 21}};
    s.projected_lds = std::vector<double>{0.1, 3.1, 6.1, 9.1, 12.1, 15.1, 18.1, 21.1};
    s.subject_slot = "S01";
    s.seed = 4;
    s.received_at = "2026-01-01T00:00:00Z";
    {
        ResultsStore store(path);
        store.append(s);
        const auto snap = store.snapshot();
        Submission t = s;
        t.record.item_id = "i2";
        t.projected_lds.reset();
        t.trial = true;
        store.append(t);
        CHECK(snap->size() == 1);  // earlier snapshots stay untouched
        CHECK(store.snapshot()->size() == 2);
        const std::string before = testutil::read_bytes(path);
        CHECK(error_code_of([&] { store.append(s); }) == ErrorCode::DuplicateSubmission);
        CHECK(testutil::read_bytes(path) == before);
        CHECK(store.contains("p1", "i1"));
        CHECK_FALSE(store.contains("p2", "i1"));
    }
    ResultsStore replay(path);
    const auto subs = replay.snapshot();
    REQUIRE(subs->size() == 2);
    CHECK((*subs)[0].record.ratings == s.record.ratings);
    CHECK((*subs)[0].projected_lds == s.projected_lds);
    CHECK((*subs)[1].trial);
    CHECK(error_code_of([&] { replay.append(s); }) == ErrorCode::DuplicateSubmission);

    CHECK(ratings_from(*subs).size() == 1);
    CHECK(ratings_from(*subs, LdChoice::measured, true).size() == 2);
    CHECK(ratings_from(*subs, LdChoice::projected)[0].condition_lds == *s.projected_lds);

    testutil::write_bytes(dir / "bad.jsonl", "{not json}\n");
    CHECK(error_code_of([&] { ResultsStore bad(dir / "bad.jsonl"); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("concurrent appends are serialized") {
    testutil::TempDir dir;
    ResultsStore store(dir / "r.jsonl");
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&, t] {
            for (int i = 0; i < 25; ++i) {
                Submission s;
                s.record = {"p" + std::to_string(t), Experience::non_expert, "i" + std::to_string(i),
                            std::vector<double>(8, 1.0), std::vector<double>(8, 0.0)};
                store.append(s);
            }
        });
    }
    for (auto& th : threads) th.join();
    CHECK(store.snapshot()->size() == 200);
    CHECK(ResultsStore(dir / "r.jsonl").snapshot()->size() == 200);
}

TEST_CASE("pipeline outputs, determinism and the optional prediction stage") {
    testutil::TempDir a, b;
    std::ostringstream log;
    const RunOutcome ra = run_pipeline(small_config(a.path()), log);
    const RunOutcome rb = run_pipeline(small_config(b.path()), log);
    CHECK_FALSE(ra.predicted);
    REQUIRE(ra.notices.size() == 1);
    CHECK(ra.notices[0].find("prediction skipped") != std::string::npos);
    CHECK(log.str().find("prediction skipped") != std::string::npos);

    for (const char* f : {"manifests/S01.json", "manifests/S02.json", "condition_key.json", "measurements.json",
                          "index.json"}) {
        CAPTURE(f);
        const std::string x = testutil::read_bytes(ra.run_dir / f);
        CHECK_FALSE(x.empty());
        CHECK(x == testutil::read_bytes(rb.run_dir / f));
    }
    std::size_t wavs = 0;
    for (const auto& e : std::filesystem::recursive_directory_iterator(ra.run_dir / "stimuli")) {
        if (e.path().extension() == ".wav") {
            ++wavs;
            const auto rel = std::filesystem::relative(e.path(), ra.run_dir);
            CHECK(testutil::read_bytes(e.path()) == testutil::read_bytes(rb.run_dir / rel));
        }
    }
    CHECK(wavs == 24);
    CHECK_FALSE(std::filesystem::exists(ra.run_dir.string() + ".partial"));

    const json index = json_io::read_json_file(ra.run_dir / "index.json");
    CHECK(index.at("schema") == json_io::kRunIndexSchema);
    CHECK(index.at("stages").at("prediction").get<std::string>().rfind("skipped", 0) == 0);
    const json m = json_io::read_json_file(ra.run_dir / "manifests" / "S01.json");
    CHECK(m.at("schema") == json_io::kManifestSchema);
    CHECK(m.at("items").size() == 3);
    CHECK(m.at("items")[0].at("item_id") == "t0");
    const json meas = json_io::read_json_file(ra.run_dir / "measurements.json");
    for (const auto& item : meas.at("items")) {
        const auto& conds = item.at("conditions");
        REQUIRE(conds.size() == 8);
        for (std::size_t k = 0; k < 8; ++k) {
            CHECK(std::abs(conds[k].at("measured_ld_lu").get<double>() - conds[0].at("measured_ld_lu").get<double>() -
                           3.0 * static_cast<double>(k)) <= 0.05);
            CHECK(conds[k].at("oim_score").get<double>() >= 0.0);
            CHECK(conds[k].at("oim_score").get<double>() <= 1.0);
        }
    }
}

TEST_CASE("pipeline failure leaves nothing behind") {
    testutil::TempDir dir;
    RunConfig c = small_config(dir.path());
    c.items[1].bg = dir / "missing.wav";
    std::ostringstream log;
    CHECK(error_code_of([&] { run_pipeline(c, log); }) == ErrorCode::IoError);
    CHECK_FALSE(std::filesystem::exists(c.output_dir));
    CHECK_FALSE(std::filesystem::exists(c.output_dir.string() + ".partial"));
}

TEST_CASE("pipeline with ground truth predicts and fits") {
    testutil::TempDir dir;
    RunConfig c = small_config(dir.path());
    testutil::write_bytes(dir / "truth.csv", "item_id,pld_lu\ni1,11.5\ni2,8.25\n");
    c.ground_truth = dir / "truth.csv";
    std::ostringstream log;
    const RunOutcome r = run_pipeline(c, log);
    CHECK(r.predicted);
    const json p = json_io::read_json_file(r.run_dir / "predictions.json");
    CHECK(p.at("presets").size() == 4);
    CHECK(p.at("fit").at("q") == 2);
    CHECK(p.at("fit").at("mae_lu").get<double>() >= 0.0);

    testutil::write_bytes(dir / "partial.csv", "item_id,pld_lu\ni1,11.5\n");
    c.ground_truth = dir / "partial.csv";
    c.output_dir = dir / "run2";
    CHECK(error_code_of([&] { run_pipeline(c, log); }) == ErrorCode::MissingItemCoverage);
    CHECK_FALSE(std::filesystem::exists(c.output_dir));
}

TEST_CASE("run config loading") {
    testutil::TempDir dir;
    write_stems(dir.path(), "x", 1);
    json cfg = {{"schema", "dbl.run_config/1"},
                {"seed", 5},
                {"slots", 3},
                {"output_dir", "out"},
                {"items", {{{"item_id", "x"}, {"class", "DoM"}, {"fg", "x_fg.wav"}, {"bg", "x_bg.wav"}}}}};
    json_io::write_json_file(dir / "run.json", cfg);
    const RunConfig c = load_run_config(dir / "run.json");
    CHECK(c.seed == 5);
    CHECK(c.slots == std::vector<std::string>{"S01", "S02", "S03"});
    CHECK(c.items[0].fg == dir / "x_fg.wav");
    CHECK(c.items[0].item_class == ItemClass::DoM);
    CHECK(c.output_dir == dir / "out");
    CHECK_FALSE(c.ground_truth.has_value());

    cfg["items"].push_back(cfg["items"][0]);
    json_io::write_json_file(dir / "dup.json", cfg);
    CHECK(error_code_of([&] { load_run_config(dir / "dup.json"); }) == ErrorCode::InvalidConfig);
    cfg["schema"] = "other/1";
    json_io::write_json_file(dir / "schema.json", cfg);
    CHECK(error_code_of([&] { load_run_config(dir / "schema.json"); }) == ErrorCode::InvalidConfig);

    testutil::write_bytes(dir / "t.csv", "item_id,pld_lu\na,1.5\r\nb,-2\n");
    const auto truth = read_ground_truth_csv(dir / "t.csv");
    CHECK(truth.at("a") == 1.5);
    CHECK(truth.at("b") == -2.0);
    testutil::write_bytes(dir / "bad.csv", "item_id,pld_lu\na,x\n");
    CHECK(error_code_of([&] { read_ground_truth_csv(dir / "bad.csv"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("session service") {
    RunFixture fx;
    ResultsStore store(fx.dir / "results.jsonl");
    SessionService service(fx.sessions(), store);

    CHECK(service.health().status == 200);
    CHECK(service.session("S99").status == 404);

    const HttpResponse sess = service.session("S01");
    REQUIRE(sess.status == 200);
    const json payload = json::parse(sess.body);
    CHECK(payload.at("schema") == json_io::kSessionSchema);

    // Blind payload: no LD, attenuation or condition metadata.
    std::set<std::string> keys;
    keys_of(payload, keys);
    for (const auto& k : keys) {
        CAPTURE(k);
        CHECK(k.find("ld") == std::string::npos);
        CHECK(k.find("atten") == std::string::npos);
        CHECK(k.find("condition") == std::string::npos);
        CHECK(k.find("nominal") == std::string::npos);
        CHECK(k.find("projected") == std::string::npos);
        CHECK(k.find("measured") == std::string::npos);
        CHECK(k.find("file") == std::string::npos);
    }
    CHECK(keys == std::set<std::string>{"schema", "subject_slot", "rating_scale", "min", "max", "items", "item_id",
                                         "trial", "stimuli", "id", "label"});

    const auto all_sessions = fx.sessions();
    const LoadedSession& s01 = all_sessions[0];
    const json& first = payload.at("items")[0];
    CHECK(first.at("trial") == true);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(first.at("stimuli")[i].at("id") == s01.manifest.items[0].order[i]);
        CHECK(first.at("stimuli")[i].at("label") == std::string(1, static_cast<char>('A' + i)));
    }

    const std::string id = first.at("stimuli")[0].at("id");
    const HttpResponse wav = service.stimulus(id);
    CHECK(wav.status == 200);
    CHECK(wav.content_type == "audio/wav");
    CHECK(wav.body.rfind("RIFF", 0) == 0);
    CHECK(service.stimulus("0000000000000000").status == 404);

    const json& item = payload.at("items")[1];
    json body = ratings_body(item, "p1");
    SUBCASE("validation") {
        json seven = body;
        seven["ratings"].erase(seven["ratings"].size() - 1);
        CHECK(service.submit(seven.dump()).status == 400);
        json high = body;
        high["ratings"][3]["rating"] = 101;
        CHECK(service.submit(high.dump()).status == 400);
        json dup = body;
        dup["ratings"][1]["stimulus_id"] = dup["ratings"][0]["stimulus_id"];
        CHECK(service.submit(dup.dump()).status == 400);
        json foreign = body;
        foreign["ratings"][0]["stimulus_id"] = payload.at("items")[2].at("stimuli")[0].at("id");
        CHECK(service.submit(foreign.dump()).status == 400);
        json noexp = body;
        noexp["experience"] = "guru";
        CHECK(service.submit(noexp.dump()).status == 400);
        json slot = body;
        slot["subject_slot"] = "S77";
        CHECK(service.submit(slot.dump()).status == 404);
        json unknown = body;
        unknown["item_id"] = "nope";
        CHECK(service.submit(unknown.dump()).status == 404);
        CHECK(service.submit("{oops").status == 400);
        CHECK(service.submit("[]").status == 400);
        CHECK(store.snapshot()->empty());
    }
    SUBCASE("accept, then reject the duplicate without touching the store") {
        // Highest rating on the stimulus presented third.
        json rated = body;
        rated["ratings"][2]["rating"] = 90;
        const HttpResponse ok = service.submit(rated.dump());
        CHECK(ok.status == 201);
        const std::string before = testutil::read_bytes(store.path());
        CHECK(service.submit(rated.dump()).status == 409);
        CHECK(testutil::read_bytes(store.path()) == before);

        const auto subs = store.snapshot();
        REQUIRE(subs->size() == 1);
        const Submission& sub = subs->front();
        CHECK(sub.record.item_id == item.at("item_id"));
        CHECK(sub.subject_slot == "S01");
        CHECK(sub.seed == 99);
        REQUIRE(sub.projected_lds.has_value());
        // Ratings are stored in condition order; the 90 lands on its condition.
        const std::string top = rated["ratings"][2]["stimulus_id"];
        const auto& entries = s01.key.at(item.at("item_id"));
        for (std::size_t k = 0; k < 8; ++k) {
            CHECK(sub.record.ratings[k] == (entries[k].stimulus_id == top ? 90.0 : 50.0));
            CHECK(sub.record.condition_lds[k] == entries[k].measured_ld_lu);
        }
        // Replay reproduces the same PLD summary.
        std::vector<PldRecord> live, replayed;
        for (const auto& r : ratings_from(*store.snapshot())) live.push_back(extract_pld(r));
        for (const auto& r : ratings_from(*ResultsStore(store.path()).snapshot())) replayed.push_back(extract_pld(r));
        CHECK(json_io::to_json(summarize(live, {})) == json_io::to_json(summarize(replayed, {})));
    }
}

TEST_CASE("session service over HTTP") {
    RunFixture fx;
    ResultsStore store(fx.dir / "results.jsonl");
    SessionService service(fx.sessions(), store);
    httplib::Server server;
    service.mount(server);
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    auto health = client.Get("/api/health");
    REQUIRE(health);
    CHECK(health->status == 200);

    auto sess = client.Get("/api/session/S02");
    REQUIRE(sess);
    CHECK(sess->status == 200);
    const json payload = json::parse(sess->body);
    const json& item = payload.at("items")[1];

    auto wav = client.Get("/api/stimulus/" + item.at("stimuli")[0].at("id").get<std::string>());
    REQUIRE(wav);
    CHECK(wav->status == 200);
    CHECK(wav->get_header_value("Content-Type") == "audio/wav");

    json body = ratings_body(item, "remote");
    body["subject_slot"] = "S02";
    auto post = client.Post("/api/ratings", body.dump(), "application/json");
    REQUIRE(post);
    CHECK(post->status == 201);
    auto again = client.Post("/api/ratings", body.dump(), "application/json");
    REQUIRE(again);
    CHECK(again->status == 409);
    CHECK(client.Get("/api/stimulus/zzz")->status == 404);

    server.stop();
    th.join();
    CHECK(store.snapshot()->size() == 1);
}
