#include "dbl/service.hpp"

#include <fstream>
#include <iterator>
#include <set>

#include <httplib.h>

#include "dbl/error.hpp"

namespace dbl {

using nlohmann::json;

namespace {

HttpResponse error_response(int status, const std::string& message) {
    return {status, json{{"error", message}}.dump(), "application/json"};
}

std::string neutral_label(std::size_t index) {
    std::string label;
    std::size_t n = index;
    do {
        label.insert(label.begin(), static_cast<char>('A' + n % 26));
        n = n / 26;
    } while (n-- > 0);
    return label;
}

}  // namespace

LoadedSession load_session(const std::filesystem::path& manifest_path, const std::filesystem::path& key_path) {
    LoadedSession s;
    s.manifest = json_io::manifest_from_json(json_io::read_json_file(manifest_path));
    s.key = json_io::condition_key_from_json(json_io::read_json_file(key_path));
    // Manifests live in <run>/manifests/, stimulus paths are relative to <run>.
    const auto dir = std::filesystem::absolute(manifest_path).parent_path();
    s.root = dir.filename() == "manifests" ? dir.parent_path() : dir;
    for (const auto& item : s.manifest.items) {
        auto it = s.key.find(item.item_id);
        if (it == s.key.end() || it->second.size() != item.stimuli.size()) {
            throw Error(ErrorCode::InvalidConfig, "condition key does not cover item '" + item.item_id + "'");
        }
    }
    return s;
}

SessionService::SessionService(std::vector<LoadedSession> sessions, ResultsStore& store)
    : sessions_(std::move(sessions)), store_(store) {
    std::set<std::string> slots;
    for (const auto& s : sessions_) {
        if (!slots.insert(s.manifest.subject_slot).second) {
            throw Error(ErrorCode::InvalidConfig, "duplicate subject slot '" + s.manifest.subject_slot + "'");
        }
        for (const auto& item : s.manifest.items) {
            for (const auto& stim : item.stimuli) stimuli_[stim.id] = {s.root / stim.file};
        }
    }
}

const LoadedSession* SessionService::find_slot(std::string_view slot) const {
    for (const auto& s : sessions_) {
        if (s.manifest.subject_slot == slot) return &s;
    }
    return nullptr;
}

HttpResponse SessionService::session(std::string_view slot) const {
    const LoadedSession* s = find_slot(slot);
    if (s == nullptr) return error_response(404, "unknown subject slot");
    json items = json::array();
    for (const auto& item : s->manifest.items) {
        json stimuli = json::array();
        for (std::size_t i = 0; i < item.order.size(); ++i) {
            stimuli.push_back({{"id", item.order[i]}, {"label", neutral_label(i)}});
        }
        items.push_back({{"item_id", item.item_id}, {"trial", item.trial}, {"stimuli", std::move(stimuli)}});
    }
    return {200,
            json{{"schema", json_io::kSessionSchema},
                 {"subject_slot", s->manifest.subject_slot},
                 {"rating_scale", {{"min", 0}, {"max", 100}}},
                 {"items", std::move(items)}}
                .dump(),
            "application/json"};
}

HttpResponse SessionService::stimulus(std::string_view id) const {
    auto it = stimuli_.find(id);
    if (it == stimuli_.end()) return error_response(404, "unknown stimulus id");
    std::ifstream in(it->second.file, std::ios::binary);
    if (!in) return error_response(404, "stimulus file missing");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return {200, std::move(bytes), "audio/wav"};
}

HttpResponse SessionService::submit(std::string_view body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception&) {
        return error_response(400, "body is not valid JSON");
    }
    if (!j.is_object()) return error_response(400, "body must be a JSON object");
    for (const char* field : {"subject_slot", "subject_id", "experience", "item_id"}) {
        if (!j.contains(field) || !j.at(field).is_string() || j.at(field).get<std::string>().empty()) {
            return error_response(400, std::string("missing or invalid field '") + field + "'");
        }
    }
    if (!j.contains("ratings") || !j.at("ratings").is_array()) return error_response(400, "missing ratings array");

    const LoadedSession* s = find_slot(j.at("subject_slot").get<std::string>());
    if (s == nullptr) return error_response(404, "unknown subject slot");
    const std::string item_id = j.at("item_id").get<std::string>();
    const SessionItem* item = nullptr;
    for (const auto& it : s->manifest.items) {
        if (it.item_id == item_id) item = &it;
    }
    if (item == nullptr) return error_response(404, "unknown item");

    Experience experience;
    try {
        experience = parse_experience(j.at("experience").get<std::string>());
    } catch (const Error&) {
        return error_response(400, "experience must be expert or non_expert");
    }

    const auto& key = s->key.at(item_id);
    std::map<std::string, double> given;
    for (const auto& r : j.at("ratings")) {
        if (!r.is_object() || !r.contains("stimulus_id") || !r.at("stimulus_id").is_string() ||
            !r.contains("rating") || !r.at("rating").is_number()) {
            return error_response(400, "each rating needs a stimulus_id and a numeric rating");
        }
        const double value = r.at("rating").get<double>();
        if (!(value >= 0.0 && value <= 100.0)) return error_response(400, "ratings must lie in [0, 100]");
        if (!given.emplace(r.at("stimulus_id").get<std::string>(), value).second) {
            return error_response(400, "stimulus rated twice");
        }
    }
    if (given.size() != key.size()) {
        return error_response(400, "expected " + std::to_string(key.size()) + " ratings, got " +
                                       std::to_string(given.size()));
    }

    Submission sub;
    sub.record.subject_id = j.at("subject_id").get<std::string>();
    sub.record.experience = experience;
    sub.record.item_id = item_id;
    sub.subject_slot = s->manifest.subject_slot;
    sub.seed = s->manifest.seed;
    sub.trial = item->trial;
    sub.received_at = utc_timestamp();
    std::vector<double> projected;
    bool all_projected = true;
    for (const auto& entry : key) {
        auto it = given.find(entry.stimulus_id);
        if (it == given.end()) return error_response(400, "rating for an unknown stimulus of this item");
        sub.record.ratings.push_back(it->second);
        sub.record.condition_lds.push_back(entry.measured_ld_lu);
        if (entry.projected_ld_lu) {
            projected.push_back(*entry.projected_ld_lu);
        } else {
            all_projected = false;
        }
    }
    if (all_projected) sub.projected_lds = std::move(projected);

    try {
        store_.append(std::move(sub));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::DuplicateSubmission) return error_response(409, e.what());
        return error_response(500, e.what());
    }
    return {201, json{{"status", "stored"}}.dump(), "application/json"};
}

HttpResponse SessionService::health() const { return {200, json{{"status", "ok"}}.dump(), "application/json"}; }

void SessionService::mount(httplib::Server& server) {
    auto reply = [](httplib::Response& res, const HttpResponse& r) {
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    server.Get("/api/health", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, health()); });
    server.Get(R"(/api/session/([^/]+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, session(req.matches[1].str()));
    });
    server.Get(R"(/api/stimulus/([^/]+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, stimulus(req.matches[1].str()));
    });
    server.Post("/api/ratings", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, submit(req.body));
    });
}

void serve(SessionService& service, const std::string& host, int port) {
    httplib::Server server;
    service.mount(server);
    if (!server.listen(host, port)) {
        throw Error(ErrorCode::IoError, "cannot listen on " + host + ":" + std::to_string(port));
    }
}

}  // namespace dbl
