#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dbl/json_io.hpp"
#include "dbl/remix.hpp"
#include "dbl/store.hpp"

namespace httplib {
class Server;
}

namespace dbl {

struct LoadedSession {
    SessionManifest manifest;
    json_io::ConditionKey key;
    std::filesystem::path root;  // stimulus files are relative to this directory
};

LoadedSession load_session(const std::filesystem::path& manifest_path, const std::filesystem::path& key_path);

struct HttpResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

// Listening-test endpoints, independent of the transport:
//   GET  /api/session/{slot}  blind session payload (opaque ids, neutral labels)
//   GET  /api/stimulus/{id}   WAV bytes
//   POST /api/ratings         one subject's ratings of one item
//   GET  /api/health
class SessionService {
public:
    SessionService(std::vector<LoadedSession> sessions, ResultsStore& store);

    HttpResponse session(std::string_view slot) const;
    HttpResponse stimulus(std::string_view id) const;
    HttpResponse submit(std::string_view body);
    HttpResponse health() const;

    void mount(httplib::Server& server);

private:
    struct StimulusRef {
        std::filesystem::path file;
    };

    const LoadedSession* find_slot(std::string_view slot) const;

    std::vector<LoadedSession> sessions_;
    std::map<std::string, StimulusRef, std::less<>> stimuli_;
    ResultsStore& store_;
};

// Blocks until the server stops.
void serve(SessionService& service, const std::string& host, int port);

}  // namespace dbl
