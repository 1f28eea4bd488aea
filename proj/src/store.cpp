#include "dbl/store.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include <json.hpp>

#include "dbl/error.hpp"

namespace dbl {

namespace {

constexpr const char* kSubmissionSchema = "dbl.submission/1";

nlohmann::json encode(const Submission& s) {
    nlohmann::json j = {{"schema", kSubmissionSchema},
                        {"subject_id", s.record.subject_id},
                        {"experience", to_string(s.record.experience)},
                        {"item_id", s.record.item_id},
                        {"ratings", s.record.ratings},
                        {"condition_lds", s.record.condition_lds},
                        {"subject_slot", s.subject_slot},
                        {"seed", s.seed},
                        {"trial", s.trial},
                        {"received_at", s.received_at}};
    j["projected_lds"] = s.projected_lds ? nlohmann::json(*s.projected_lds) : nlohmann::json(nullptr);
    return j;
}

Submission decode(const nlohmann::json& j) {
    if (j.value("schema", std::string()) != kSubmissionSchema) {
        throw Error(ErrorCode::InvalidConfig, "store line has an unknown schema");
    }
    Submission s;
    s.record.subject_id = j.at("subject_id").get<std::string>();
    s.record.experience = parse_experience(j.at("experience").get<std::string>());
    s.record.item_id = j.at("item_id").get<std::string>();
    s.record.ratings = j.at("ratings").get<std::vector<double>>();
    s.record.condition_lds = j.at("condition_lds").get<std::vector<double>>();
    if (j.contains("projected_lds") && !j.at("projected_lds").is_null()) {
        s.projected_lds = j.at("projected_lds").get<std::vector<double>>();
    }
    s.subject_slot = j.value("subject_slot", std::string());
    s.seed = j.value("seed", std::uint64_t{0});
    s.trial = j.value("trial", false);
    s.received_at = j.value("received_at", std::string());
    return s;
}

}  // namespace

ResultsStore::ResultsStore(std::filesystem::path path)
    : path_(std::move(path)), entries_(std::make_shared<const std::vector<Submission>>()) {
    std::vector<Submission> loaded;
    if (std::filesystem::exists(path_)) {
        std::ifstream in(path_);
        if (!in) throw Error(ErrorCode::IoError, "cannot open " + path_.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                Submission s = decode(nlohmann::json::parse(line));
                keys_.emplace(s.record.subject_id, s.record.item_id);
                loaded.push_back(std::move(s));
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorCode::InvalidConfig,
                            path_.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
    } else if (path_.has_parent_path()) {
        std::filesystem::create_directories(path_.parent_path());
    }
    entries_ = std::make_shared<const std::vector<Submission>>(std::move(loaded));
}

void ResultsStore::append(Submission submission) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_pair(submission.record.subject_id, submission.record.item_id);
    if (keys_.contains(key)) {
        throw Error(ErrorCode::DuplicateSubmission,
                    "ratings for " + key.first + "/" + key.second + " were already submitted");
    }
    {
        std::ofstream out(path_, std::ios::app);
        if (!out) throw Error(ErrorCode::IoError, "cannot open " + path_.string());
        out << encode(submission).dump() << '\n';
        out.flush();
        if (!out) throw Error(ErrorCode::IoError, "write failed for " + path_.string());
    }
    keys_.insert(key);
    auto next = std::make_shared<std::vector<Submission>>(*entries_);
    next->push_back(std::move(submission));
    entries_ = std::move(next);
}

bool ResultsStore::contains(const std::string& subject_id, const std::string& item_id) const {
    std::lock_guard lock(mutex_);
    return keys_.contains({subject_id, item_id});
}

std::shared_ptr<const std::vector<Submission>> ResultsStore::snapshot() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

std::vector<RatingRecord> ratings_from(const std::vector<Submission>& submissions, LdChoice choice,
                                       bool include_trial) {
    std::vector<RatingRecord> out;
    for (const auto& s : submissions) {
        if (s.trial && !include_trial) continue;
        RatingRecord r = s.record;
        if (choice == LdChoice::projected && s.projected_lds) r.condition_lds = *s.projected_lds;
        out.push_back(std::move(r));
    }
    return out;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace dbl
