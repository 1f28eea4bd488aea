#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dbl/analysis.hpp"

namespace dbl {

struct Submission {
    RatingRecord record;  // condition_lds hold the measured gated LDs
    std::optional<std::vector<double>> projected_lds;
    std::string subject_slot;
    std::uint64_t seed = 0;
    bool trial = false;
    std::string received_at;  // UTC, ISO 8601
};

// Append-only JSON-lines log of rating submissions. One (subject, item) pair
// may be stored once; appends are serialized and readers get immutable
// snapshots.
class ResultsStore {
public:
    explicit ResultsStore(std::filesystem::path path);

    // Throws DuplicateSubmission without touching the log.
    void append(Submission submission);

    bool contains(const std::string& subject_id, const std::string& item_id) const;
    std::shared_ptr<const std::vector<Submission>> snapshot() const;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::set<std::pair<std::string, std::string>> keys_;
    std::shared_ptr<const std::vector<Submission>> entries_;
};

enum class LdChoice { measured, projected };

// Non-trial records for analysis. With LdChoice::projected, submissions that
// carry projected LDs use them; the rest keep measured LDs.
std::vector<RatingRecord> ratings_from(const std::vector<Submission>& submissions, LdChoice choice = LdChoice::measured,
                                       bool include_trial = false);

std::string utc_timestamp();

}  // namespace dbl
