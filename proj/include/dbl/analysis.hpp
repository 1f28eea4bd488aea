#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dbl/remix.hpp"

namespace dbl {

enum class Experience { expert, non_expert };

std::string_view to_string(Experience e) noexcept;
Experience parse_experience(std::string_view name);

// One subject's ratings of every condition of one item; index = condition index.
struct RatingRecord {
    std::string subject_id;
    Experience experience = Experience::non_expert;
    std::string item_id;
    std::vector<double> ratings;
    std::vector<double> condition_lds;  // LD of each condition as presented
};

struct PldRecord {
    std::string subject_id;
    Experience experience = Experience::non_expert;
    std::string item_id;
    double pld_lu = 0.0;
    int tie_count = 0;
};

// LD of the highest-rated condition; the mean LD of all conditions sharing
// the maximum when several do.
PldRecord extract_pld(const RatingRecord& record, std::span<const double> condition_lds);
PldRecord extract_pld(const RatingRecord& record);

// Ratings CSV: subject_id,experience,item_id,condition_index,ld_lu,rating
std::vector<RatingRecord> read_ratings_csv(std::istream& in);
void write_ratings_csv(std::ostream& out, const std::vector<RatingRecord>& records);

// Quartiles by linear interpolation between order statistics (type 7).
double quantile(std::vector<double> values, double p);
double median(std::vector<double> values);

inline constexpr std::string_view kQuantileConvention = "linear interpolation (type 7)";

struct Spread {
    std::size_t count = 0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double iqr = 0.0;
    double min = 0.0;
    double max = 0.0;
    // Most extreme data points within 1.5 IQR of the quartiles.
    double whisker_low = 0.0;
    double whisker_high = 0.0;
};

Spread spread(const std::vector<double>& values);

struct SummaryTables {
    std::map<std::string, Spread> per_item;
    std::map<std::string, Spread> per_class;  // keyed by class label
    std::map<std::string, Spread> per_subject;  // spread across items
    double average_subject_iqr = 0.0;
    std::optional<Experience> experience_filter;
};

// classes maps item_id to its class; items without an entry are left out of
// the per-class table.
SummaryTables summarize(const std::vector<PldRecord>& records, const std::map<std::string, ItemClass>& classes,
                        std::optional<Experience> experience_filter = std::nullopt);

// Per-item median PLD over subjects passing the filter. Every item present in
// the records (or listed in required_items) must be covered.
std::map<std::string, double> ground_truth_medians(const std::vector<PldRecord>& records,
                                                   Experience experience_filter = Experience::non_expert,
                                                   const std::vector<std::string>& required_items = {});

}  // namespace dbl
