#include "dbl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "dbl/error.hpp"

namespace dbl {

std::string_view to_string(Experience e) noexcept { return e == Experience::expert ? "expert" : "non_expert"; }

Experience parse_experience(std::string_view name) {
    if (name == "expert") return Experience::expert;
    if (name == "non_expert" || name == "non-expert") return Experience::non_expert;
    throw Error(ErrorCode::InvalidArgument, "unknown experience '" + std::string(name) + "'");
}

PldRecord extract_pld(const RatingRecord& record, std::span<const double> condition_lds) {
    if (record.ratings.empty() || record.ratings.size() != condition_lds.size()) {
        throw Error(ErrorCode::IncompleteRatings, "expected one rating per condition for " + record.subject_id + "/" +
                                                      record.item_id);
    }
    for (double r : record.ratings) {
        if (std::isnan(r)) throw Error(ErrorCode::IncompleteRatings, "missing rating");
        if (r < 0.0 || r > 100.0) throw Error(ErrorCode::OutOfRange, "rating outside [0, 100]");
    }
    const double best = *std::max_element(record.ratings.begin(), record.ratings.end());
    double sum = 0.0;
    int ties = 0;
    for (std::size_t k = 0; k < record.ratings.size(); ++k) {
        if (record.ratings[k] == best) {
            sum += condition_lds[k];
            ++ties;
        }
    }
    return {record.subject_id, record.experience, record.item_id, sum / ties, ties};
}

PldRecord extract_pld(const RatingRecord& record) { return extract_pld(record, record.condition_lds); }

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        while (!field.empty() && field.front() == ' ') field.erase(field.begin());
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_number(const std::string& s, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_no) + ": bad number '" + s + "'");
    }
}

}  // namespace

std::vector<RatingRecord> read_ratings_csv(std::istream& in) {
    struct Row {
        double ld = 0.0;
        double rating = 0.0;
    };
    struct Group {
        Experience experience;
        std::map<int, Row> rows;
    };
    std::map<std::pair<std::string, std::string>, Group> groups;
    std::vector<std::pair<std::string, std::string>> first_seen;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (line_no == 1 && !f.empty() && f[0] == "subject_id") continue;
        if (f.size() != 6) {
            throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_no) + ": expected 6 fields");
        }
        const auto key = std::make_pair(f[0], f[2]);
        const Experience exp = parse_experience(f[1]);
        auto [it, inserted] = groups.try_emplace(key, Group{exp, {}});
        if (inserted) first_seen.push_back(key);
        if (it->second.experience != exp) {
            throw Error(ErrorCode::InvalidArgument, "subject " + f[0] + " listed with two experience levels");
        }
        const double index = parse_number(f[3], line_no);
        if (index < 0 || index != std::floor(index)) {
            throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_no) + ": bad condition index");
        }
        const Row row{parse_number(f[4], line_no), parse_number(f[5], line_no)};
        if (!it->second.rows.emplace(static_cast<int>(index), row).second) {
            throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_no) + ": duplicate condition");
        }
    }

    std::vector<RatingRecord> records;
    for (const auto& key : first_seen) {
        const Group& g = groups.at(key);
        RatingRecord r;
        r.subject_id = key.first;
        r.item_id = key.second;
        r.experience = g.experience;
        int expected = 0;
        for (const auto& [index, row] : g.rows) {
            if (index != expected++) {
                throw Error(ErrorCode::IncompleteRatings, "condition indices of " + key.first + "/" + key.second +
                                                              " are not contiguous from 0");
            }
            r.condition_lds.push_back(row.ld);
            r.ratings.push_back(row.rating);
        }
        records.push_back(std::move(r));
    }
    return records;
}

void write_ratings_csv(std::ostream& out, const std::vector<RatingRecord>& records) {
    out << "subject_id,experience,item_id,condition_index,ld_lu,rating\n";
    const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
    for (const auto& r : records) {
        for (std::size_t k = 0; k < r.ratings.size(); ++k) {
            out << r.subject_id << ',' << to_string(r.experience) << ',' << r.item_id << ',' << k << ','
                << r.condition_lds.at(k) << ',' << r.ratings[k] << '\n';
        }
    }
    out.precision(old_precision);
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "quantile of empty set");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

Spread spread(const std::vector<double>& values) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "spread of empty set");
    Spread s;
    s.count = values.size();
    s.median = quantile(values, 0.5);
    s.q1 = quantile(values, 0.25);
    s.q3 = quantile(values, 0.75);
    s.iqr = s.q3 - s.q1;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    const double lo_fence = s.q1 - 1.5 * s.iqr, hi_fence = s.q3 + 1.5 * s.iqr;
    s.whisker_low = s.max;
    s.whisker_high = s.min;
    for (double v : values) {
        if (v >= lo_fence) s.whisker_low = std::min(s.whisker_low, v);
        if (v <= hi_fence) s.whisker_high = std::max(s.whisker_high, v);
    }
    return s;
}

SummaryTables summarize(const std::vector<PldRecord>& records, const std::map<std::string, ItemClass>& classes,
                        std::optional<Experience> experience_filter) {
    std::map<std::string, std::vector<double>> by_item, by_class, by_subject;
    for (const auto& r : records) {
        if (experience_filter && r.experience != *experience_filter) continue;
        by_item[r.item_id].push_back(r.pld_lu);
        by_subject[r.subject_id].push_back(r.pld_lu);
        if (auto it = classes.find(r.item_id); it != classes.end()) {
            by_class[std::string(to_string(it->second))].push_back(r.pld_lu);
        }
    }
    if (by_item.empty()) throw Error(ErrorCode::EmptyInput, "no PLD records to summarize");

    SummaryTables tables;
    tables.experience_filter = experience_filter;
    for (const auto& [k, v] : by_item) tables.per_item.emplace(k, spread(v));
    for (const auto& [k, v] : by_class) tables.per_class.emplace(k, spread(v));
    double iqr_sum = 0.0;
    for (const auto& [k, v] : by_subject) {
        const Spread s = spread(v);
        iqr_sum += s.iqr;
        tables.per_subject.emplace(k, s);
    }
    tables.average_subject_iqr = iqr_sum / static_cast<double>(tables.per_subject.size());
    return tables;
}

std::map<std::string, double> ground_truth_medians(const std::vector<PldRecord>& records,
                                                   Experience experience_filter,
                                                   const std::vector<std::string>& required_items) {
    std::set<std::string> items(required_items.begin(), required_items.end());
    std::map<std::string, std::vector<double>> by_item;
    for (const auto& r : records) {
        items.insert(r.item_id);
        if (r.experience == experience_filter) by_item[r.item_id].push_back(r.pld_lu);
    }
    if (items.empty()) throw Error(ErrorCode::EmptyInput, "no PLD records");
    std::map<std::string, double> medians;
    for (const auto& item : items) {
        auto it = by_item.find(item);
        if (it == by_item.end()) {
            throw Error(ErrorCode::MissingItemCoverage,
                        "item '" + item + "' has no " + std::string(to_string(experience_filter)) + " ratings");
        }
        medians.emplace(item, median(it->second));
    }
    return medians;
}

}  // namespace dbl
