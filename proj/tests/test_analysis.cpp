#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "dbl/analysis.hpp"
#include "test_util.hpp"

using namespace dbl;
using testutil::error_code_of;

namespace {

const std::vector<double> kGrid = {0, 3, 6, 9, 12, 15, 18, 21};

RatingRecord record(std::vector<double> ratings, std::string subject = "s1", std::string item = "i1",
                    Experience e = Experience::non_expert) {
    return {std::move(subject), e, std::move(item), std::move(ratings), kGrid};
}

PldRecord pld(std::string subject, std::string item, double value, Experience e = Experience::non_expert) {
    return {std::move(subject), e, std::move(item), value, 1};
}

// Type-7 quantile computed directly from the definition.
double type7(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1) * p + 1;  // 1-based
    const double fl = std::floor(h);
    const std::size_t j = static_cast<std::size_t>(fl);
    if (j >= v.size()) return v.back();
    return v[j - 1] + (h - fl) * (v[j] - v[j - 1]);
}

}  // namespace

TEST_CASE("extract_pld examples") {
    const PldRecord unique = extract_pld(record({10, 20, 30, 90, 40, 50, 60, 70}));
    CHECK(unique.pld_lu == 9.0);
    CHECK(unique.tie_count == 1);

    const PldRecord tie = extract_pld(record({10, 20, 95, 40, 95, 50, 60, 70}));
    CHECK(tie.pld_lu == 9.0);
    CHECK(tie.tie_count == 2);

    const PldRecord flat = extract_pld(record(std::vector<double>(8, 55.0)));
    CHECK(flat.pld_lu == 10.5);
    CHECK(flat.tie_count == 8);

    const std::vector<double> other = {1.2, 4.0, 7.7, 9.9, 13.0, 15.5, 18.1, 22.4};
    CHECK(extract_pld(record({0, 0, 0, 0, 0, 0, 0, 100}), other).pld_lu == 22.4);

    CHECK(error_code_of([] { extract_pld(record({1, 2, 3, 4, 5, 6, 7})); }) == ErrorCode::IncompleteRatings);
    CHECK(error_code_of([] { extract_pld(record({1, 2, 3, 4, 5, 6, 7, 101})); }) == ErrorCode::OutOfRange);
    CHECK(error_code_of([] { extract_pld(record({-1, 2, 3, 4, 5, 6, 7, 8})); }) == ErrorCode::OutOfRange);
    CHECK(error_code_of([] { extract_pld(record({std::nan(""), 2, 3, 4, 5, 6, 7, 8})); }) ==
          ErrorCode::IncompleteRatings);
}

TEST_CASE("extract_pld exhaustive over {0, 50, 100}^8") {
    std::size_t cases = 0;
    std::array<int, 8> digits{};
    for (int code = 0; code < 6561; ++code) {
        int c = code;
        std::vector<double> ratings(8);
        for (std::size_t k = 0; k < 8; ++k) {
            digits[k] = c % 3;
            c /= 3;
            ratings[k] = 50.0 * digits[k];
        }
        // Oracle: mean LD over the argmax set.
        const int top = *std::max_element(digits.begin(), digits.end());
        double sum = 0.0;
        int n = 0;
        for (std::size_t k = 0; k < 8; ++k) {
            if (digits[k] == top) sum += kGrid[k], ++n;
        }
        const PldRecord r = extract_pld(record(ratings));
        CHECK(r.pld_lu == sum / n);
        CHECK(r.tie_count == n);
        CHECK(r.pld_lu >= 0.0);
        CHECK(r.pld_lu <= 21.0);
        // Strictly monotone transforms leave the argmax set alone.
        std::vector<double> t1(8), t2(8);
        for (std::size_t k = 0; k < 8; ++k) {
            t1[k] = std::sqrt(ratings[k]);
            t2[k] = 10.0 + 0.8 * ratings[k];
        }
        CHECK(extract_pld(record(t1)).pld_lu == r.pld_lu);
        CHECK(extract_pld(record(t2)).pld_lu == r.pld_lu);
        ++cases;
    }
    CHECK(cases == 6561);
}

TEST_CASE("quantiles") {
    const std::vector<double> v = {9, 0, 6, 3};
    CHECK(median(v) == 4.5);
    CHECK(quantile(v, 0.25) == 2.25);
    CHECK(quantile(v, 0.75) == 6.75);
    const Spread s = spread(v);
    CHECK(s.iqr == 4.5);
    CHECK(s.min == 0.0);
    CHECK(s.max == 9.0);
    CHECK(median({1, 2, 3, 10}) == 2.5);
    CHECK(median({7}) == 7.0);
    CHECK(spread({7}).iqr == 0.0);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-10, 30);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> x(1 + rng() % 23);
        for (double& e : x) e = std::round(u(rng) * 2) / 2;
        for (double p : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0}) CHECK(quantile(x, p) == doctest::Approx(type7(x, p)));
    }
    CHECK(error_code_of([] { quantile({}, 0.5); }) == ErrorCode::EmptyInput);

    const Spread w = spread({1, 2, 3, 4, 5, 6, 7, 8, 9, 100});
    CHECK(w.whisker_high == 9.0);
    CHECK(w.whisker_low == 1.0);
}

TEST_CASE("summarize") {
    SUBCASE("single record") {
        const SummaryTables t = summarize({pld("s1", "i1", 7.0)}, {});
        CHECK(t.per_item.at("i1").median == 7.0);
        CHECK(t.per_item.at("i1").iqr == 0.0);
        CHECK(t.average_subject_iqr == 0.0);
    }
    SUBCASE("per item, per class and per subject") {
        std::vector<PldRecord> recs = {pld("a", "m1", 0), pld("b", "m1", 3), pld("c", "m1", 6), pld("d", "m1", 9),
                                       pld("a", "a1", 12), pld("b", "a1", 12), pld("c", "a1", 12),
                                       pld("d", "a1", 12)};
        const std::map<std::string, ItemClass> classes = {{"m1", ItemClass::CoM}, {"a1", ItemClass::CoA}};
        const SummaryTables t = summarize(recs, classes);
        CHECK(t.per_item.at("m1").median == 4.5);
        CHECK(t.per_item.at("m1").iqr == 4.5);
        CHECK(t.per_class.at("CoA").median == 12.0);
        CHECK(t.per_class.at("CoA").iqr == 0.0);
        double iqr_sum = 0.0;
        for (const auto& [s, sp] : t.per_subject) iqr_sum += sp.iqr;
        CHECK(t.average_subject_iqr == doctest::Approx(iqr_sum / 4));
        // subject a: {0, 12} -> IQR 6
        CHECK(t.per_subject.at("a").iqr == 6.0);

        std::vector<PldRecord> shuffled = recs;
        std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937(5));
        const SummaryTables u = summarize(shuffled, classes);
        CHECK(u.per_item.at("m1").median == t.per_item.at("m1").median);
        CHECK(u.per_subject.at("c").iqr == t.per_subject.at("c").iqr);
        CHECK(u.average_subject_iqr == t.average_subject_iqr);
    }
    SUBCASE("experience filter") {
        std::vector<PldRecord> recs = {pld("a", "i", 3.0), pld("x", "i", 21.0, Experience::expert)};
        CHECK(summarize(recs, {}, Experience::non_expert).per_item.at("i").median == 3.0);
        CHECK(summarize(recs, {}, Experience::expert).per_item.at("i").median == 21.0);
        CHECK(summarize(recs, {}).per_item.at("i").median == 12.0);
        CHECK(error_code_of([] { summarize({}, {}); }) == ErrorCode::EmptyInput);
    }
}

TEST_CASE("ground_truth_medians") {
    const std::vector<PldRecord> recs = {pld("a", "i1", 3.0), pld("b", "i1", 9.0), pld("c", "i2", 12.0),
                                         pld("x", "i1", 21.0, Experience::expert),
                                         pld("y", "i2", 0.0, Experience::expert)};
    const auto m = ground_truth_medians(recs);
    CHECK(m.at("i1") == 6.0);
    CHECK(m.at("i2") == 12.0);
    CHECK(m.size() == 2);

    std::vector<PldRecord> reversed(recs.rbegin(), recs.rend());
    CHECK(ground_truth_medians(reversed) == m);

    CHECK(error_code_of([&] { ground_truth_medians(recs, Experience::non_expert, {"i3"}); }) ==
          ErrorCode::MissingItemCoverage);
    const std::vector<PldRecord> experts_only = {pld("x", "i9", 4.0, Experience::expert)};
    CHECK(error_code_of([&] { ground_truth_medians(experts_only); }) == ErrorCode::MissingItemCoverage);
}

TEST_CASE("ratings CSV round trip") {
    std::vector<RatingRecord> recs = {record({10, 20, 30, 40, 50, 60, 70, 80}, "s1", "i1"),
                                      record({80, 70, 60, 50, 40, 30, 20, 10.5}, "s2", "i1", Experience::expert)};
    recs[1].condition_lds = {0.1, 3.2, 6.3, 9.4, 12.5, 15.6, 18.7, 21.8};
    std::stringstream ss;
    write_ratings_csv(ss, recs);
    const auto back = read_ratings_csv(ss);
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto it = std::find_if(back.begin(), back.end(), [&](const RatingRecord& r) { return r.subject_id == recs[i].subject_id; });
        REQUIRE(it != back.end());
        CHECK(it->ratings == recs[i].ratings);
        CHECK(it->condition_lds == recs[i].condition_lds);
        CHECK(it->experience == recs[i].experience);
    }

    std::istringstream missing("subject_id,experience,item_id,condition_index,ld_lu,rating\ns,expert,i,0,0,50\ns,expert,i,2,6,50\n");
    CHECK(error_code_of([&] { read_ratings_csv(missing); }) == ErrorCode::IncompleteRatings);
    std::istringstream bad("subject_id,experience,item_id,condition_index,ld_lu,rating\ns,guru,i,0,0,50\n");
    CHECK(error_code_of([&] { read_ratings_csv(bad); }) == ErrorCode::InvalidArgument);

    CHECK(parse_experience("non-expert") == Experience::non_expert);
    CHECK(parse_experience("expert") == Experience::expert);
}
