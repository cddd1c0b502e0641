#include <doctest.h>

#include "core/common.hpp"
#include "core/metrics.hpp"

#include "../oracles.hpp"

#include <cmath>
#include <string>
#include <vector>

using namespace ikit;

TEST_CASE("answer normalization") {
    VqaNormalizer norm;
    CHECK(norm.normalize("A man's DOG.") == "man's dog");
    CHECK(norm.normalize("dont") == "don't");
    CHECK(norm.normalize("two") == "2");
    CHECK(norm.normalize("none") == "0");
    CHECK(norm.normalize("1,000") == "1000");
    CHECK(norm.normalize("hello, world") == "hello world");
    CHECK(norm.normalize("3.5 meters") == "3.5 meters");
    CHECK(norm.normalize("yes.") == "yes");
    CHECK(norm.normalize("the answer\nignored tail") == "answer");
    CHECK(norm.normalize("an  apple") == "apple");
}

TEST_CASE("vqa accuracy walks the min(matches/3, 1) lattice") {
    VqaNormalizer norm;
    std::vector<std::string> answers;
    for (int matches = 0; matches <= 10; ++matches) {
        answers.clear();
        for (int i = 0; i < 10; ++i) {
            answers.push_back(i < matches ? "cat" : "distinct" + std::to_string(i));
        }
        const double expected = std::min(static_cast<double>(matches) / 3.0, 1.0);
        CHECK(vqa_accuracy("cat", answers, norm) == doctest::Approx(expected));
    }
}

TEST_CASE("vqa accuracy normalizes both sides") {
    VqaNormalizer norm;
    const std::vector<std::string> answers = {"Two", "two", "2", "a dog", "dog", "dog",
                                              "x1", "x2", "x3", "x4"};
    CHECK(vqa_accuracy("2", answers, norm) == doctest::Approx(1.0));
    CHECK(vqa_accuracy("the dog", answers, norm) == doctest::Approx(1.0));
}

namespace {

std::pair<std::map<std::string, std::string>, std::map<std::string, std::vector<std::string>>>
caption_fixture() {
    std::map<std::string, std::string> candidates = {
        {"i1", "a dog runs on the beach"},
        {"i2", "two cats sit on a mat"},
        {"i3", "a man rides a red bicycle"},
        {"i4", "a dog runs"},
        {"i5", "the skyline of a city at night"},
    };
    std::map<std::string, std::vector<std::string>> references = {
        {"i1", {"a dog running on a sandy beach", "dog runs along the beach"}},
        {"i2", {"two cats sitting on a mat", "a pair of cats on the mat"}},
        {"i3", {"a man is riding a red bike", "man on a red bicycle"}},
        {"i4", {"a dog runs on grass", "the dog is running"}},
        {"i5", {"a city skyline at night", "night skyline of the city"}},
    };
    return {candidates, references};
}

}  // namespace

TEST_CASE("cider agrees with the independent oracle") {
    const auto [candidates, references] = caption_fixture();
    const auto result = cider(candidates, references);
    const auto expected = oracle::cider_d(candidates, references);

    double mean = 0.0;
    for (const auto & [id, want] : expected) {
        REQUIRE(result.per_id.count(id) == 1);
        CHECK(result.per_id.at(id) == doctest::Approx(want).epsilon(1e-9));
        mean += want;
    }
    mean /= static_cast<double>(expected.size());
    CHECK(result.corpus_score == doctest::Approx(mean).epsilon(1e-9));
}

TEST_CASE("identical captions score 10 against themselves") {
    std::map<std::string, std::string> candidates = {{"a", "one two three four five"},
                                                     {"b", "six seven eight nine ten"}};
    std::map<std::string, std::vector<std::string>> references = {
        {"a", {"one two three four five"}}, {"b", {"six seven eight nine ten"}}};
    const auto result = cider(candidates, references);
    CHECK(result.per_id.at("a") == doctest::Approx(10.0));
    CHECK(result.per_id.at("b") == doctest::Approx(10.0));
}

TEST_CASE("cider validates its corpus") {
    std::map<std::string, std::string> one = {{"a", "text"}};
    std::map<std::string, std::vector<std::string>> one_ref = {{"a", {"text"}}};
    CHECK_THROWS_AS(cider(one, one_ref), ValidationError);

    std::map<std::string, std::string> two = {{"a", "text"}, {"b", "text"}};
    std::map<std::string, std::vector<std::string>> missing = {{"a", {"text"}}};
    CHECK_THROWS_AS(cider(two, missing), ValidationError);

    std::map<std::string, std::vector<std::string>> extra = {
        {"a", {"text"}}, {"b", {"text"}}, {"c", {"text"}}};
    CHECK_THROWS_AS(cider(two, extra), ValidationError);
}

TEST_CASE("auc matches pair enumeration") {
    const std::vector<double> scores = {0.1, 0.4, 0.35, 0.8};
    const std::vector<int> labels = {0, 0, 1, 1};
    CHECK(auc_roc(scores, labels) == doctest::Approx(0.75));
    CHECK(auc_roc(scores, labels) == doctest::Approx(oracle::auc_pairs(scores, labels)));

    CHECK(auc_roc({0.5, 0.5}, {0, 1}) == doctest::Approx(0.5));  // tie counts half
    CHECK(auc_roc({0.1, 0.9}, {0, 1}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(auc_roc({0.1, 0.9}, {1, 1}), ValidationError);
    CHECK_THROWS_AS(auc_roc({0.1}, {1, 0}), ValidationError);
}

TEST_CASE("gaussian smoothing preserves length and constants") {
    const std::vector<double> flat(20, 3.0);
    const auto smoothed = gaussian_smooth(flat, 4);
    REQUIRE(smoothed.size() == flat.size());
    for (double v : smoothed) {
        CHECK(v == doctest::Approx(3.0));
    }

    std::vector<double> spike(21, 0.0);
    spike[10] = 1.0;
    const auto s = gaussian_smooth(spike, 4);
    CHECK(s[10] > s[9]);
    CHECK(s[9] == doctest::Approx(s[11]));  // symmetric kernel
    double total = 0.0;
    for (double v : s) {
        total += v;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));  // interior mass conserved
}

TEST_CASE("relative report reproduces a hand-computed ratio grid") {
    ScoreTable ours;
    ScoreTable baseline;
    ours.entries[{"bench1", 0, "M"}] = 10.0;
    ours.entries[{"bench1", 4, "M"}] = 20.0;
    baseline.entries[{"bench1", 0, "B"}] = 8.0;
    baseline.entries[{"bench1", 4, "B"}] = 40.0;

    const auto report = relative_to_baseline(ours, baseline, {{"M", "B"}});
    REQUIRE(report.settings.size() == 2);
    CHECK(report.settings[0].ratio == doctest::Approx(1.25));
    CHECK(report.settings[1].ratio == doctest::Approx(0.5));
    CHECK(report.mean == doctest::Approx(0.875));
    const double variance = (0.375 * 0.375 + 0.375 * 0.375) / 2.0;
    CHECK(report.std_dev == doctest::Approx(std::sqrt(variance)));
}

TEST_CASE("relative report names missing settings") {
    ScoreTable ours;
    ScoreTable baseline;
    ours.entries[{"bench1", 0, "M"}] = 10.0;
    CHECK_THROWS_AS(relative_to_baseline(ours, baseline, {{"M", "B"}}), ValidationError);
}

TEST_CASE("sota report divides by the per-benchmark reference") {
    ScoreTable ours;
    ours.entries[{"bench1", 32, "M"}] = 50.0;
    ours.entries[{"bench2", 32, "M"}] = 30.0;
    SotaTable sota;
    sota.entries = {{"bench1", 100.0}, {"bench2", 60.0}};
    const auto report = relative_to_sota(ours, "M", 32, sota);
    CHECK(report.fractions.at("bench1") == doctest::Approx(0.5));
    CHECK(report.fractions.at("bench2") == doctest::Approx(0.5));
    CHECK(report.mean == doctest::Approx(0.5));
}

TEST_CASE("score tables validate shots and scores") {
    nlohmann::json bad = {{"entries", {{{"benchmark", "b"}, {"shots", 5}, {"model", "m"},
                                       {"score", 1.0}}}}};
    CHECK_THROWS_AS(score_table_from_json(bad), ValidationError);
    nlohmann::json ok = {{"entries", {{{"benchmark", "b"}, {"shots", 8}, {"model", "m"},
                                      {"score", 1.0}}}}};
    CHECK(score_table_from_json(ok).entries.size() == 1);
}

TEST_CASE("csv and svg renderings carry every setting") {
    ScoreTable ours;
    ScoreTable baseline;
    ours.entries[{"bench1", 0, "M"}] = 10.0;
    baseline.entries[{"bench1", 0, "B"}] = 8.0;
    const auto report = relative_to_baseline(ours, baseline, {{"M", "B"}});
    const auto csv = relative_report_to_csv(report);
    CHECK(csv.find("bench1") != std::string::npos);
    const auto svg = relative_report_to_svg(report);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("rect") != std::string::npos);
}
