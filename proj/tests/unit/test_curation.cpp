#include <doctest.h>

#include "core/common.hpp"
#include "core/curation.hpp"
#include "core/tokenizer.hpp"

#include "../oracles.hpp"

using namespace ikit;

namespace {

InterleavedDoc make_doc(std::string id, std::vector<std::string> spans,
                        std::vector<std::pair<int, double>> images) {
    InterleavedDoc doc;
    doc.doc_id = std::move(id);
    doc.spans = std::move(spans);
    int i = 0;
    for (auto [anchor, sim] : images) {
        doc.images.push_back({doc.doc_id + "-img" + std::to_string(i++), anchor, sim});
    }
    return doc;
}

}  // namespace

TEST_CASE("filter keeps images at or above the threshold") {
    auto doc = make_doc("d", {"one", "two"}, {{0, 0.24}, {1, 0.2399}, {1, 0.5}});
    auto kept = filter_doc(doc, 0.24);
    REQUIRE(kept.has_value());
    REQUIRE(kept->images.size() == 2);
    CHECK(kept->images[0].clip_sim == 0.24);
    CHECK(kept->images[1].clip_sim == 0.5);
    CHECK(kept->spans == doc.spans);  // text survives even when its image drops
}

TEST_CASE("doc with no surviving image is discarded") {
    auto doc = make_doc("d", {"a"}, {{0, 0.1}, {0, 0.15}});
    CHECK_FALSE(filter_doc(doc, 0.24).has_value());
}

TEST_CASE("raising the threshold never keeps more images") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::pair<int, double>> images;
        const int n = 1 + static_cast<int>(rng.next_below(6));
        for (int i = 0; i < n; ++i) {
            images.push_back({0, rng.next_double()});
        }
        auto doc = make_doc("d" + std::to_string(trial), {"s"}, images);
        size_t prev = images.size() + 1;
        for (double threshold : {0.20, 0.24, 0.28, 0.32}) {
            auto kept = filter_doc(doc, threshold);
            const size_t count = kept ? kept->images.size() : 0;
            CHECK(count <= prev);
            prev = count;
        }
    }
}

TEST_CASE("validate_doc rejects bad anchors and similarities") {
    CHECK_THROWS_AS(validate_doc(make_doc("d", {"s"}, {{2, 0.5}})), ValidationError);
    CHECK_THROWS_AS(validate_doc(make_doc("d", {"s"}, {{0, 1.5}})), ValidationError);
    CHECK_THROWS_AS(validate_doc(make_doc("d", {"s"}, {{-1, 0.5}})), ValidationError);
    CHECK_NOTHROW(validate_doc(make_doc("d", {"s"}, {{0, -0.3}})));
}

TEST_CASE("multi-image docs always survive the rejection step") {
    auto doc = make_doc("d", {"s"}, {{0, 0.9}, {0, 0.9}});
    for (uint64_t seed = 0; seed < 20; ++seed) {
        CHECK_FALSE(reject_single_image(doc, 1.0, seed));
    }
}

TEST_CASE("single-image rejection rate tracks the probability") {
    int rejected = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        auto doc = make_doc("doc-" + std::to_string(i), {"s"}, {{0, 0.9}});
        if (reject_single_image(doc, 0.5, 99)) {
            ++rejected;
        }
    }
    const double rate = static_cast<double>(rejected) / n;
    CHECK(rate > 0.48);
    CHECK(rate < 0.52);

    // edge probabilities
    auto doc = make_doc("x", {"s"}, {{0, 0.9}});
    CHECK_FALSE(reject_single_image(doc, 0.0, 1));
    CHECK(reject_single_image(doc, 1.0, 1));
}

TEST_CASE("rejection decisions are pure in (seed, doc_id)") {
    auto doc = make_doc("stable", {"s"}, {{0, 0.9}});
    const bool first = reject_single_image(doc, 0.5, 5);
    for (int i = 0; i < 10; ++i) {
        CHECK(reject_single_image(doc, 0.5, 5) == first);
    }
}

TEST_CASE("pair filtering applies the floor and truncates captions") {
    auto tok = make_whitespace_tokenizer();
    PairRecord below{"img", "a caption", 0.2799};
    CHECK_FALSE(filter_pair(below, 0.28, 32, *tok).has_value());

    PairRecord boundary{"img", "a caption", 0.28};
    CHECK(filter_pair(boundary, 0.28, 32, *tok).has_value());

    std::string long_caption;
    for (int i = 0; i < 50; ++i) {
        long_caption += "w" + std::to_string(i) + " ";
    }
    PairRecord long_pair{"img", long_caption, 0.9};
    auto kept = filter_pair(long_pair, 0.28, 32, *tok);
    REQUIRE(kept.has_value());
    CHECK(tok->encode(kept->caption).size() == 32);

    PairRecord empty{"img", "", 0.9};
    CHECK_THROWS_AS(filter_pair(empty, 0.28, 32, *tok), ValidationError);
}

TEST_CASE("corpus stats match brute-force medians") {
    std::vector<InterleavedDoc> docs;
    docs.push_back(make_doc("a", {"one two three"}, {{0, 0.5}}));
    docs.push_back(make_doc("b", {"one"}, {{0, 0.5}, {0, 0.6}, {0, 0.7}}));
    docs.push_back(make_doc("c", {"one two"}, {{0, 0.5}, {0, 0.9}}));
    docs.push_back(make_doc("d", {"x"}, {{0, 0.1}}));  // discarded at 0.24

    auto tok = make_whitespace_tokenizer();
    const auto stats = corpus_stats(docs, 0.24, *tok, std::nullopt, 0);

    CHECK(stats.docs_in == 4);
    CHECK(stats.docs_kept == 3);
    CHECK(stats.frac_discarded == doctest::Approx(0.25));
    CHECK(stats.frac_single_image == doctest::Approx(1.0 / 3.0));

    REQUIRE(stats.median_images.has_value());
    CHECK(*stats.median_images == doctest::Approx(oracle::median_sorted_copy({1, 3, 2})));
    REQUIRE(stats.median_tokens.has_value());
    std::vector<double> token_counts;
    for (const auto & doc : {docs[0], docs[1], docs[2]}) {
        token_counts.push_back(static_cast<double>(doc_token_count(doc, *tok)));
    }
    CHECK(*stats.median_tokens == doctest::Approx(oracle::median_sorted_copy(token_counts)));
}

TEST_CASE("empty corpus is rejected outright") {
    auto tok = make_whitespace_tokenizer();
    CHECK_THROWS_AS(corpus_stats({}, 0.24, *tok, std::nullopt, 0), ValidationError);
}

TEST_CASE("doc json round trip") {
    auto doc = make_doc("d1", {"alpha beta", "gamma"}, {{1, 0.42}});
    const auto j = doc_to_json(doc);
    const auto back = doc_from_json(j);
    CHECK(back.doc_id == doc.doc_id);
    CHECK(back.spans == doc.spans);
    REQUIRE(back.images.size() == 1);
    CHECK(back.images[0].image_id == doc.images[0].image_id);
    CHECK(back.images[0].anchor_span == 1);
    CHECK(back.images[0].clip_sim == doctest::Approx(0.42));
}
