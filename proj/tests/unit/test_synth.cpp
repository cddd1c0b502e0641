#include <doctest.h>

#include "core/common.hpp"
#include "core/synth.hpp"

#include <string>

using namespace ikit;

TEST_CASE("pattern parsing accepts the documented grammar") {
    const auto p = parse_pattern("(image A, sentence 1, image B, sentence 2)");
    REQUIRE(p.slots.size() == 4);
    CHECK(p.slots[0].kind == SlotKind::Image);
    CHECK(p.slots[0].label == "A");
    CHECK(p.slots[1].kind == SlotKind::Sentence);
    CHECK(p.slots[1].label == "1");

    const auto q = parse_pattern("  (IMAGE x, Sentence 9)  ");
    CHECK(q.slots[0].kind == SlotKind::Image);
    CHECK(q.slots[1].kind == SlotKind::Sentence);
}

TEST_CASE("pattern parsing rejects malformed input") {
    CHECK_THROWS_AS(parse_pattern("image A, sentence 1"), ValidationError);
    CHECK_THROWS_AS(parse_pattern("()"), ValidationError);
    CHECK_THROWS_AS(parse_pattern("(image A, , sentence 1)"), ValidationError);
    CHECK_THROWS_AS(parse_pattern("(picture A)"), ValidationError);
    CHECK_THROWS_AS(parse_pattern("(image)"), ValidationError);
    CHECK_THROWS_AS(parse_pattern("(image A B)"), ValidationError);
    CHECK_THROWS_AS(parse_pattern("(image A, image a)"), ValidationError);
}

TEST_CASE("parse errors carry a byte offset") {
    try {
        parse_pattern("(image A, nonsense B)");
        FAIL("expected ValidationError");
    } catch (const ValidationError & e) {
        CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
}

TEST_CASE("render round trips through parse") {
    const std::string canonical = "(image A, sentence 1, sentence 2)";
    CHECK(render_pattern(parse_pattern(canonical)) == canonical);
    CHECK(render_pattern(parse_pattern("( image A ,sentence 1 )")) == "(image A, sentence 1)");
}

TEST_CASE("response parsing extracts slot lines and ignores preamble") {
    const auto pattern = parse_pattern("(image A, sentence 1)");
    const auto seq = parse_response(
        "Sure, here is a sequence for you.\n"
        "Image A: a dog on a beach\n"
        "Sentence 1: The dog runs.\n",
        pattern);
    REQUIRE(seq.slots.size() == 2);
    CHECK(seq.slots[0].kind == SlotKind::Image);
    CHECK(seq.slots[0].text == "a dog on a beach");
    CHECK(seq.slots[1].text == "The dog runs.");
}

TEST_CASE("response validation mirrors the pattern") {
    const auto pattern = parse_pattern("(image A, sentence 1)");

    CHECK_THROWS_WITH_AS(parse_response("Sentence 1: only text\n", pattern),
                         "parse_response: IMAGE A absent", ValidationError);
    CHECK_THROWS_AS(
        parse_response("Image A: x\nImage A: y\nSentence 1: z\n", pattern),
        ValidationError);
    CHECK_THROWS_AS(parse_response("Sentence 1: z\nImage A: x\n", pattern), ValidationError);
    CHECK_THROWS_AS(
        parse_response("Image A: x\nSentence 1: z\nSentence 2: extra\n", pattern),
        ValidationError);
}

namespace {

struct Spaces {
    EmbeddingIndex retrieval;       // image ids in retrieval space
    EmbeddingIndex rerank_images;   // image ids in rerank space
    EmbeddingIndex rerank_texts;    // description strings in rerank space
    EmbeddingIndex text_queries;    // description strings in retrieval space
};

Spaces two_image_spaces(std::vector<float> rerank_a, std::vector<float> rerank_b) {
    Spaces s;
    s.retrieval = EmbeddingIndex::build({{"imgA", {1.f, 0.f}}, {"imgB", {0.95f, 0.05f}}});
    s.rerank_images = EmbeddingIndex::build({{"imgA", rerank_a}, {"imgB", rerank_b}});
    s.rerank_texts = EmbeddingIndex::build({{"a red dog", {1.f, 0.f}}});
    s.text_queries = EmbeddingIndex::build({{"a red dog", {1.f, 0.f}}});
    return s;
}

}  // namespace

TEST_CASE("infill retrieves candidates then lets the reranker pick") {
    // retrieval prefers imgA, rerank prefers imgB
    auto s = two_image_spaces({0.f, 1.f}, {1.f, 0.f});
    IndexTextEmbedder embedder(s.text_queries);
    CosineReranker reranker(s.rerank_images, s.rerank_texts);

    SynthSequence seq;
    seq.id = "s1";
    seq.slots = {{SlotKind::Image, "A", "a red dog"}, {SlotKind::Sentence, "1", "A dog."}};
    const auto doc = infill(seq, s.retrieval, embedder, reranker, {2, {}});

    REQUIRE(doc.images.size() == 1);
    CHECK(doc.images[0].image_id == "imgB");
    CHECK(doc.images[0].anchor_span == 0);  // the following sentence
    CHECK(doc.spans == std::vector<std::string>{"A dog."});
}

TEST_CASE("rerank ties resolve to the smaller image id") {
    auto s = two_image_spaces({1.f, 0.f}, {1.f, 0.f});
    IndexTextEmbedder embedder(s.text_queries);
    CosineReranker reranker(s.rerank_images, s.rerank_texts);

    SynthSequence seq;
    seq.id = "s1";
    seq.slots = {{SlotKind::Sentence, "1", "A dog."}, {SlotKind::Image, "A", "a red dog"}};
    const auto doc = infill(seq, s.retrieval, embedder, reranker, {2, {}});

    REQUIRE(doc.images.size() == 1);
    CHECK(doc.images[0].image_id == "imgA");
    CHECK(doc.images[0].anchor_span == 0);  // no sentence follows, fall back to the preceding
}

TEST_CASE("infill requires at least one sentence") {
    auto s = two_image_spaces({1.f, 0.f}, {0.f, 1.f});
    IndexTextEmbedder embedder(s.text_queries);
    CosineReranker reranker(s.rerank_images, s.rerank_texts);

    SynthSequence seq;
    seq.id = "s1";
    seq.slots = {{SlotKind::Image, "A", "a red dog"}};
    CHECK_THROWS_AS(infill(seq, s.retrieval, embedder, reranker, {2, {}}), ValidationError);
}

TEST_CASE("unknown descriptions are reported") {
    auto s = two_image_spaces({1.f, 0.f}, {0.f, 1.f});
    IndexTextEmbedder embedder(s.text_queries);
    CHECK_THROWS_AS(embedder.embed("never seen"), ValidationError);
}
