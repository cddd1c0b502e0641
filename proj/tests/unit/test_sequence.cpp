#include <doctest.h>

#include "core/common.hpp"
#include "core/sequence.hpp"

#include "../oracles.hpp"

#include <string>
#include <vector>

using namespace ikit;

namespace {

InterleavedDoc doc_of(std::vector<std::string> spans, std::vector<std::pair<int, double>> images) {
    InterleavedDoc doc;
    doc.doc_id = "doc";
    doc.spans = std::move(spans);
    int i = 0;
    for (auto [anchor, sim] : images) {
        doc.images.push_back({"img" + std::to_string(i++), anchor, sim});
    }
    return doc;
}

InterleavedDoc random_doc(Rng & rng, int index) {
    InterleavedDoc doc;
    doc.doc_id = "rand-" + std::to_string(index);
    const int n_spans = 1 + static_cast<int>(rng.next_below(6));
    for (int s = 0; s < n_spans; ++s) {
        std::string span;
        const int n_words = 1 + static_cast<int>(rng.next_below(8));
        for (int w = 0; w < n_words; ++w) {
            if (w > 0) {
                span += ' ';
            }
            span += "w" + std::to_string(rng.next_below(40));
        }
        doc.spans.push_back(span);
    }
    const int n_images = 1 + static_cast<int>(rng.next_below(4));
    for (int i = 0; i < n_images; ++i) {
        doc.images.push_back({doc.doc_id + "-i" + std::to_string(i),
                              static_cast<int>(rng.next_below(static_cast<uint64_t>(n_spans))),
                              0.5});
    }
    return doc;
}

}  // namespace

TEST_CASE("single chunk golden sequence") {
    auto tok = make_whitespace_tokenizer();
    const auto stream = mark_sequence(doc_of({"Hello world"}, {{0, 0.9}}), *tok);

    REQUIRE(stream.tokens.size() == 4);
    CHECK(stream.tokens[0] == tok->image_token());
    CHECK(stream.tokens[3] == tok->endofchunk_token());
    CHECK(tok->decode({stream.tokens[1], stream.tokens[2]}) == "Hello world");
    CHECK(stream.media_index == std::vector<int>{1, 1, 1, 1});
    CHECK(stream.n_images == 1);
}

TEST_CASE("text before the first image carries no markers") {
    auto tok = make_whitespace_tokenizer();
    const auto stream = mark_sequence(doc_of({"intro text", "body"}, {{1, 0.9}}), *tok);

    // intro(2) IMG body(1) EOC
    REQUIRE(stream.tokens.size() == 5);
    CHECK(stream.tokens[0] != tok->image_token());
    CHECK(stream.tokens[2] == tok->image_token());
    CHECK(stream.media_index == std::vector<int>{0, 0, 1, 1, 1});
}

TEST_CASE("two images produce two chunks in anchor order") {
    auto tok = make_whitespace_tokenizer();
    const auto stream = mark_sequence(doc_of({"a", "b"}, {{1, 0.9}, {0, 0.8}}), *tok);

    // IMG a EOC IMG b EOC
    REQUIRE(stream.tokens.size() == 6);
    CHECK(stream.tokens[0] == tok->image_token());
    CHECK(stream.tokens[3] == tok->image_token());
    CHECK(stream.media_index == std::vector<int>{1, 1, 1, 2, 2, 2});
    CHECK(stream.n_images == 2);
}

TEST_CASE("media index equals the backward scan oracle on random docs") {
    auto tok = make_whitespace_tokenizer();
    Rng rng(123);
    for (int i = 0; i < 200; ++i) {
        const auto stream = mark_sequence(random_doc(rng, i), *tok);
        CHECK(stream.media_index ==
              oracle::media_index_backward_scan(stream.tokens, tok->image_token()));
    }
}

TEST_CASE("media mask points each token at its media index image") {
    auto tok = make_whitespace_tokenizer();
    Rng rng(321);
    const auto stream = mark_sequence(random_doc(rng, 0), *tok);
    const auto mask = media_mask(stream);
    REQUIRE(mask.size() == stream.tokens.size());
    for (size_t t = 0; t < mask.size(); ++t) {
        REQUIRE(mask[t].size() == static_cast<size_t>(stream.n_images));
        for (size_t i = 0; i < mask[t].size(); ++i) {
            CHECK(mask[t][i] == (static_cast<int>(i) + 1 == stream.media_index[t]));
        }
    }
}

TEST_CASE("layer schedule inserts every k-th layer starting at zero") {
    const auto every = layer_schedule(4, 1);
    CHECK(every.gated_layers == std::vector<int>{0, 1, 2, 3});

    const auto fourth = layer_schedule(12, 4);
    CHECK(fourth.gated_layers == std::vector<int>{0, 4, 8});

    const auto uneven = layer_schedule(10, 4);  // ceil(10/4) = 3
    CHECK(uneven.gated_layers == std::vector<int>{0, 4, 8});

    CHECK_THROWS_AS(layer_schedule(8, 0), ValidationError);
    CHECK_THROWS_AS(layer_schedule(8, 9), ValidationError);
    CHECK_THROWS_AS(layer_schedule(0, 1), ValidationError);
}

TEST_CASE("packing splits at window boundaries and drops short tails") {
    auto tok = make_whitespace_tokenizer();
    std::vector<TokenStream> streams;
    streams.push_back(mark_sequence(doc_of({"a b c d e f"}, {{0, 0.9}}), *tok));   // 8 tokens
    streams.push_back(mark_sequence(doc_of({"g h i j k l"}, {{0, 0.9}}), *tok));   // 8 tokens
    streams.push_back(mark_sequence(doc_of({"m n"}, {{0, 0.9}}), *tok));           // 4 tokens

    const auto packed = pack_window(streams, 10, *tok);
    // 20 tokens total -> windows of 10, 10; nothing dropped
    REQUIRE(packed.size() == 2);
    CHECK(packed[0].tokens.size() == 10);
    CHECK(packed[1].tokens.size() == 10);

    const auto packed2 = pack_window(streams, 16, *tok);
    // 20 tokens -> 16 + 4; the 4-token tail is under the 8 minimum
    REQUIRE(packed2.size() == 1);
    CHECK(packed2[0].tokens.size() == 16);
}

TEST_CASE("packed windows use window-local media indices") {
    auto tok = make_whitespace_tokenizer();
    std::vector<TokenStream> streams;
    streams.push_back(mark_sequence(doc_of({"a b c d e f"}, {{0, 0.9}}), *tok));
    streams.push_back(mark_sequence(doc_of({"g h i j k l"}, {{0, 0.9}}), *tok));
    const auto packed = pack_window(streams, 8, *tok);
    for (const auto & window : packed) {
        CHECK(window.media_index ==
              oracle::media_index_backward_scan(window.tokens, tok->image_token()));
    }
}

TEST_CASE("stream json and byte round trips") {
    auto tok = make_whitespace_tokenizer();
    const auto stream = mark_sequence(doc_of({"hello there friend"}, {{0, 0.9}}), *tok);

    const auto back = stream_from_json(stream_to_json(stream));
    CHECK(back.tokens == stream.tokens);
    CHECK(back.media_index == stream.media_index);

    const auto bytes = tokens_to_bytes(stream.tokens);
    CHECK(bytes.size() == stream.tokens.size() * 4);
    CHECK(tokens_from_bytes(bytes) == stream.tokens);
}

TEST_CASE("validate_stream flags inconsistent media indices") {
    auto tok = make_whitespace_tokenizer();
    auto stream = mark_sequence(doc_of({"a b"}, {{0, 0.9}}), *tok);
    CHECK_NOTHROW(validate_stream(stream));
    stream.media_index[1] = 7;
    CHECK_THROWS_AS(validate_stream(stream), ValidationError);
}
