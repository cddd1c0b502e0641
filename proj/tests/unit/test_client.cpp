#include <doctest.h>

#include "core/client.hpp"
#include "core/common.hpp"

#include <string>

using namespace ikit;

TEST_CASE("generate requests must match marker and image counts") {
    GenerateRequest req;
    req.prompt = "<image>Output: ";
    req.image_ids = {"img1"};
    CHECK_NOTHROW(validate_generate_request(req));

    req.image_ids = {};
    CHECK_THROWS_AS(validate_generate_request(req), ValidationError);

    req.prompt = "no markers";
    req.image_ids = {"img1"};
    CHECK_THROWS_AS(validate_generate_request(req), ValidationError);

    req.prompt = "<image>a<|endofchunk|><image>b ";
    req.image_ids = {"img1", "img2"};
    CHECK_NOTHROW(validate_generate_request(req));
}

TEST_CASE("score requests validate the same way") {
    ScoreRequest req;
    req.prompt = "<image>Answer: ";
    req.image_ids = {"img1"};
    req.completion = "yes";
    CHECK_NOTHROW(validate_score_request(req));
    req.image_ids = {};
    CHECK_THROWS_AS(validate_score_request(req), ValidationError);
}

TEST_CASE("wire field names are pinned") {
    GenerateRequest req;
    req.prompt = "p";
    req.image_ids = {"a", "b"};
    req.beams = 3;
    req.max_new_tokens = 20;
    req.stop_sequences = {"<|endofchunk|>"};
    const auto j = generate_request_to_json(req);
    CHECK(j.at("prompt") == "p");
    CHECK(j.at("image_ids").size() == 2);
    CHECK(j.at("beams") == 3);
    CHECK(j.at("max_new_tokens") == 20);
    CHECK(j.at("stop_sequences")[0] == "<|endofchunk|>");

    const auto back = generate_request_from_json(j);
    CHECK(back.prompt == req.prompt);
    CHECK(back.image_ids == req.image_ids);
    CHECK(back.stop_sequences == req.stop_sequences);

    ScoreRequest sreq;
    sreq.prompt = "p";
    sreq.completion = "yes";
    const auto sj = score_request_to_json(sreq);
    CHECK(sj.at("completion") == "yes");
    CHECK(score_request_from_json(sj).completion == "yes");
}

TEST_CASE("decode bounds cut at stop sequences then token budget") {
    GenerateRequest req;
    req.max_new_tokens = 20;
    req.stop_sequences = {"<|endofchunk|>"};

    const auto stopped = apply_decode_bounds("a small dog<|endofchunk|>trailing", req);
    CHECK(stopped.text == "a small dog");
    CHECK(stopped.finish_reason == FinishReason::Stop);

    req.max_new_tokens = 3;
    const auto truncated = apply_decode_bounds("one two three four five", req);
    CHECK(truncated.text == "one two three");
    CHECK(truncated.finish_reason == FinishReason::Length);

    req.max_new_tokens = 20;
    const auto natural = apply_decode_bounds("short answer", req);
    CHECK(natural.text == "short answer");
    CHECK(natural.finish_reason == FinishReason::Length);
}

TEST_CASE("stub table mode serves configured generations and scores") {
    const nlohmann::json spec = {
        {"mode", "table"},
        {"generations", {{"<image>Output: ", "a red house"}}},
        {"scores", nlohmann::json::array(
                       {{{"prompt", "<image>Answer: "}, {"completion", "yes"}, {"logprob", -0.5}},
                        {{"prompt", "<image>Answer: "}, {"completion", "no"}, {"logprob", -2.0}}})},
    };
    auto stub = StubModel::from_spec(spec);

    GenerateRequest req;
    req.prompt = "<image>Output: ";
    req.image_ids = {"img1"};
    CHECK(stub.generate(req).text == "a red house");

    ScoreRequest sreq;
    sreq.prompt = "<image>Answer: ";
    sreq.image_ids = {"img1"};
    sreq.completion = "yes";
    CHECK(stub.score(sreq) == doctest::Approx(-0.5));
    sreq.completion = "no";
    CHECK(stub.score(sreq) == doctest::Approx(-2.0));

    req.prompt = "<image>unconfigured ";
    CHECK_THROWS(stub.generate(req));
    sreq.completion = "maybe";
    CHECK_THROWS(stub.score(sreq));
}

TEST_CASE("stub default logprob answers unlisted score pairs") {
    const nlohmann::json spec = {{"mode", "table"}, {"default_logprob", -1.5}};
    auto stub = StubModel::from_spec(spec);
    ScoreRequest sreq;
    sreq.prompt = "<image>p ";
    sreq.image_ids = {"i"};
    sreq.completion = "anything";
    CHECK(stub.score(sreq) == doctest::Approx(-1.5));
}

TEST_CASE("echo_gold mode keys on the query image") {
    const nlohmann::json spec = {{"mode", "echo_gold"},
                                 {"gold", {{"q1", "a golden answer"}, {"q2", "another"}}}};
    auto stub = StubModel::from_spec(spec);
    GenerateRequest req;
    req.prompt = "<image>demo<|endofchunk|><image>Output: ";
    req.image_ids = {"d1", "q2"};  // last id is the query image
    CHECK(stub.generate(req).text == "another");
}

TEST_CASE("echo_demo mode repeats the final demonstration answer") {
    const nlohmann::json spec = {{"mode", "echo_demo"}};
    auto stub = StubModel::from_spec(spec);
    GenerateRequest req;
    req.prompt =
        "<image>Output: first demo<|endofchunk|><image>Output: final demo<|endofchunk|>"
        "<image>Output: ";
    req.image_ids = {"d1", "d2", "q"};
    CHECK(stub.generate(req).text == "final demo");
}

TEST_CASE("http client talks to the stub server") {
    const nlohmann::json spec = {
        {"mode", "table"},
        {"generations", {{"<image>Output: ", "over the wire"}}},
        {"scores", nlohmann::json::array(
                       {{{"prompt", "<image>p "}, {"completion", "yes"}, {"logprob", -0.25}}})},
    };
    StubServer server(StubModel::from_spec(spec));
    const int port = server.start(0);
    REQUIRE(port > 0);

    HttpModelClient client("http://127.0.0.1:" + std::to_string(port));
    GenerateRequest req;
    req.prompt = "<image>Output: ";
    req.image_ids = {"img1"};
    const auto resp = client.generate(req);
    CHECK(resp.text == "over the wire");

    ScoreRequest sreq;
    sreq.prompt = "<image>p ";
    sreq.image_ids = {"img1"};
    sreq.completion = "yes";
    CHECK(client.score(sreq) == doctest::Approx(-0.25));

    // unconfigured prompt surfaces as a client-side failure, not a hang
    req.prompt = "<image>missing ";
    CHECK_THROWS_AS(client.generate(req), RuntimeFailure);

    server.stop();
}

TEST_CASE("unreachable endpoints fail after retries") {
    HttpModelClient client("http://127.0.0.1:1");  // nothing listens there
    GenerateRequest req;
    req.prompt = "<image>p ";
    req.image_ids = {"i"};
    CHECK_THROWS_AS(client.generate(req), RuntimeFailure);
}
