#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ikit {

struct GenerateRequest {
    std::string prompt;
    std::vector<std::string> image_ids;
    int beams = 3;
    int max_new_tokens = 20;
    std::vector<std::string> stop_sequences;
};

enum class FinishReason { Length, Stop };

struct GenerateResponse {
    std::string text;  // stop sequence excluded
    FinishReason finish_reason = FinishReason::Length;
};

struct ScoreRequest {
    std::string prompt;
    std::vector<std::string> image_ids;
    std::string completion;
};

// Generator/scorer abstraction. score() returns the natural-log likelihood of
// the completion given the prompt, summed over completion tokens.
class ModelClient {
  public:
    virtual ~ModelClient() = default;
    virtual GenerateResponse generate(const GenerateRequest & req) = 0;
    virtual double score(const ScoreRequest & req) = 0;
};

// Validates that the image id count matches the number of image markers in
// the prompt. Throws ValidationError; runs before any network traffic.
void validate_generate_request(const GenerateRequest & req);
void validate_score_request(const ScoreRequest & req);

nlohmann::json generate_request_to_json(const GenerateRequest & req);
GenerateRequest generate_request_from_json(const nlohmann::json & j);
nlohmann::json score_request_to_json(const ScoreRequest & req);
ScoreRequest score_request_from_json(const nlohmann::json & j);

// JSON-over-HTTP client: POST /v1/generate and POST /v1/score. Retries up to
// 3 attempts with exponential backoff before surfacing a RuntimeFailure.
class HttpModelClient final : public ModelClient {
  public:
    explicit HttpModelClient(const std::string & endpoint);
    ~HttpModelClient() override;

    GenerateResponse generate(const GenerateRequest & req) override;
    double score(const ScoreRequest & req) override;

  private:
    nlohmann::json post(const std::string & path, const nlohmann::json & body);
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Deterministic in-process stub. Spec schema (JSON):
//   {"mode": "table" | "echo_gold" | "echo_demo",
//    "generations": {prompt: text},          // table mode
//    "scores": [{"prompt":..,"completion":..,"logprob":..}],
//    "gold": {image_id: text},               // echo_gold: answer for the query image
//    "default_logprob": float,               // optional fallback for score()
//    "latency_ms": int}                      // optional fixed delay
// echo_demo returns the text between the last answer cue of the final
// demonstration and the end-of-chunk marker that follows it.
class StubModel final : public ModelClient {
  public:
    static StubModel from_spec(const nlohmann::json & spec);
    static StubModel from_spec_file(const std::string & path);

    GenerateResponse generate(const GenerateRequest & req) override;
    double score(const ScoreRequest & req) override;

    int latency_ms() const { return latency_ms_; }

  private:
    std::string mode_ = "table";
    std::map<std::string, std::string> generations_;
    std::map<std::pair<std::string, std::string>, double> scores_;
    std::map<std::string, std::string> gold_;
    std::optional<double> default_logprob_;
    int latency_ms_ = 0;

    std::string resolve_text(const GenerateRequest & req) const;
};

// Serves a StubModel over the wire protocol on localhost. start() binds to
// the given port (0 picks a free one) and returns the bound port.
class StubServer {
  public:
    explicit StubServer(StubModel model);
    ~StubServer();

    int start(int port);
    void stop();
    int port() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Truncates generated text at the first stop sequence and at max_new_tokens
// whitespace tokens, reporting which bound fired. Shared by the stub and the
// server so both sides agree on decode semantics.
GenerateResponse apply_decode_bounds(const std::string & raw, const GenerateRequest & req);

}  // namespace ikit
