#include "client.hpp"

#include "common.hpp"
#include "tokenizer.hpp"

#include <httplib.h>

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

namespace ikit {

namespace {

size_t count_occurrences(const std::string & text, const std::string & needle) {
    size_t count = 0;
    for (size_t pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + needle.size())) {
        count++;
    }
    return count;
}

}  // namespace

void validate_generate_request(const GenerateRequest & req) {
    const size_t markers = count_occurrences(req.prompt, Tokenizer::kImageMarker);
    if (markers != req.image_ids.size()) {
        throw ValidationError("generate request: " + std::to_string(req.image_ids.size()) +
                              " image ids for " + std::to_string(markers) + " image markers");
    }
    if (req.beams < 1) {
        throw ValidationError("generate request: beams must be >= 1");
    }
    if (req.max_new_tokens < 1) {
        throw ValidationError("generate request: max_new_tokens must be >= 1");
    }
}

void validate_score_request(const ScoreRequest & req) {
    if (req.completion.empty()) {
        throw ValidationError("score request: empty completion");
    }
    const size_t markers = count_occurrences(req.prompt, Tokenizer::kImageMarker);
    if (markers != req.image_ids.size()) {
        throw ValidationError("score request: " + std::to_string(req.image_ids.size()) +
                              " image ids for " + std::to_string(markers) + " image markers");
    }
}

nlohmann::json generate_request_to_json(const GenerateRequest & req) {
    return {{"prompt", req.prompt},
            {"image_ids", req.image_ids},
            {"beams", req.beams},
            {"max_new_tokens", req.max_new_tokens},
            {"stop_sequences", req.stop_sequences}};
}

GenerateRequest generate_request_from_json(const nlohmann::json & j) {
    GenerateRequest req;
    try {
        req.prompt = j.at("prompt").get<std::string>();
        req.image_ids = j.at("image_ids").get<std::vector<std::string>>();
        req.beams = j.at("beams").get<int>();
        req.max_new_tokens = j.at("max_new_tokens").get<int>();
        req.stop_sequences = j.at("stop_sequences").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception & e) {
        throw ValidationError(std::string("bad generate request: ") + e.what());
    }
    return req;
}

nlohmann::json score_request_to_json(const ScoreRequest & req) {
    return {{"prompt", req.prompt}, {"image_ids", req.image_ids}, {"completion", req.completion}};
}

ScoreRequest score_request_from_json(const nlohmann::json & j) {
    ScoreRequest req;
    try {
        req.prompt = j.at("prompt").get<std::string>();
        req.image_ids = j.at("image_ids").get<std::vector<std::string>>();
        req.completion = j.at("completion").get<std::string>();
    } catch (const nlohmann::json::exception & e) {
        throw ValidationError(std::string("bad score request: ") + e.what());
    }
    return req;
}

GenerateResponse apply_decode_bounds(const std::string & raw, const GenerateRequest & req) {
    std::string text = raw;
    bool stopped = false;
    for (const auto & stop : req.stop_sequences) {
        if (stop.empty()) {
            continue;
        }
        const size_t pos = text.find(stop);
        if (pos != std::string::npos) {
            text = text.substr(0, pos);
            stopped = true;
        }
    }
    // Whitespace tokens stand in for model tokens in the stub protocol.
    std::istringstream in(text);
    std::vector<std::string> words;
    std::string word;
    while (in >> word) {
        words.push_back(word);
    }
    bool truncated = false;
    if (words.size() > static_cast<size_t>(req.max_new_tokens)) {
        words.resize(static_cast<size_t>(req.max_new_tokens));
        truncated = true;
    }
    std::string joined;
    for (const auto & w : words) {
        if (!joined.empty()) {
            joined += ' ';
        }
        joined += w;
    }
    GenerateResponse resp;
    resp.text = truncated ? joined : (stopped ? text : joined);
    if (truncated) {
        resp.finish_reason = FinishReason::Length;
    } else {
        resp.finish_reason = stopped ? FinishReason::Stop : FinishReason::Length;
    }
    return resp;
}

// ---------------------------------------------------------------------------
// HTTP client
// ---------------------------------------------------------------------------

struct HttpModelClient::Impl {
    explicit Impl(const std::string & endpoint) : client(endpoint) {
        client.set_connection_timeout(5, 0);
        client.set_read_timeout(30, 0);
    }
    httplib::Client client;
};

HttpModelClient::HttpModelClient(const std::string & endpoint)
    : impl_(std::make_unique<Impl>(endpoint)) {}

HttpModelClient::~HttpModelClient() = default;

nlohmann::json HttpModelClient::post(const std::string & path, const nlohmann::json & body) {
    const std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt < 3; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(100 << (attempt - 1)));
        }
        auto res = impl_->client.Post(path, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "http status " + std::to_string(res->status) + ": " + res->body;
            if (res->status >= 400 && res->status < 500) {
                break;  // client errors will not heal on retry
            }
            continue;
        }
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception & e) {
            last_error = std::string("malformed response: ") + e.what();
        }
    }
    throw RuntimeFailure("model endpoint " + path + " failed: " + last_error);
}

GenerateResponse HttpModelClient::generate(const GenerateRequest & req) {
    validate_generate_request(req);
    const auto j = post("/v1/generate", generate_request_to_json(req));
    GenerateResponse resp;
    try {
        resp.text = j.at("text").get<std::string>();
        const std::string reason = j.at("finish_reason").get<std::string>();
        if (reason == "stop") {
            resp.finish_reason = FinishReason::Stop;
        } else if (reason == "length") {
            resp.finish_reason = FinishReason::Length;
        } else {
            throw RuntimeFailure("generate: unknown finish_reason " + reason);
        }
    } catch (const nlohmann::json::exception & e) {
        throw RuntimeFailure(std::string("generate: malformed response: ") + e.what());
    }
    return resp;
}

double HttpModelClient::score(const ScoreRequest & req) {
    validate_score_request(req);
    const auto j = post("/v1/score", score_request_to_json(req));
    try {
        return j.at("logprob").get<double>();
    } catch (const nlohmann::json::exception & e) {
        throw RuntimeFailure(std::string("score: malformed response: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Stub model
// ---------------------------------------------------------------------------

StubModel StubModel::from_spec(const nlohmann::json & spec) {
    StubModel stub;
    try {
        stub.mode_ = spec.value("mode", "table");
        if (stub.mode_ != "table" && stub.mode_ != "echo_gold" && stub.mode_ != "echo_demo") {
            throw ValidationError("stub spec: unknown mode " + stub.mode_);
        }
        const nlohmann::json generations = spec.value("generations", nlohmann::json::object());
        for (const auto & [prompt, text] : generations.items()) {
            stub.generations_[prompt] = text.get<std::string>();
        }
        for (const auto & entry : spec.value("scores", nlohmann::json::array())) {
            stub.scores_[{entry.at("prompt").get<std::string>(),
                          entry.at("completion").get<std::string>()}] =
                entry.at("logprob").get<double>();
        }
        const nlohmann::json gold = spec.value("gold", nlohmann::json::object());
        for (const auto & [image_id, text] : gold.items()) {
            stub.gold_[image_id] = text.get<std::string>();
        }
        if (spec.contains("default_logprob")) {
            stub.default_logprob_ = spec.at("default_logprob").get<double>();
        }
        stub.latency_ms_ = spec.value("latency_ms", 0);
    } catch (const nlohmann::json::exception & e) {
        throw ValidationError(std::string("bad stub spec: ") + e.what());
    }
    return stub;
}

StubModel StubModel::from_spec_file(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw RuntimeFailure("cannot read stub spec " + path);
    }
    nlohmann::json spec;
    try {
        in >> spec;
    } catch (const nlohmann::json::exception & e) {
        throw ValidationError(std::string("bad stub spec file: ") + e.what());
    }
    return from_spec(spec);
}

std::string StubModel::resolve_text(const GenerateRequest & req) const {
    if (mode_ == "echo_gold") {
        if (req.image_ids.empty()) {
            throw ValidationError("echo_gold stub: request has no image ids");
        }
        const std::string & query_image = req.image_ids.back();
        auto it = gold_.find(query_image);
        if (it == gold_.end()) {
            throw ValidationError("echo_gold stub: no gold text for image " + query_image);
        }
        return it->second;
    }
    if (mode_ == "echo_demo") {
        // The prompt ends with the query's answer cue; the previous cue
        // belongs to the last demonstration.
        static const std::vector<std::string> cues = {"Output: ", "Short answer: ", "Answer: "};
        std::vector<size_t> positions;
        for (const auto & cue : cues) {
            for (size_t pos = req.prompt.find(cue); pos != std::string::npos;
                 pos = req.prompt.find(cue, pos + 1)) {
                positions.push_back(pos + cue.size());
            }
        }
        std::sort(positions.begin(), positions.end());
        if (positions.size() < 2) {
            return "";
        }
        const size_t begin = positions[positions.size() - 2];
        const size_t end = req.prompt.find(Tokenizer::kEndOfChunkMarker, begin);
        return req.prompt.substr(begin, end == std::string::npos ? std::string::npos : end - begin);
    }
    auto it = generations_.find(req.prompt);
    if (it == generations_.end()) {
        throw ValidationError("stub: unconfigured prompt");
    }
    return it->second;
}

GenerateResponse StubModel::generate(const GenerateRequest & req) {
    validate_generate_request(req);
    if (latency_ms_ > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(latency_ms_));
    }
    return apply_decode_bounds(resolve_text(req), req);
}

double StubModel::score(const ScoreRequest & req) {
    validate_score_request(req);
    if (latency_ms_ > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(latency_ms_));
    }
    auto it = scores_.find({req.prompt, req.completion});
    if (it != scores_.end()) {
        return it->second;
    }
    if (default_logprob_) {
        return *default_logprob_;
    }
    throw ValidationError("stub: unconfigured pair");
}

// ---------------------------------------------------------------------------
// Stub server
// ---------------------------------------------------------------------------

struct StubServer::Impl {
    explicit Impl(StubModel m) : model(std::move(m)) {}

    StubModel model;
    httplib::Server server;
    std::thread thread;
    int port = 0;
};

StubServer::StubServer(StubModel model) : impl_(std::make_unique<Impl>(std::move(model))) {
    auto handle = [this](const httplib::Request & req, httplib::Response & res, bool is_score) {
        try {
            nlohmann::json out;
            const auto body = nlohmann::json::parse(req.body);
            if (is_score) {
                out = {{"logprob", impl_->model.score(score_request_from_json(body))}};
            } else {
                const auto resp = impl_->model.generate(generate_request_from_json(body));
                out = {{"text", resp.text},
                       {"finish_reason",
                        resp.finish_reason == FinishReason::Stop ? "stop" : "length"}};
            }
            res.set_content(out.dump(), "application/json");
        } catch (const std::exception & e) {
            res.status = 400;
            res.set_content(nlohmann::json({{"error", e.what()}}).dump(), "application/json");
        }
    };
    impl_->server.Post("/v1/generate",
                       [handle](const httplib::Request & req, httplib::Response & res) {
                           handle(req, res, false);
                       });
    impl_->server.Post("/v1/score",
                       [handle](const httplib::Request & req, httplib::Response & res) {
                           handle(req, res, true);
                       });
}

StubServer::~StubServer() {
    stop();
}

int StubServer::start(int port) {
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
    } else {
        if (!impl_->server.bind_to_port("127.0.0.1", port)) {
            throw RuntimeFailure("stub server: cannot bind port " + std::to_string(port));
        }
        impl_->port = port;
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return impl_->port;
}

void StubServer::stop() {
    if (impl_ && impl_->thread.joinable()) {
        impl_->server.stop();
        impl_->thread.join();
    }
}

int StubServer::port() const {
    return impl_->port;
}

}  // namespace ikit
