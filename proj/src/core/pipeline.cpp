#include "pipeline.hpp"

#include "client.hpp"
#include "common.hpp"
#include "curation.hpp"
#include "eval.hpp"
#include "metrics.hpp"
#include "retrieval.hpp"
#include "schedule.hpp"
#include "sequence.hpp"
#include "shard.hpp"
#include "synth.hpp"

#include <fstream>
#include <functional>
#include <map>

namespace ikit::pipeline {

namespace {

using nlohmann::json;

json parse_line(const std::string & line, const std::string & path, size_t lineno) {
    try {
        return json::parse(line);
    } catch (const json::exception & e) {
        throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
}

std::vector<json> read_ndjson(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw RuntimeFailure("cannot open " + path);
    }
    std::vector<json> rows;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        rows.push_back(parse_line(line, path, lineno));
    }
    return rows;
}

void write_ndjson(const std::string & path, const std::vector<json> & rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw RuntimeFailure("cannot write " + path);
    }
    for (const auto & row : rows) {
        out << row.dump() << "\n";
    }
}

void write_json_file(const std::string & path, const json & doc) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw RuntimeFailure("cannot write " + path);
    }
    out << doc.dump(2) << "\n";
}

void write_text_file(const std::string & path, const std::string & text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw RuntimeFailure("cannot write " + path);
    }
    out << text;
}

json read_json_file(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw RuntimeFailure("cannot open " + path);
    }
    try {
        return json::parse(in);
    } catch (const json::exception & e) {
        throw ValidationError(path + ": " + e.what());
    }
}

template <typename T>
T require(const json & cfg, const std::string & key) {
    if (!cfg.contains(key)) {
        throw ValidationError("config: missing \"" + key + "\"");
    }
    try {
        return cfg.at(key).get<T>();
    } catch (const json::exception & e) {
        throw ValidationError("config: bad \"" + key + "\": " + e.what());
    }
}

template <typename T>
T get_or(const json & cfg, const std::string & key, T fallback) {
    if (!cfg.contains(key)) {
        return fallback;
    }
    try {
        return cfg.at(key).get<T>();
    } catch (const json::exception & e) {
        throw ValidationError("config: bad \"" + key + "\": " + e.what());
    }
}

EmbeddingIndex load_index(const json & cfg, const std::string & key) {
    const json spec = require<json>(cfg, key);
    return EmbeddingIndex::load(require<std::string>(spec, "vectors"),
                                require<std::string>(spec, "ids"));
}

}  // namespace

json filter_mmc4(const json & cfg) {
    const auto in_path = require<std::string>(cfg, "in");
    const auto out_path = require<std::string>(cfg, "out");
    const double threshold = get_or(cfg, "threshold", 0.24);
    const double p_reject = get_or(cfg, "reject_single_prob", 0.5);
    const uint64_t seed = get_or<uint64_t>(cfg, "seed", 0);
    std::optional<size_t> sample_size;
    if (cfg.contains("sample_size")) {
        sample_size = cfg.at("sample_size").get<size_t>();
    }

    std::vector<InterleavedDoc> docs;
    for (const auto & row : read_ndjson(in_path)) {
        docs.push_back(doc_from_json(row));
    }

    const auto tokenizer = make_whitespace_tokenizer();
    const CorpusStats stats = corpus_stats(docs, threshold, *tokenizer, sample_size, seed);

    std::vector<json> kept;
    for (const auto & doc : docs) {
        auto filtered = filter_doc(doc, threshold);
        if (!filtered) {
            continue;
        }
        if (reject_single_image(*filtered, p_reject, seed)) {
            continue;
        }
        kept.push_back(doc_to_json(*filtered));
    }
    write_ndjson(out_path, kept);

    json summary = stats_to_json(stats);
    summary["docs_out"] = kept.size();
    summary["config"] = cfg;
    if (cfg.contains("stats_out")) {
        write_json_file(cfg.at("stats_out").get<std::string>(), summary);
    }
    return summary;
}

json filter_pairs(const json & cfg) {
    const auto in_path = require<std::string>(cfg, "in");
    const auto out_path = require<std::string>(cfg, "out");
    const double sim_min = get_or(cfg, "sim_min", 0.28);
    const size_t max_tokens = get_or<size_t>(cfg, "max_tokens", 32);

    const auto tokenizer = make_whitespace_tokenizer();
    size_t pairs_in = 0;
    std::vector<json> kept;
    for (const auto & row : read_ndjson(in_path)) {
        ++pairs_in;
        auto filtered = filter_pair(pair_from_json(row), sim_min, max_tokens, *tokenizer);
        if (filtered) {
            kept.push_back(pair_to_json(*filtered));
        }
    }
    write_ndjson(out_path, kept);

    json summary = {{"pairs_in", pairs_in}, {"pairs_out", kept.size()}, {"config", cfg}};
    if (cfg.contains("stats_out")) {
        write_json_file(cfg.at("stats_out").get<std::string>(), summary);
    }
    return summary;
}

json synth(const json & cfg) {
    const auto pattern = parse_pattern(require<std::string>(cfg, "pattern"));
    const auto responses = read_ndjson(require<std::string>(cfg, "responses"));
    const auto out_path = require<std::string>(cfg, "out");

    const EmbeddingIndex image_index = load_index(cfg, "image_index");
    const EmbeddingIndex text_index = load_index(cfg, "text_index");
    const IndexTextEmbedder embedder{text_index};
    const CosineReranker reranker{image_index, text_index};

    InfillConfig infill_cfg;
    infill_cfg.k = get_or<size_t>(cfg, "k", 10);
    const json query_params = get_or(cfg, "query_params", json::object());
    for (const auto & [key, value] : query_params.items()) {
        infill_cfg.query_params[key] = value.get<std::string>();
    }

    std::vector<json> docs;
    size_t failures = 0;
    json failure_log = json::array();
    for (const auto & row : responses) {
        const auto id = require<std::string>(row, "id");
        try {
            SynthSequence seq = parse_response(require<std::string>(row, "response"), pattern);
            seq.id = id;
            docs.push_back(doc_to_json(infill(seq, image_index, embedder, reranker, infill_cfg)));
        } catch (const std::exception & e) {
            ++failures;
            failure_log.push_back({{"id", id}, {"error", e.what()}});
        }
    }
    write_ndjson(out_path, docs);
    return {{"responses_in", responses.size()}, {"docs_out", docs.size()},
            {"failures", failure_log}, {"config", cfg}};
}

json seq(const json & cfg) {
    const auto in_path = require<std::string>(cfg, "in");
    const auto out_path = require<std::string>(cfg, "out");
    const auto tokenizer = make_whitespace_tokenizer();

    std::vector<std::string> keys;
    std::vector<TokenStream> streams;
    for (const auto & row : read_ndjson(in_path)) {
        const InterleavedDoc doc = doc_from_json(row);
        keys.push_back(doc.doc_id);
        streams.push_back(mark_sequence(doc, *tokenizer));
    }

    std::vector<json> rows;
    if (cfg.contains("window")) {
        const size_t window = cfg.at("window").get<size_t>();
        const auto packed = pack_window(streams, window, *tokenizer);
        for (size_t i = 0; i < packed.size(); ++i) {
            rows.push_back({{"key", "window-" + std::to_string(i)},
                            {"stream", stream_to_json(packed[i])}});
        }
    } else {
        for (size_t i = 0; i < streams.size(); ++i) {
            rows.push_back({{"key", keys[i]}, {"stream", stream_to_json(streams[i])}});
        }
    }
    write_ndjson(out_path, rows);
    return {{"docs_in", keys.size()}, {"streams_out", rows.size()}, {"config", cfg}};
}

json shard_pack(const json & cfg) {
    const auto in_path = require<std::string>(cfg, "in");
    const auto prefix = require<std::string>(cfg, "prefix");
    const size_t max_per_shard = require<size_t>(cfg, "max_per_shard");

    std::vector<Sample> samples;
    for (const auto & row : read_ndjson(in_path)) {
        Sample sample;
        sample.key = require<std::string>(row, "key");
        const TokenStream stream = stream_from_json(require<json>(row, "stream"));
        const std::string meta = json{{"n_images", stream.n_images},
                                      {"media_index", stream.media_index}}
                                     .dump();
        sample.parts["json"] = std::vector<uint8_t>(meta.begin(), meta.end());
        sample.parts["tok"] = tokens_to_bytes(stream.tokens);
        samples.push_back(std::move(sample));
    }

    const ShardSet set = pack(samples, max_per_shard, prefix);
    json summary = manifest_to_json(set);
    summary["samples"] = samples.size();
    summary["config"] = cfg;
    if (cfg.contains("manifest_out")) {
        write_json_file(cfg.at("manifest_out").get<std::string>(), manifest_to_json(set));
    }
    return summary;
}

json shard_stats(const json & cfg) {
    const ShardSet set = manifest_from_json(read_json_file(require<std::string>(cfg, "manifest")));
    size_t total = 0;
    json per_shard = json::array();
    for (const auto & path : set.shard_paths) {
        const auto samples = unpack(path);
        total += samples.size();
        per_shard.push_back({{"path", path}, {"samples", samples.size()}});
    }
    return {{"shards", set.shard_paths.size()}, {"samples", total}, {"per_shard", per_shard},
            {"config", cfg}};
}

json shard_sample(const json & cfg) {
    const ShardSet set = manifest_from_json(read_json_file(require<std::string>(cfg, "manifest")));
    const size_t draws = require<size_t>(cfg, "draws");
    const uint64_t seed = get_or<uint64_t>(cfg, "seed", 0);
    const auto picks = sample_shards(set, draws, seed);
    json result = {{"draws", picks}, {"config", cfg}};
    if (cfg.contains("out")) {
        write_json_file(cfg.at("out").get<std::string>(), result);
    }
    return result;
}

json plan(const json & cfg) {
    const uint64_t budget_interleaved = require<uint64_t>(cfg, "budget_interleaved");
    const uint64_t budget_pairs = require<uint64_t>(cfg, "budget_pairs");
    const MixConfig mix = mix_config_from_json(get_or(cfg, "mix", json::object()));

    const TrainPlan plan(budget_interleaved, budget_pairs, mix);
    const MixCounts counts = interleaved_mix_counts(budget_interleaved, mix.chatgpt_fraction);

    const uint64_t first_steps =
        std::min<uint64_t>(get_or<uint64_t>(cfg, "first_steps", 10), plan.total_steps());
    json directives = json::array();
    for (uint64_t step = 0; step < first_steps; ++step) {
        directives.push_back(directive_to_json(plan.directive(step)));
    }
    if (plan.total_steps() > first_steps) {
        directives.push_back(directive_to_json(plan.directive(plan.total_steps() - 1)));
    }

    json result = {{"total_steps", plan.total_steps()},
                   {"mix_counts", {{"mmc4", counts.mmc4}, {"chatgpt", counts.chatgpt}}},
                   {"directives", directives},
                   {"warning", plan.warning()},
                   {"config", cfg}};
    if (cfg.contains("out")) {
        write_json_file(cfg.at("out").get<std::string>(), result);
    }
    return result;
}

json rices(const json & cfg) {
    const EmbeddingIndex index = load_index(cfg, "index");
    const size_t k = get_or<size_t>(cfg, "k", 32);
    const auto out_path = require<std::string>(cfg, "out");

    std::vector<json> rows;
    for (const auto & row : read_ndjson(require<std::string>(cfg, "queries"))) {
        const auto id = require<std::string>(row, "id");
        const auto query = require<std::vector<float>>(row, "vector");
        json neighbors = json::array();
        for (const auto & hit : index.topk(query, k)) {
            neighbors.push_back({{"id", hit.id}, {"sim", hit.sim}});
        }
        rows.push_back({{"id", id}, {"neighbors", neighbors}});
    }
    write_ndjson(out_path, rows);
    return {{"queries", rows.size()}, {"k", k}, {"config", cfg}};
}

json eval(const json & cfg) {
    const TaskKind kind = task_kind_from_string(require<std::string>(cfg, "task"));
    const TaskSpec task = make_task(kind);

    EvalConfig eval_cfg;
    eval_cfg.shots = require<int>(cfg, "shots");
    const auto selection = get_or<std::string>(cfg, "selection", "random");
    if (selection == "random") {
        eval_cfg.selection = Selection::Random;
    } else if (selection == "rices") {
        eval_cfg.selection = Selection::Rices;
    } else {
        throw ValidationError("config: selection must be \"random\" or \"rices\"");
    }
    eval_cfg.seeds = get_or(cfg, "seeds", std::vector<uint64_t>{1, 2, 3});
    eval_cfg.n_permutations = get_or(cfg, "n_permutations", 6);
    eval_cfg.jobs = get_or(cfg, "jobs", 1);

    std::vector<EvalItem> pool;
    for (const auto & row : read_ndjson(require<std::string>(cfg, "pool"))) {
        pool.push_back(eval_item_from_json(row, kind));
    }
    std::vector<EvalItem> queries;
    for (const auto & row : read_ndjson(require<std::string>(cfg, "queries"))) {
        queries.push_back(eval_item_from_json(row, kind));
    }

    std::optional<EmbeddingIndex> index;
    if (cfg.contains("index")) {
        index = load_index(cfg, "index");
    }

    std::unique_ptr<ModelClient> client;
    if (cfg.contains("stub_spec")) {
        client = std::make_unique<StubModel>(
            StubModel::from_spec_file(cfg.at("stub_spec").get<std::string>()));
    } else {
        client = std::make_unique<HttpModelClient>(require<std::string>(cfg, "endpoint"));
    }

    const VqaNormalizer normalizer =
        cfg.contains("contractions")
            ? VqaNormalizer(cfg.at("contractions").get<std::string>())
            : VqaNormalizer();

    const RunReport run = run_eval(task, pool, queries, eval_cfg, *client,
                                   index ? &*index : nullptr, normalizer);
    json result = run_report_to_json(run);
    result["config"] = cfg;
    if (cfg.contains("out")) {
        write_json_file(cfg.at("out").get<std::string>(), result);
    }
    return result;
}

json report(const json & cfg) {
    const auto kind = require<std::string>(cfg, "kind");
    json result;
    if (kind == "relative") {
        const ScoreTable ours = score_table_from_json(read_json_file(require<std::string>(cfg, "ours")));
        const ScoreTable base =
            score_table_from_json(read_json_file(require<std::string>(cfg, "baseline")));
        std::map<std::string, std::string> pairing;
        const json pairing_spec = require<json>(cfg, "pairing");
        for (const auto & [model, baseline] : pairing_spec.items()) {
            pairing[model] = baseline.get<std::string>();
        }
        const RelativeReport rel = relative_to_baseline(ours, base, pairing);
        result = relative_report_to_json(rel);
        if (cfg.contains("csv_out")) {
            write_text_file(cfg.at("csv_out").get<std::string>(), relative_report_to_csv(rel));
        }
        if (cfg.contains("svg_out")) {
            write_text_file(cfg.at("svg_out").get<std::string>(), relative_report_to_svg(rel));
        }
    } else if (kind == "sota") {
        const ScoreTable ours = score_table_from_json(read_json_file(require<std::string>(cfg, "ours")));
        const SotaTable sota = sota_table_from_json(read_json_file(require<std::string>(cfg, "sota")));
        result = sota_report_to_json(relative_to_sota(ours, require<std::string>(cfg, "model"),
                                                      require<int>(cfg, "shots"), sota));
    } else {
        throw ValidationError("config: report kind must be \"relative\" or \"sota\"");
    }
    result["config"] = cfg;
    if (cfg.contains("out")) {
        write_json_file(cfg.at("out").get<std::string>(), result);
    }
    return result;
}

json run_stage(const std::string & name, const json & cfg) {
    static const std::map<std::string, json (*)(const json &)> stages = {
        {"filter-mmc4", &filter_mmc4}, {"filter-pairs", &filter_pairs},
        {"synth", &synth},             {"seq", &seq},
        {"shard-pack", &shard_pack},   {"shard-stats", &shard_stats},
        {"shard-sample", &shard_sample}, {"plan", &plan},
        {"rices", &rices},             {"eval", &eval},
        {"report", &report}};
    auto it = stages.find(name);
    if (it == stages.end()) {
        throw ValidationError("unknown stage: " + name);
    }
    return it->second(cfg);
}

}  // namespace ikit::pipeline
