#include "eval.hpp"

#include "common.hpp"
#include "tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

namespace ikit {

TaskSpec make_task(TaskKind kind) {
    TaskSpec task;
    task.kind = kind;
    task.beams = 3;
    switch (kind) {
        case TaskKind::Caption:
            task.max_new_tokens = 20;
            break;
        case TaskKind::Vqa:
            task.max_new_tokens = 5;
            break;
        case TaskKind::RankClassify:
            task.max_new_tokens = 5;
            task.options = {"yes", "no"};
            break;
    }
    return task;
}

TaskKind task_kind_from_string(const std::string & name) {
    if (name == "caption") {
        return TaskKind::Caption;
    }
    if (name == "vqa") {
        return TaskKind::Vqa;
    }
    if (name == "classify" || name == "rank-classify" || name == "hatefulmemes") {
        return TaskKind::RankClassify;
    }
    throw ValidationError("unknown task kind: " + name);
}

std::string task_kind_to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::Caption: return "caption";
        case TaskKind::Vqa: return "vqa";
        case TaskKind::RankClassify: return "classify";
    }
    return "?";
}

void validate_eval_config(const EvalConfig & cfg) {
    if (cfg.shots != 0 && cfg.shots != 4 && cfg.shots != 8 && cfg.shots != 16 &&
        cfg.shots != 32) {
        throw ValidationError("eval config: shots must be one of {0,4,8,16,32}");
    }
    if (cfg.seeds.empty()) {
        throw ValidationError("eval config: seeds must be non-empty");
    }
    if (cfg.n_permutations < 1) {
        throw ValidationError("eval config: n_permutations must be >= 1");
    }
}

EvalItem eval_item_from_json(const nlohmann::json & j, TaskKind kind) {
    EvalItem item;
    try {
        item.id = j.at("id").get<std::string>();
        item.image_id = j.at("image_id").get<std::string>();
        switch (kind) {
            case TaskKind::Caption:
                item.captions = j.at("captions").get<std::vector<std::string>>();
                break;
            case TaskKind::Vqa:
                item.question = j.at("question").get<std::string>();
                item.answers = j.at("answers").get<std::vector<std::string>>();
                break;
            case TaskKind::RankClassify:
                item.text = j.at("text").get<std::string>();
                item.label = j.at("label").get<int>();
                break;
        }
    } catch (const nlohmann::json::exception & e) {
        throw ValidationError(std::string("bad dataset record: ") + e.what());
    }
    return item;
}

Demo demo_from_item(const EvalItem & item, TaskKind kind) {
    Demo demo;
    demo.image_ref = item.image_id;
    switch (kind) {
        case TaskKind::Caption:
            if (item.captions.empty()) {
                throw ValidationError("item " + item.id + ": no captions");
            }
            demo.fields["caption"] = item.captions.front();
            break;
        case TaskKind::Vqa:
            if (item.answers.empty()) {
                throw ValidationError("item " + item.id + ": no answers");
            }
            demo.fields["question"] = item.question;
            demo.fields["answer"] = item.answers.front();
            break;
        case TaskKind::RankClassify:
            demo.fields["text"] = item.text;
            demo.fields["answer"] = item.label == 1 ? "yes" : "no";
            break;
    }
    return demo;
}

namespace {

const std::string & require_field(const Demo & demo, const std::string & name, size_t index) {
    auto it = demo.fields.find(name);
    if (it == demo.fields.end()) {
        throw ValidationError("render: demo " + std::to_string(index) + " missing field \"" +
                              name + "\"");
    }
    return it->second;
}

// Up to the answer cue (inclusive, trailing space); the answer itself is
// appended only for demonstrations.
std::string render_stem(const TaskSpec & task, const Demo & demo, size_t index) {
    std::string out;
    if (demo.image_ref) {
        out += Tokenizer::kImageMarker;  // no space after the marker
    }
    switch (task.kind) {
        case TaskKind::Caption:
            out += "Output: ";
            break;
        case TaskKind::Vqa:
            out += "Question: " + require_field(demo, "question", index) + " Short answer: ";
            break;
        case TaskKind::RankClassify:
            out += "is an image with: '" + require_field(demo, "text", index) +
                   "' written on it. Is it hateful? Answer: ";
            break;
    }
    return out;
}

std::string answer_field_name(TaskKind kind) {
    return kind == TaskKind::Caption ? "caption" : "answer";
}

uint64_t bounded_factorial(size_t n, uint64_t bound) {
    uint64_t f = 1;
    for (size_t i = 2; i <= n; ++i) {
        f *= i;
        if (f > bound) {
            return bound + 1;
        }
    }
    return f;
}

}  // namespace

std::string render_prompt(const TaskSpec & task, const std::vector<Demo> & demos,
                          const Demo & query) {
    std::string out;
    for (size_t i = 0; i < demos.size(); ++i) {
        out += render_stem(task, demos[i], i);
        out += require_field(demos[i], answer_field_name(task.kind), i);
        out += Tokenizer::kEndOfChunkMarker;
    }
    out += render_stem(task, query, demos.size());
    return out;
}

std::vector<Demo> zero_shot_demos(const std::vector<EvalItem> & pool, Selection selection,
                                  uint64_t seed, const EvalItem & query, TaskKind kind,
                                  const EmbeddingIndex * index) {
    if (pool.size() < 2) {
        throw ValidationError("zero_shot_demos: pool must have >= 2 items");
    }
    std::vector<const EvalItem *> chosen;
    if (selection == Selection::Random) {
        std::vector<size_t> order(pool.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng = keyed_rng(seed, query.id);
        rng.shuffle(order);
        chosen = {&pool[order[0]], &pool[order[1]]};
    } else {
        if (index == nullptr) {
            throw ValidationError("zero_shot_demos: RICES requires an embedding index");
        }
        std::map<std::string, const EvalItem *> by_image;
        for (const auto & item : pool) {
            by_image[item.image_id] = &item;
        }
        const auto & ids = index->ids();
        const auto query_row = std::find(ids.begin(), ids.end(), query.image_id);
        if (query_row == ids.end()) {
            throw ValidationError("zero_shot_demos: query image " + query.image_id +
                                  " not in index");
        }
        const auto candidates =
            index->topk(index->row(static_cast<size_t>(query_row - ids.begin())), index->size());
        std::vector<ScoredId> picks;
        for (const auto & cand : candidates) {
            if (cand.id == query.image_id || !by_image.count(cand.id)) {
                continue;
            }
            picks.push_back(cand);
            if (picks.size() == 2) {
                break;
            }
        }
        if (picks.size() < 2) {
            throw ValidationError("zero_shot_demos: fewer than 2 retrievable pool items");
        }
        for (const auto & pick : order_for_prompt(std::move(picks))) {
            chosen.push_back(by_image.at(pick.id));
        }
    }
    std::vector<Demo> demos;
    for (const auto * item : chosen) {
        Demo demo = demo_from_item(*item, kind);
        demo.image_ref.reset();  // text-only
        demos.push_back(std::move(demo));
    }
    return demos;
}

std::vector<Demo> select_demos(const std::vector<EvalItem> & pool, const EvalItem & query,
                               int shots, Selection selection, uint64_t seed, TaskKind kind,
                               const EmbeddingIndex * index) {
    if (shots == 0) {
        return zero_shot_demos(pool, selection, seed, query, kind, index);
    }
    if (static_cast<size_t>(shots) > pool.size()) {
        throw ValidationError("select_demos: shots exceed pool size");
    }
    std::vector<Demo> demos;
    if (selection == Selection::Random) {
        std::vector<size_t> order(pool.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng = keyed_rng(seed, query.id);
        rng.shuffle(order);
        for (int i = 0; i < shots; ++i) {
            demos.push_back(demo_from_item(pool[order[static_cast<size_t>(i)]], kind));
        }
    } else {
        if (index == nullptr) {
            throw ValidationError("select_demos: RICES requires an embedding index");
        }
        std::map<std::string, const EvalItem *> by_image;
        for (const auto & item : pool) {
            by_image[item.image_id] = &item;
        }
        const auto & ids = index->ids();
        const auto query_row = std::find(ids.begin(), ids.end(), query.image_id);
        if (query_row == ids.end()) {
            throw ValidationError("select_demos: query image " + query.image_id + " not in index");
        }
        const auto candidates = index->topk(
            index->row(static_cast<size_t>(query_row - ids.begin())), index->size());
        std::vector<ScoredId> picks;
        for (const auto & cand : candidates) {
            if (cand.id == query.image_id || !by_image.count(cand.id)) {
                continue;
            }
            picks.push_back(cand);
            if (picks.size() == static_cast<size_t>(shots)) {
                break;
            }
        }
        if (picks.size() < static_cast<size_t>(shots)) {
            throw ValidationError("select_demos: not enough retrievable pool items");
        }
        for (const auto & pick : order_for_prompt(std::move(picks))) {
            demos.push_back(demo_from_item(*by_image.at(pick.id), kind));
        }
    }
    return demos;
}

RankResult rank_classify(ModelClient & client, const TaskSpec & task,
                         const std::vector<Demo> & demos, const Demo & query,
                         const std::vector<std::string> & demo_image_ids,
                         const std::string & query_image_id, int n_permutations, uint64_t seed) {
    if (task.options.size() < 2) {
        throw ValidationError("rank_classify: need >= 2 options");
    }
    if (demo_image_ids.size() != demos.size()) {
        throw ValidationError("rank_classify: demo image id list mismatch");
    }

    const size_t m = demos.size();
    std::vector<std::vector<size_t>> permutations;
    std::vector<size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    const uint64_t n_distinct = bounded_factorial(m, static_cast<uint64_t>(n_permutations));
    if (n_distinct <= static_cast<uint64_t>(n_permutations)) {
        do {
            permutations.push_back(order);
        } while (std::next_permutation(order.begin(), order.end()));
    } else {
        Rng rng(seed);
        std::set<std::vector<size_t>> seen;
        while (seen.size() < static_cast<size_t>(n_permutations)) {
            auto perm = order;
            rng.shuffle(perm);
            seen.insert(std::move(perm));
        }
        permutations.assign(seen.begin(), seen.end());
    }

    std::map<std::string, double> totals;
    for (const auto & perm : permutations) {
        std::vector<Demo> permuted;
        std::vector<std::string> image_ids;
        for (size_t idx : perm) {
            permuted.push_back(demos[idx]);
            if (demos[idx].image_ref) {
                image_ids.push_back(demo_image_ids[idx]);
            }
        }
        image_ids.push_back(query_image_id);
        const std::string prompt = render_prompt(task, permuted, query);
        for (const auto & option : task.options) {
            totals[option] += client.score({prompt, image_ids, option});
        }
    }

    RankResult result;
    for (const auto & option : task.options) {
        result.scores[option] = totals[option] / static_cast<double>(permutations.size());
    }
    result.chosen = task.options.front();
    for (const auto & option : task.options) {
        if (result.scores[option] > result.scores[result.chosen]) {
            result.chosen = option;  // ties keep the earlier declared option
        }
    }
    return result;
}

namespace {

struct QueryOutcome {
    bool ok = false;
    std::string error;
    std::string generated;              // caption / vqa
    double rank_margin = 0.0;           // classify: score(opt0) - score(opt1)
};

void run_queries(const TaskSpec & task, const std::vector<EvalItem> & pool,
                 const std::vector<EvalItem> & queries, const EvalConfig & cfg, uint64_t seed,
                 ModelClient & client, const EmbeddingIndex * index,
                 std::vector<QueryOutcome> & outcomes) {
    std::mutex client_mutex;
    auto work = [&](size_t qi) {
        const EvalItem & query = queries[qi];
        QueryOutcome & outcome = outcomes[qi];
        try {
            const auto demos =
                select_demos(pool, query, cfg.shots, cfg.selection, seed, task.kind, index);
            Demo query_demo = demo_from_item(query, task.kind);
            query_demo.fields.erase(answer_field_name(task.kind));

            std::vector<std::string> demo_image_ids;
            for (const auto & demo : demos) {
                demo_image_ids.push_back(demo.image_ref.value_or(""));
            }

            std::lock_guard<std::mutex> lock(client_mutex);
            if (task.kind == TaskKind::RankClassify) {
                uint64_t sm = seed;
                const uint64_t perm_seed = splitmix64(sm) ^ fnv1a64(query.id);
                const auto result = rank_classify(client, task, demos, query_demo, demo_image_ids,
                                                  query.image_id, cfg.n_permutations, perm_seed);
                outcome.rank_margin =
                    result.scores.at(task.options[0]) - result.scores.at(task.options[1]);
            } else {
                GenerateRequest req;
                req.prompt = render_prompt(task, demos, query_demo);
                for (const auto & demo : demos) {
                    if (demo.image_ref) {
                        req.image_ids.push_back(*demo.image_ref);
                    }
                }
                req.image_ids.push_back(query.image_id);
                req.beams = task.beams;
                req.max_new_tokens = task.max_new_tokens;
                req.stop_sequences = {Tokenizer::kEndOfChunkMarker};
                auto resp = client.generate(req);
                if (task.kind == TaskKind::Vqa) {
                    // Strip at the first newline and lowercase; the metric
                    // applies full normalization.
                    resp.text = resp.text.substr(0, resp.text.find('\n'));
                    std::transform(resp.text.begin(), resp.text.end(), resp.text.begin(),
                                   [](unsigned char c) {
                                       return static_cast<char>(std::tolower(c));
                                   });
                }
                outcome.generated = resp.text;
            }
            outcome.ok = true;
        } catch (const std::exception & e) {
            outcome.error = e.what();
        }
    };

    const size_t n_threads = std::max(1, cfg.jobs);
    if (n_threads == 1) {
        for (size_t qi = 0; qi < queries.size(); ++qi) {
            work(qi);
        }
        return;
    }
    std::vector<std::thread> threads;
    for (size_t t = 0; t < n_threads; ++t) {
        threads.emplace_back([&, t] {
            for (size_t qi = t; qi < queries.size(); qi += n_threads) {
                work(qi);
            }
        });
    }
    for (auto & thread : threads) {
        thread.join();
    }
}

}  // namespace

RunReport run_eval(const TaskSpec & task, const std::vector<EvalItem> & pool,
                   const std::vector<EvalItem> & queries, const EvalConfig & cfg,
                   ModelClient & client, const EmbeddingIndex * index,
                   const VqaNormalizer & normalizer) {
    validate_eval_config(cfg);
    if (queries.empty()) {
        throw ValidationError("run_eval: empty eval split");
    }

    RunReport report;
    report.task = task_kind_to_string(task.kind);
    report.shots = cfg.shots;
    report.selection = cfg.selection == Selection::Random ? "random" : "rices";

    for (uint64_t seed : cfg.seeds) {
        std::vector<QueryOutcome> outcomes(queries.size());
        run_queries(task, pool, queries, cfg, seed, client, index, outcomes);

        std::map<std::string, std::string> candidates;
        std::map<std::string, std::vector<std::string>> references;
        std::vector<double> accs;
        std::vector<double> rank_scores;
        std::vector<int> rank_labels;
        for (size_t qi = 0; qi < queries.size(); ++qi) {
            const auto & outcome = outcomes[qi];
            if (!outcome.ok) {
                report.failures.push_back({seed, queries[qi].id, outcome.error});
                continue;
            }
            switch (task.kind) {
                case TaskKind::Caption:
                    candidates[queries[qi].id] = outcome.generated;
                    references[queries[qi].id] = queries[qi].captions;
                    break;
                case TaskKind::Vqa:
                    accs.push_back(vqa_accuracy(outcome.generated, queries[qi].answers,
                                                normalizer));
                    break;
                case TaskKind::RankClassify:
                    rank_scores.push_back(outcome.rank_margin);
                    rank_labels.push_back(queries[qi].label);
                    break;
            }
        }

        double value = 0.0;
        switch (task.kind) {
            case TaskKind::Caption:
                value = cider(candidates, references).corpus_score;
                break;
            case TaskKind::Vqa:
                if (accs.empty()) {
                    throw RuntimeFailure("run_eval: all queries failed for seed " +
                                         std::to_string(seed));
                }
                value = 100.0 * std::accumulate(accs.begin(), accs.end(), 0.0) /
                        static_cast<double>(accs.size());
                break;
            case TaskKind::RankClassify:
                value = 100.0 * auc_roc(rank_scores, rank_labels);
                break;
        }
        report.per_seed.push_back(value);
    }

    const size_t total = queries.size() * cfg.seeds.size();
    if (report.failures.size() * 100 > total) {
        std::string sample = report.failures.front().query_id + ": " +
                             report.failures.front().error;
        throw RuntimeFailure("run_eval: " + std::to_string(report.failures.size()) + "/" +
                             std::to_string(total) + " queries failed (>1%); first: " + sample);
    }

    const double sum = std::accumulate(report.per_seed.begin(), report.per_seed.end(), 0.0);
    report.mean = sum / static_cast<double>(report.per_seed.size());
    double var = 0.0;
    for (double v : report.per_seed) {
        var += (v - report.mean) * (v - report.mean);
    }
    report.std_dev = std::sqrt(var / static_cast<double>(report.per_seed.size()));
    return report;
}

nlohmann::json run_report_to_json(const RunReport & report) {
    nlohmann::json failures = nlohmann::json::array();
    for (const auto & f : report.failures) {
        failures.push_back({{"seed", f.seed}, {"query_id", f.query_id}, {"error", f.error}});
    }
    return {{"task", report.task},     {"shots", report.shots}, {"selection", report.selection},
            {"per_seed", report.per_seed}, {"mean", report.mean},   {"std", report.std_dev},
            {"failures", failures}};
}

}  // namespace ikit
