#pragma once

#include "client.hpp"
#include "metrics.hpp"
#include "retrieval.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ikit {

enum class TaskKind { Caption, Vqa, RankClassify };

struct TaskSpec {
    TaskKind kind = TaskKind::Caption;
    int beams = 3;
    int max_new_tokens = 20;                  // 20 caption, 5 vqa
    std::vector<std::string> options;         // rank classification completions
};

TaskSpec make_task(TaskKind kind);
TaskKind task_kind_from_string(const std::string & name);
std::string task_kind_to_string(TaskKind kind);

enum class Selection { Random, Rices };

struct EvalConfig {
    int shots = 0;  // one of {0, 4, 8, 16, 32}
    Selection selection = Selection::Random;
    std::vector<uint64_t> seeds = {1, 2, 3};
    int n_permutations = 6;  // rank-classification ensembling
    int jobs = 1;
};

void validate_eval_config(const EvalConfig & cfg);

// An in-context example. image_ref is absent only for the text-only
// demonstrations used in zero-shot prompts.
struct Demo {
    std::optional<std::string> image_ref;
    std::map<std::string, std::string> fields;
};

// One dataset row; task-specific fields are populated per kind.
struct EvalItem {
    std::string id;
    std::string image_id;
    std::vector<std::string> captions;  // caption tasks
    std::string question;               // vqa
    std::vector<std::string> answers;   // vqa, typically 10
    std::string text;                   // rank classification (meme text)
    int label = 0;                      // rank classification gold, 0|1
};

EvalItem eval_item_from_json(const nlohmann::json & j, TaskKind kind);
Demo demo_from_item(const EvalItem & item, TaskKind kind);

// Byte-deterministic prompt rendering: demos each end with the end-of-chunk
// marker; the query is rendered up to and including its answer cue plus one
// trailing space.
std::string render_prompt(const TaskSpec & task, const std::vector<Demo> & demos,
                          const Demo & query);

// Two demonstrations with images stripped, chosen by the active policy.
std::vector<Demo> zero_shot_demos(const std::vector<EvalItem> & pool, Selection selection,
                                  uint64_t seed, const EvalItem & query, TaskKind kind,
                                  const EmbeddingIndex * index);

std::vector<Demo> select_demos(const std::vector<EvalItem> & pool, const EvalItem & query,
                               int shots, Selection selection, uint64_t seed, TaskKind kind,
                               const EmbeddingIndex * index);

struct RankResult {
    std::string chosen;
    std::map<std::string, double> scores;  // per-option mean over permutations
};

// Scores every option under permutations of the demonstrations and averages:
// all distinct permutations when there are fewer than n_permutations,
// otherwise n_permutations distinct seeded ones.
RankResult rank_classify(ModelClient & client, const TaskSpec & task,
                         const std::vector<Demo> & demos, const Demo & query,
                         const std::vector<std::string> & demo_image_ids,
                         const std::string & query_image_id, int n_permutations, uint64_t seed);

struct RunReport {
    std::string task;
    int shots = 0;
    std::string selection;
    std::vector<double> per_seed;
    double mean = 0.0;
    double std_dev = 0.0;
    struct Failure {
        uint64_t seed = 0;
        std::string query_id;
        std::string error;
    };
    std::vector<Failure> failures;
};

RunReport run_eval(const TaskSpec & task, const std::vector<EvalItem> & pool,
                   const std::vector<EvalItem> & queries, const EvalConfig & cfg,
                   ModelClient & client, const EmbeddingIndex * index,
                   const VqaNormalizer & normalizer);

nlohmann::json run_report_to_json(const RunReport & report);

}  // namespace ikit
