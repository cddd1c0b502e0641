#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ikit {

// Answer normalization used by VQA accuracy: lowercasing, punctuation
// stripping, article removal, number words to digits, contraction expansion,
// whitespace collapsing. The contraction map ships as a data file and can be
// overridden; the built-in table matches the shipped file.
class VqaNormalizer {
  public:
    VqaNormalizer();
    explicit VqaNormalizer(const std::string & contractions_path);

    std::string normalize(const std::string & answer) const;

  private:
    std::map<std::string, std::string> contractions_;
    std::map<std::string, std::string> number_words_;
};

// min(matches / 3, 1) over the normalized ground-truth answer set.
double vqa_accuracy(const std::string & prediction, const std::vector<std::string> & answers,
                    const VqaNormalizer & normalizer);

// Consensus captioning score: TF-IDF weighted n-gram (n = 1..4) cosine with
// count clipping and a length gaussian penalty (sigma = 6), averaged over n
// and scaled by 10. Returns the corpus mean and per-id scores.
struct CiderResult {
    double corpus_score = 0.0;
    std::map<std::string, double> per_id;
};

CiderResult cider(const std::map<std::string, std::string> & candidates,
                  const std::map<std::string, std::vector<std::string>> & references);

// Mann-Whitney formulation: probability a random positive outranks a random
// negative, ties counted 1/2.
double auc_roc(const std::vector<double> & scores, const std::vector<int> & labels);

// Gaussian kernel with sigma = window / 4, truncated at +-window, kernel
// renormalized at the boundaries. Output length equals input length.
std::vector<double> gaussian_smooth(const std::vector<double> & series, size_t window);

// ---------------------------------------------------------------------------
// Relative-performance reporting over benchmark score tables.
// ---------------------------------------------------------------------------

struct ScoreKey {
    std::string benchmark;
    int shots = 0;
    std::string model;
    auto operator<=>(const ScoreKey &) const = default;
};

struct ScoreTable {
    std::map<ScoreKey, double> entries;
};

struct SotaTable {
    std::map<std::string, double> entries;  // benchmark -> fine-tuned SoTA score
};

struct RelativeReport {
    struct Setting {
        std::string benchmark;
        int shots = 0;
        std::string model;
        std::string baseline_model;
        double ratio = 0.0;
    };
    std::vector<Setting> settings;
    double mean = 0.0;
    double std_dev = 0.0;  // population std over settings
};

struct SotaReport {
    std::map<std::string, double> fractions;  // benchmark -> score / sota
    double mean = 0.0;
};

// Per-(benchmark, shots) ratios ours/baseline under the model pairing, plus
// mean and population std over settings.
RelativeReport relative_to_baseline(const ScoreTable & ours, const ScoreTable & baseline,
                                    const std::map<std::string, std::string> & pairing);

SotaReport relative_to_sota(const ScoreTable & ours, const std::string & model, int shots,
                            const SotaTable & sota);

ScoreTable score_table_from_json(const nlohmann::json & j);
nlohmann::json score_table_to_json(const ScoreTable & table);
SotaTable sota_table_from_json(const nlohmann::json & j);
nlohmann::json relative_report_to_json(const RelativeReport & report);
nlohmann::json sota_report_to_json(const SotaReport & report);

std::string relative_report_to_csv(const RelativeReport & report);

// Minimal grouped-bar SVG for relative reports.
std::string relative_report_to_svg(const RelativeReport & report);

}  // namespace ikit
