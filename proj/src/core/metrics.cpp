#include "metrics.hpp"

#include "common.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace ikit {

namespace {

const std::map<std::string, std::string> & builtin_contractions() {
    static const std::map<std::string, std::string> map = {
        {"aint", "ain't"},       {"arent", "aren't"},     {"cant", "can't"},
        {"couldve", "could've"}, {"couldnt", "couldn't"}, {"didnt", "didn't"},
        {"doesnt", "doesn't"},   {"dont", "don't"},       {"hadnt", "hadn't"},
        {"hasnt", "hasn't"},     {"havent", "haven't"},   {"hed", "he'd"},
        {"hes", "he's"},         {"howd", "how'd"},       {"howll", "how'll"},
        {"hows", "how's"},       {"id", "i'd"},           {"im", "i'm"},
        {"ive", "i've"},         {"isnt", "isn't"},       {"itd", "it'd"},
        {"itll", "it'll"},       {"lets", "let's"},       {"maam", "ma'am"},
        {"mightve", "might've"}, {"mustve", "must've"},   {"neednt", "needn't"},
        {"oclock", "o'clock"},   {"shant", "shan't"},     {"shed", "she'd"},
        {"shes", "she's"},       {"shouldve", "should've"}, {"shouldnt", "shouldn't"},
        {"somebodyd", "somebody'd"}, {"somebodyll", "somebody'll"}, {"somebodys", "somebody's"},
        {"someoned", "someone'd"},   {"someonell", "someone'll"},   {"someones", "someone's"},
        {"somethingd", "something'd"}, {"somethingll", "something'll"}, {"thats", "that's"},
        {"thered", "there'd"},   {"therere", "there're"}, {"theres", "there's"},
        {"theyd", "they'd"},     {"theyll", "they'll"},   {"theyre", "they're"},
        {"theyve", "they've"},   {"twas", "'twas"},       {"wasnt", "wasn't"},
        {"wed", "we'd"},         {"weve", "we've"},       {"werent", "weren't"},
        {"whatll", "what'll"},   {"whatre", "what're"},   {"whats", "what's"},
        {"whatve", "what've"},   {"whens", "when's"},     {"whered", "where'd"},
        {"wheres", "where's"},   {"whereve", "where've"}, {"whod", "who'd"},
        {"wholl", "who'll"},     {"whos", "who's"},       {"whove", "who've"},
        {"whyll", "why'll"},     {"whyre", "why're"},     {"whys", "why's"},
        {"wont", "won't"},       {"wouldve", "would've"}, {"wouldnt", "wouldn't"},
        {"yall", "y'all"},       {"youd", "you'd"},       {"youll", "you'll"},
        {"youre", "you're"},     {"youve", "you've"},
    };
    return map;
}

std::map<std::string, std::string> number_word_map() {
    return {
        {"none", "0"}, {"zero", "0"}, {"one", "1"}, {"two", "2"},  {"three", "3"}, {"four", "4"},
        {"five", "5"}, {"six", "6"},  {"seven", "7"}, {"eight", "8"}, {"nine", "9"}, {"ten", "10"},
    };
}

bool is_digit(char c) {
    return c >= '0' && c <= '9';
}

}  // namespace

VqaNormalizer::VqaNormalizer()
    : contractions_(builtin_contractions()), number_words_(number_word_map()) {}

VqaNormalizer::VqaNormalizer(const std::string & contractions_path)
    : number_words_(number_word_map()) {
    std::ifstream in(contractions_path);
    if (!in) {
        throw RuntimeFailure("cannot read contraction map " + contractions_path);
    }
    nlohmann::json j;
    try {
        in >> j;
        for (auto it = j.begin(); it != j.end(); ++it) {
            contractions_[it.key()] = it.value().get<std::string>();
        }
    } catch (const nlohmann::json::exception & e) {
        throw ValidationError(std::string("bad contraction map: ") + e.what());
    }
}

std::string VqaNormalizer::normalize(const std::string & answer) const {
    // Truncate at the first newline, then lowercase.
    std::string text = answer.substr(0, answer.find('\n'));
    std::transform(text.begin(), text.end(), text.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

    std::string stripped;
    for (size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        const bool between_digits =
            i > 0 && i + 1 < text.size() && is_digit(text[i - 1]) && is_digit(text[i + 1]);
        if (c == '.' ) {
            if (between_digits) {
                stripped += c;  // keep decimal points
            }
        } else if (c == ',') {
            if (!between_digits) {
                stripped += ' ';  // drop thousands separators, split otherwise
            }
        } else if (c == '\'') {
            stripped += c;  // apostrophes stay for contraction matching
        } else if (std::ispunct(static_cast<unsigned char>(c))) {
            stripped += ' ';
        } else {
            stripped += c;
        }
    }

    std::istringstream in(stripped);
    std::string word;
    std::string out;
    while (in >> word) {
        if (word == "a" || word == "an" || word == "the") {
            continue;
        }
        if (auto num = number_words_.find(word); num != number_words_.end()) {
            word = num->second;
        } else if (auto con = contractions_.find(word); con != contractions_.end()) {
            word = con->second;
        }
        if (!out.empty()) {
            out += ' ';
        }
        out += word;
    }
    return out;
}

double vqa_accuracy(const std::string & prediction, const std::vector<std::string> & answers,
                    const VqaNormalizer & normalizer) {
    if (answers.empty()) {
        throw ValidationError("vqa_accuracy: empty answer set");
    }
    const std::string pred = normalizer.normalize(prediction);
    size_t matches = 0;
    for (const auto & answer : answers) {
        if (normalizer.normalize(answer) == pred) {
            matches++;
        }
    }
    return std::min(static_cast<double>(matches) / 3.0, 1.0);
}

// ---------------------------------------------------------------------------
// CIDEr-D
// ---------------------------------------------------------------------------

namespace {

constexpr int kMaxN = 4;
constexpr double kSigma = 6.0;

std::vector<std::string> caption_tokens(const std::string & text) {
    std::string cleaned;
    for (char c : text) {
        if (std::ispunct(static_cast<unsigned char>(c))) {
            cleaned += ' ';
        } else {
            cleaned += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    std::vector<std::string> tokens;
    std::istringstream in(cleaned);
    std::string word;
    while (in >> word) {
        tokens.push_back(word);
    }
    return tokens;
}

using NgramCounts = std::map<std::string, double>;

// Counts per n, grams joined with '\x1f'.
std::array<NgramCounts, kMaxN> count_ngrams(const std::vector<std::string> & tokens) {
    std::array<NgramCounts, kMaxN> counts;
    for (int n = 1; n <= kMaxN; ++n) {
        for (size_t i = 0; i + n <= tokens.size(); ++i) {
            std::string gram = tokens[i];
            for (int j = 1; j < n; ++j) {
                gram += '\x1f';
                gram += tokens[i + j];
            }
            counts[n - 1][gram] += 1.0;
        }
    }
    return counts;
}

struct TfidfVec {
    std::array<NgramCounts, kMaxN> weights;
    std::array<double, kMaxN> norm{};
    size_t length = 0;  // unigram count
};

TfidfVec to_tfidf(const std::array<NgramCounts, kMaxN> & counts,
                  const NgramCounts & document_frequency, double log_ref_len) {
    TfidfVec vec;
    vec.length = 0;
    for (const auto & [gram, c] : counts[0]) {
        (void)gram;
        vec.length += static_cast<size_t>(c);
    }
    for (int n = 0; n < kMaxN; ++n) {
        double sq = 0.0;
        for (const auto & [gram, c] : counts[n]) {
            double df = 0.0;
            if (auto it = document_frequency.find(gram); it != document_frequency.end()) {
                df = it->second;
            }
            const double idf = log_ref_len - std::log(std::max(1.0, df));
            const double w = c * idf;
            vec.weights[n][gram] = w;
            sq += w * w;
        }
        vec.norm[n] = std::sqrt(sq);
    }
    return vec;
}

std::array<double, kMaxN> clipped_cosine(const TfidfVec & hyp, const TfidfVec & ref) {
    std::array<double, kMaxN> val{};
    const double delta = static_cast<double>(hyp.length) - static_cast<double>(ref.length);
    const double penalty = std::exp(-(delta * delta) / (2.0 * kSigma * kSigma));
    for (int n = 0; n < kMaxN; ++n) {
        double dot = 0.0;
        for (const auto & [gram, wh] : hyp.weights[n]) {
            if (auto it = ref.weights[n].find(gram); it != ref.weights[n].end()) {
                dot += std::min(wh, it->second) * it->second;  // candidate counts clipped
            }
        }
        if (hyp.norm[n] > 0.0 && ref.norm[n] > 0.0) {
            val[n] = dot / (hyp.norm[n] * ref.norm[n]);
        }
        val[n] *= penalty;
    }
    return val;
}

}  // namespace

CiderResult cider(const std::map<std::string, std::string> & candidates,
                  const std::map<std::string, std::vector<std::string>> & references) {
    if (candidates.empty()) {
        throw ValidationError("cider: no candidates");
    }
    if (candidates.size() < 2) {
        throw ValidationError("cider: corpus needs >= 2 images for meaningful idf");
    }
    for (const auto & [id, text] : candidates) {
        (void)text;
        auto it = references.find(id);
        if (it == references.end() || it->second.empty()) {
            throw ValidationError("cider: no references for id " + id);
        }
    }
    for (const auto & [id, refs] : references) {
        (void)refs;
        if (!candidates.count(id)) {
            throw ValidationError("cider: reference id " + id + " has no candidate");
        }
    }

    // Document frequency: a gram counts once per image whose reference set
    // contains it.
    NgramCounts document_frequency;
    std::map<std::string, std::vector<std::array<NgramCounts, kMaxN>>> ref_counts;
    for (const auto & [id, refs] : references) {
        std::set<std::string> seen;
        for (const auto & ref : refs) {
            auto counts = count_ngrams(caption_tokens(ref));
            for (int n = 0; n < kMaxN; ++n) {
                for (const auto & [gram, c] : counts[n]) {
                    (void)c;
                    seen.insert(gram);
                }
            }
            ref_counts[id].push_back(std::move(counts));
        }
        for (const auto & gram : seen) {
            document_frequency[gram] += 1.0;
        }
    }
    const double log_ref_len = std::log(static_cast<double>(references.size()));

    CiderResult result;
    double total = 0.0;
    for (const auto & [id, cand_text] : candidates) {
        const auto hyp =
            to_tfidf(count_ngrams(caption_tokens(cand_text)), document_frequency, log_ref_len);
        std::array<double, kMaxN> acc{};
        const auto & refs = ref_counts[id];
        for (const auto & counts : refs) {
            const auto ref_vec = to_tfidf(counts, document_frequency, log_ref_len);
            const auto val = clipped_cosine(hyp, ref_vec);
            for (int n = 0; n < kMaxN; ++n) {
                acc[n] += val[n];
            }
        }
        double score = 0.0;
        for (int n = 0; n < kMaxN; ++n) {
            score += acc[n] / static_cast<double>(refs.size());
        }
        score = score / kMaxN * 10.0;
        result.per_id[id] = score;
        total += score;
    }
    result.corpus_score = total / static_cast<double>(candidates.size());
    return result;
}

double auc_roc(const std::vector<double> & scores, const std::vector<int> & labels) {
    if (scores.size() != labels.size()) {
        throw ValidationError("auc_roc: scores/labels length mismatch");
    }
    size_t n_pos = 0;
    size_t n_neg = 0;
    for (int label : labels) {
        if (label == 1) {
            n_pos++;
        } else if (label == 0) {
            n_neg++;
        } else {
            throw ValidationError("auc_roc: labels must be 0 or 1");
        }
    }
    if (n_pos == 0 || n_neg == 0) {
        throw ValidationError("auc_roc: both classes must be present");
    }
    double wins = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) {
            continue;
        }
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) {
                continue;
            }
            if (scores[i] > scores[j]) {
                wins += 1.0;
            } else if (scores[i] == scores[j]) {
                wins += 0.5;
            }
        }
    }
    return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<double> gaussian_smooth(const std::vector<double> & series, size_t window) {
    if (window < 1) {
        throw ValidationError("gaussian_smooth: window must be >= 1");
    }
    if (series.empty()) {
        throw ValidationError("gaussian_smooth: empty series");
    }
    const double sigma = static_cast<double>(window) / 4.0;
    const long w = static_cast<long>(window);
    std::vector<double> kernel(2 * window + 1);
    for (long j = -w; j <= w; ++j) {
        kernel[j + w] = std::exp(-static_cast<double>(j * j) / (2.0 * sigma * sigma));
    }
    std::vector<double> out(series.size());
    const long n = static_cast<long>(series.size());
    for (long i = 0; i < n; ++i) {
        double acc = 0.0;
        double weight = 0.0;
        for (long j = -w; j <= w; ++j) {
            const long t = i + j;
            if (t < 0 || t >= n) {
                continue;
            }
            acc += kernel[j + w] * series[t];
            weight += kernel[j + w];
        }
        out[i] = acc / weight;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Relative-performance reports
// ---------------------------------------------------------------------------

namespace {

void validate_shots(int shots) {
    if (shots != 0 && shots != 4 && shots != 8 && shots != 16 && shots != 32) {
        throw ValidationError("score table: shots must be one of {0,4,8,16,32}, got " +
                              std::to_string(shots));
    }
}

}  // namespace

RelativeReport relative_to_baseline(const ScoreTable & ours, const ScoreTable & baseline,
                                    const std::map<std::string, std::string> & pairing) {
    RelativeReport report;
    std::vector<std::string> missing;
    for (const auto & [key, score] : ours.entries) {
        auto pair_it = pairing.find(key.model);
        if (pair_it == pairing.end()) {
            continue;
        }
        const ScoreKey base_key{key.benchmark, key.shots, pair_it->second};
        auto base_it = baseline.entries.find(base_key);
        if (base_it == baseline.entries.end()) {
            missing.push_back(key.benchmark + "/" + std::to_string(key.shots) + "/" +
                              pair_it->second);
            continue;
        }
        report.settings.push_back(
            {key.benchmark, key.shots, key.model, pair_it->second, score / base_it->second});
    }
    if (!missing.empty()) {
        std::string joined;
        for (const auto & m : missing) {
            joined += (joined.empty() ? "" : ", ") + m;
        }
        throw ValidationError("relative_to_baseline: missing baseline settings: " + joined);
    }
    if (report.settings.empty()) {
        throw ValidationError("relative_to_baseline: no paired settings");
    }
    double sum = 0.0;
    for (const auto & s : report.settings) {
        sum += s.ratio;
    }
    report.mean = sum / static_cast<double>(report.settings.size());
    double var = 0.0;
    for (const auto & s : report.settings) {
        var += (s.ratio - report.mean) * (s.ratio - report.mean);
    }
    report.std_dev = std::sqrt(var / static_cast<double>(report.settings.size()));
    return report;
}

SotaReport relative_to_sota(const ScoreTable & ours, const std::string & model, int shots,
                            const SotaTable & sota) {
    if (sota.entries.empty()) {
        throw ValidationError("relative_to_sota: empty sota table");
    }
    SotaReport report;
    double sum = 0.0;
    for (const auto & [benchmark, sota_score] : sota.entries) {
        const ScoreKey key{benchmark, shots, model};
        auto it = ours.entries.find(key);
        if (it == ours.entries.end()) {
            throw ValidationError("relative_to_sota: missing score for " + benchmark + " at " +
                                  std::to_string(shots) + " shots");
        }
        const double fraction = it->second / sota_score;
        report.fractions[benchmark] = fraction;
        sum += fraction;
    }
    report.mean = sum / static_cast<double>(sota.entries.size());
    return report;
}

ScoreTable score_table_from_json(const nlohmann::json & j) {
    ScoreTable table;
    try {
        for (const auto & entry : j.at("entries")) {
            ScoreKey key;
            key.benchmark = entry.at("benchmark").get<std::string>();
            key.shots = entry.at("shots").get<int>();
            key.model = entry.at("model").get<std::string>();
            validate_shots(key.shots);
            const double score = entry.at("score").get<double>();
            if (!std::isfinite(score)) {
                throw ValidationError("score table: non-finite score for " + key.benchmark);
            }
            table.entries[key] = score;
        }
    } catch (const nlohmann::json::exception & e) {
        throw ValidationError(std::string("bad score table: ") + e.what());
    }
    return table;
}

nlohmann::json score_table_to_json(const ScoreTable & table) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto & [key, score] : table.entries) {
        entries.push_back({{"benchmark", key.benchmark},
                           {"shots", key.shots},
                           {"model", key.model},
                           {"score", score}});
    }
    return {{"entries", entries}};
}

SotaTable sota_table_from_json(const nlohmann::json & j) {
    SotaTable table;
    try {
        const auto & entries = j.at("entries");
        for (auto it = entries.begin(); it != entries.end(); ++it) {
            table.entries[it.key()] = it.value().get<double>();
        }
    } catch (const nlohmann::json::exception & e) {
        throw ValidationError(std::string("bad sota table: ") + e.what());
    }
    return table;
}

nlohmann::json relative_report_to_json(const RelativeReport & report) {
    nlohmann::json settings = nlohmann::json::array();
    for (const auto & s : report.settings) {
        settings.push_back({{"benchmark", s.benchmark},
                            {"shots", s.shots},
                            {"model", s.model},
                            {"baseline_model", s.baseline_model},
                            {"ratio", s.ratio}});
    }
    return {{"settings", settings}, {"mean", report.mean}, {"std", report.std_dev}};
}

nlohmann::json sota_report_to_json(const SotaReport & report) {
    nlohmann::json fractions = nlohmann::json::object();
    for (const auto & [benchmark, fraction] : report.fractions) {
        fractions[benchmark] = fraction;
    }
    return {{"fractions", fractions}, {"mean", report.mean}};
}

std::string relative_report_to_csv(const RelativeReport & report) {
    std::ostringstream out;
    out << "benchmark,shots,model,baseline_model,ratio\n";
    for (const auto & s : report.settings) {
        out << s.benchmark << ',' << s.shots << ',' << s.model << ',' << s.baseline_model << ','
            << s.ratio << '\n';
    }
    out << "mean,,,," << report.mean << '\n';
    out << "std,,,," << report.std_dev << '\n';
    return out.str();
}

std::string relative_report_to_svg(const RelativeReport & report) {
    const int bar_width = 18;
    const int gap = 6;
    const int height = 240;
    const int width =
        static_cast<int>(report.settings.size()) * (bar_width + gap) + gap + 60;
    double max_ratio = 1.0;
    for (const auto & s : report.settings) {
        max_ratio = std::max(max_ratio, s.ratio);
    }
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height + 40 << "\">\n";
    int x = gap + 50;
    for (const auto & s : report.settings) {
        const int h = static_cast<int>(s.ratio / max_ratio * height);
        out << "  <rect x=\"" << x << "\" y=\"" << height - h << "\" width=\"" << bar_width
            << "\" height=\"" << h << "\" fill=\"#4878cf\"><title>" << s.benchmark << " "
            << s.shots << "-shot: " << s.ratio << "</title></rect>\n";
        x += bar_width + gap;
    }
    const int mean_y = height - static_cast<int>(report.mean / max_ratio * height);
    out << "  <line x1=\"50\" y1=\"" << mean_y << "\" x2=\"" << width << "\" y2=\"" << mean_y
        << "\" stroke=\"#d65f5f\" stroke-dasharray=\"4\"/>\n";
    out << "  <text x=\"4\" y=\"" << mean_y + 4 << "\" font-size=\"12\">mean</text>\n";
    out << "</svg>\n";
    return out.str();
}

}  // namespace ikit
