#include "curation.hpp"

#include "common.hpp"

#include <algorithm>

namespace ikit {

void validate_doc(const InterleavedDoc & doc) {
    if (doc.spans.empty()) {
        throw ValidationError("doc " + doc.doc_id + ": spans empty");
    }
    for (const auto & img : doc.images) {
        if (img.anchor_span < 0 || static_cast<size_t>(img.anchor_span) >= doc.spans.size()) {
            throw ValidationError("doc " + doc.doc_id + ": image " + img.image_id +
                                  " anchor_span " + std::to_string(img.anchor_span) +
                                  " out of range");
        }
        if (img.clip_sim < -1.0 || img.clip_sim > 1.0) {
            throw ValidationError("doc " + doc.doc_id + ": image " + img.image_id +
                                  " clip_sim out of [-1, 1]");
        }
    }
}

std::optional<InterleavedDoc> filter_doc(const InterleavedDoc & doc, double threshold) {
    validate_doc(doc);
    InterleavedDoc out;
    out.doc_id = doc.doc_id;
    out.spans = doc.spans;
    for (const auto & img : doc.images) {
        if (img.clip_sim >= threshold) {
            out.images.push_back(img);
        }
    }
    if (out.images.empty()) {
        return std::nullopt;
    }
    return out;
}

bool reject_single_image(const InterleavedDoc & doc, double p_reject, uint64_t rng_seed) {
    if (doc.images.empty()) {
        throw ValidationError("reject_single_image: doc " + doc.doc_id + " has zero images");
    }
    if (p_reject < 0.0 || p_reject > 1.0) {
        throw ValidationError("reject_single_image: p_reject out of [0, 1]");
    }
    if (doc.images.size() >= 2) {
        return false;
    }
    Rng rng = keyed_rng(rng_seed, doc.doc_id);
    return rng.next_double() < p_reject;
}

std::optional<PairRecord> filter_pair(const PairRecord & pair, double sim_min, size_t max_tokens,
                                      const Tokenizer & tokenizer) {
    if (max_tokens < 1) {
        throw ValidationError("filter_pair: max_tokens must be >= 1");
    }
    if (pair.caption.empty()) {
        throw ValidationError("filter_pair: pair " + pair.image_id + " has empty caption");
    }
    if (pair.clip_sim < sim_min) {
        return std::nullopt;
    }
    PairRecord out = pair;
    auto tokens = tokenizer.encode(pair.caption);
    if (tokens.size() > max_tokens) {
        tokens.resize(max_tokens);
        out.caption = tokenizer.decode(tokens);
    }
    if (out.caption.empty()) {
        throw ValidationError("filter_pair: pair " + pair.image_id + " empty after truncation");
    }
    return out;
}

size_t doc_token_count(const InterleavedDoc & doc, const Tokenizer & tokenizer) {
    size_t n = 0;
    for (const auto & span : doc.spans) {
        n += tokenizer.encode(span).size();
    }
    return n;
}

namespace {

double median_of(std::vector<uint64_t> values) {
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    if (n % 2 == 1) {
        return static_cast<double>(values[n / 2]);
    }
    return (static_cast<double>(values[n / 2 - 1]) + static_cast<double>(values[n / 2])) / 2.0;
}

}  // namespace

CorpusStats corpus_stats(const std::vector<InterleavedDoc> & docs, double threshold,
                         const Tokenizer & tokenizer, std::optional<size_t> sample_size,
                         uint64_t rng_seed) {
    if (docs.empty()) {
        throw ValidationError("corpus_stats: empty corpus");
    }
    CorpusStats stats;
    stats.docs_in = docs.size();

    std::vector<const InterleavedDoc *> kept;
    std::vector<InterleavedDoc> kept_storage;
    kept_storage.reserve(docs.size());
    for (const auto & doc : docs) {
        if (auto filtered = filter_doc(doc, threshold)) {
            kept_storage.push_back(std::move(*filtered));
        }
    }
    stats.docs_kept = kept_storage.size();
    stats.frac_discarded =
        1.0 - static_cast<double>(stats.docs_kept) / static_cast<double>(stats.docs_in);

    for (const auto & doc : kept_storage) {
        kept.push_back(&doc);
    }
    // Seeded uniform sample without replacement for medians/histograms.
    if (sample_size && *sample_size < kept.size()) {
        Rng rng(rng_seed);
        rng.shuffle(kept);
        kept.resize(*sample_size);
    }

    if (kept.empty()) {
        return stats;
    }

    std::vector<uint64_t> image_counts;
    std::vector<uint64_t> token_counts;
    uint64_t single = 0;
    for (const auto * doc : kept) {
        const uint64_t n_images = doc->images.size();
        const uint64_t n_tokens = doc_token_count(*doc, tokenizer);
        image_counts.push_back(n_images);
        token_counts.push_back(n_tokens);
        stats.image_count_histogram[n_images]++;
        stats.token_count_histogram[(n_tokens / stats.token_bucket_width) *
                                    stats.token_bucket_width]++;
        if (n_images == 1) {
            single++;
        }
    }
    stats.frac_single_image = static_cast<double>(single) / static_cast<double>(kept.size());
    stats.median_images = median_of(image_counts);
    stats.median_tokens = median_of(token_counts);
    return stats;
}

InterleavedDoc doc_from_json(const nlohmann::json & j) {
    InterleavedDoc doc;
    try {
        doc.doc_id = j.at("doc_id").get<std::string>();
        doc.spans = j.at("spans").get<std::vector<std::string>>();
        for (const auto & ji : j.value("images", nlohmann::json::array())) {
            ImageRecord img;
            img.image_id = ji.at("image_id").get<std::string>();
            img.anchor_span = ji.at("anchor_span").get<int>();
            img.clip_sim = ji.at("clip_sim").get<double>();
            doc.images.push_back(std::move(img));
        }
    } catch (const nlohmann::json::exception & e) {
        throw ValidationError(std::string("bad document record: ") + e.what());
    }
    return doc;
}

nlohmann::json doc_to_json(const InterleavedDoc & doc) {
    nlohmann::json images = nlohmann::json::array();
    for (const auto & img : doc.images) {
        images.push_back({{"image_id", img.image_id},
                          {"anchor_span", img.anchor_span},
                          {"clip_sim", img.clip_sim}});
    }
    return {{"doc_id", doc.doc_id}, {"spans", doc.spans}, {"images", images}};
}

PairRecord pair_from_json(const nlohmann::json & j) {
    PairRecord pair;
    try {
        pair.image_id = j.at("image_id").get<std::string>();
        pair.caption = j.at("caption").get<std::string>();
        pair.clip_sim = j.at("clip_sim").get<double>();
    } catch (const nlohmann::json::exception & e) {
        throw ValidationError(std::string("bad pair record: ") + e.what());
    }
    return pair;
}

nlohmann::json pair_to_json(const PairRecord & pair) {
    return {{"image_id", pair.image_id}, {"caption", pair.caption}, {"clip_sim", pair.clip_sim}};
}

nlohmann::json stats_to_json(const CorpusStats & stats) {
    nlohmann::json img_hist = nlohmann::json::object();
    for (const auto & [k, v] : stats.image_count_histogram) {
        img_hist[std::to_string(k)] = v;
    }
    nlohmann::json tok_hist = nlohmann::json::object();
    for (const auto & [k, v] : stats.token_count_histogram) {
        tok_hist[std::to_string(k)] = v;
    }
    nlohmann::json j = {
        {"docs_in", stats.docs_in},
        {"docs_kept", stats.docs_kept},
        {"frac_discarded", stats.frac_discarded},
        {"frac_single_image", stats.frac_single_image},
        {"image_count_histogram", img_hist},
        {"token_count_histogram", tok_hist},
        {"token_bucket_width", stats.token_bucket_width},
    };
    if (stats.median_images) {
        j["median_images"] = *stats.median_images;
    }
    if (stats.median_tokens) {
        j["median_tokens"] = *stats.median_tokens;
    }
    return j;
}

}  // namespace ikit
