#pragma once

#include "tokenizer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ikit {

struct ImageRecord {
    std::string image_id;
    int anchor_span = 0;   // index of the text span the image is aligned to
    double clip_sim = 0.0; // cosine similarity in [-1, 1]
};

struct InterleavedDoc {
    std::string doc_id;
    std::vector<std::string> spans;
    std::vector<ImageRecord> images;
};

struct PairRecord {
    std::string image_id;
    std::string caption;
    double clip_sim = 0.0;
};

struct CorpusStats {
    uint64_t docs_in = 0;
    uint64_t docs_kept = 0;
    double frac_discarded = 0.0;
    double frac_single_image = 0.0;               // among kept docs
    std::optional<double> median_images;          // absent when no docs kept
    std::optional<double> median_tokens;
    std::map<uint64_t, uint64_t> image_count_histogram;
    std::map<uint64_t, uint64_t> token_count_histogram;  // bucketed, key = bucket start
    uint64_t token_bucket_width = 64;
};

// Drops images whose similarity falls below the threshold (>= keeps), keeping
// all text spans. Returns nullopt when no image survives.
std::optional<InterleavedDoc> filter_doc(const InterleavedDoc & doc, double threshold);

// Keep/reject decision for the single-image rejection step. Pure in
// (rng_seed, doc_id, image count); docs with >= 2 images are always kept.
bool reject_single_image(const InterleavedDoc & doc, double p_reject, uint64_t rng_seed);

// Similarity floor plus caption truncation to max_tokens tokens.
std::optional<PairRecord> filter_pair(const PairRecord & pair, double sim_min, size_t max_tokens,
                                      const Tokenizer & tokenizer);

// Filters the docs at `threshold` and reports discard fraction over all docs
// and medians/histograms over kept docs. When sample_size is given, medians
// and histograms are computed over a seeded uniform sample of kept docs.
CorpusStats corpus_stats(const std::vector<InterleavedDoc> & docs, double threshold,
                         const Tokenizer & tokenizer, std::optional<size_t> sample_size,
                         uint64_t rng_seed);

size_t doc_token_count(const InterleavedDoc & doc, const Tokenizer & tokenizer);

// NDJSON document/pair schemas.
InterleavedDoc doc_from_json(const nlohmann::json & j);
nlohmann::json doc_to_json(const InterleavedDoc & doc);
PairRecord pair_from_json(const nlohmann::json & j);
nlohmann::json pair_to_json(const PairRecord & pair);
nlohmann::json stats_to_json(const CorpusStats & stats);

void validate_doc(const InterleavedDoc & doc);

}  // namespace ikit
