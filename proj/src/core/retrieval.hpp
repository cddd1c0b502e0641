#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ikit {

struct ScoredId {
    std::string id;
    double sim = 0.0;
};

// Exact cosine-similarity index over precomputed embeddings. Rows are
// L2-normalized at ingest; search is a linear scan, so results match a
// full-sort oracle exactly.
class EmbeddingIndex {
  public:
    struct Record {
        std::string id;
        std::vector<float> vector;
    };

    static EmbeddingIndex build(const std::vector<Record> & records);

    // Exactly min(k, n) results, descending similarity, ties broken by
    // ascending id. Ranking is scale-invariant in the query.
    std::vector<ScoredId> topk(const std::vector<float> & query, size_t k) const;

    size_t size() const { return ids_.size(); }
    size_t dim() const { return dim_; }
    const std::vector<std::string> & ids() const { return ids_; }
    std::vector<float> row(size_t i) const;

    // On-disk format: one JSON header line {"dim","count","dtype":"f32le"}
    // followed by raw little-endian float32 rows; ids in a parallel NDJSON
    // file of {"id": ...} lines.
    void save(const std::string & vectors_path, const std::string & ids_path) const;
    static EmbeddingIndex load(const std::string & vectors_path, const std::string & ids_path);

  private:
    std::vector<std::string> ids_;
    std::vector<float> data_;  // row-major, normalized
    size_t dim_ = 0;
};

// Most similar demonstration goes last, adjacent to the query.
std::vector<ScoredId> order_for_prompt(std::vector<ScoredId> demos);

}  // namespace ikit
