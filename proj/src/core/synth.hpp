#pragma once

#include "curation.hpp"
#include "retrieval.hpp"

#include <map>
#include <string>
#include <vector>

namespace ikit {

enum class SlotKind { Image, Sentence };

struct Slot {
    SlotKind kind = SlotKind::Image;
    std::string label;  // "A" for images, "1" for sentences
};

struct SlotPattern {
    std::vector<Slot> slots;
};

struct FilledSlot {
    SlotKind kind = SlotKind::Image;
    std::string label;
    std::string text;  // image description or sentence text
};

struct SynthSequence {
    std::string id;
    std::vector<FilledSlot> slots;
};

// Parses "(image A, sentence 1, ...)", case-insensitive. Errors carry the
// byte offset of the offending token.
SlotPattern parse_pattern(const std::string & pattern_text);

std::string render_pattern(const SlotPattern & pattern);

// Extracts "Image <L>: ..." / "Sentence <N>: ..." lines and validates them
// against the pattern. A free-text preamble before the first slot line is
// ignored.
SynthSequence parse_response(const std::string & response_text, const SlotPattern & pattern);

// Maps an image description to a query vector in the retrieval-index space.
class TextEmbedder {
  public:
    virtual ~TextEmbedder() = default;
    virtual std::vector<float> embed(const std::string & text) const = 0;
};

// Second-stage scorer comparing a candidate image against the description in
// the re-ranking embedding space.
class Reranker {
  public:
    virtual ~Reranker() = default;
    virtual double score(const std::string & image_id, const std::string & description) const = 0;
};

// Looks a text up verbatim in a precomputed embedding index.
class IndexTextEmbedder final : public TextEmbedder {
  public:
    explicit IndexTextEmbedder(EmbeddingIndex index);
    std::vector<float> embed(const std::string & text) const override;

  private:
    EmbeddingIndex index_;
    std::map<std::string, size_t> rows_;
};

// Cosine of precomputed image and text embeddings in the re-rank space.
class CosineReranker final : public Reranker {
  public:
    CosineReranker(EmbeddingIndex images, EmbeddingIndex texts);
    double score(const std::string & image_id, const std::string & description) const override;

  private:
    EmbeddingIndex images_;
    EmbeddingIndex texts_;
    std::map<std::string, size_t> image_rows_;
    std::map<std::string, size_t> text_rows_;
};

struct InfillConfig {
    size_t k = 10;  // candidates fetched per image slot before re-ranking
    // Opaque retrieval-service knobs, carried through untouched.
    std::map<std::string, std::string> query_params;
};

// Resolves every image slot via top-k retrieval plus re-ranking and emits an
// interleaved doc: sentence texts in order, each winning image anchored to
// the following sentence (or the preceding one when none follows).
InterleavedDoc infill(const SynthSequence & seq, const EmbeddingIndex & index,
                      const TextEmbedder & embedder, const Reranker & rerank,
                      const InfillConfig & cfg);

}  // namespace ikit
