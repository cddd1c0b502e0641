#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace ikit {

using TokenId = int32_t;

// Abstract tokenizer. Two ids are reserved for the image marker and the
// end-of-chunk marker; encode() on ordinary text never produces them.
class Tokenizer {
  public:
    virtual ~Tokenizer() = default;

    virtual std::vector<TokenId> encode(const std::string & text) const = 0;
    virtual std::string decode(const std::vector<TokenId> & ids) const = 0;

    virtual TokenId image_token() const = 0;
    virtual TokenId endofchunk_token() const = 0;

    // Surface forms used in prompts and stop sequences.
    static constexpr const char * kImageMarker = "<image>";
    static constexpr const char * kEndOfChunkMarker = "<|endofchunk|>";
};

// Whitespace tokenizer with an open vocabulary: words are assigned ids on
// first sight, starting after the two reserved ids. decode(encode(t)) == t
// for whitespace-normalized text. Vocabulary state is mutable behind a
// const interface so the tokenizer can be shared as a Tokenizer.
class WhitespaceTokenizer final : public Tokenizer {
  public:
    WhitespaceTokenizer() = default;

    std::vector<TokenId> encode(const std::string & text) const override;
    std::string decode(const std::vector<TokenId> & ids) const override;

    TokenId image_token() const override { return 0; }
    TokenId endofchunk_token() const override { return 1; }

    size_t vocab_size() const { return words_.size(); }

  private:
    mutable std::unordered_map<std::string, TokenId> ids_;
    mutable std::vector<std::string> words_;
};

std::shared_ptr<Tokenizer> make_whitespace_tokenizer();

}  // namespace ikit
