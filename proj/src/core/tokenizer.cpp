#include "tokenizer.hpp"

#include "common.hpp"

#include <sstream>

namespace ikit {

std::vector<TokenId> WhitespaceTokenizer::encode(const std::string & text) const {
    std::vector<TokenId> out;
    std::istringstream in(text);
    std::string word;
    while (in >> word) {
        auto it = ids_.find(word);
        if (it == ids_.end()) {
            const TokenId id = static_cast<TokenId>(words_.size()) + 2;  // after reserved ids
            it = ids_.emplace(word, id).first;
            words_.push_back(word);
        }
        out.push_back(it->second);
    }
    return out;
}

std::string WhitespaceTokenizer::decode(const std::vector<TokenId> & ids) const {
    std::string out;
    for (TokenId id : ids) {
        std::string word;
        if (id == image_token()) {
            word = kImageMarker;
        } else if (id == endofchunk_token()) {
            word = kEndOfChunkMarker;
        } else {
            const size_t slot = static_cast<size_t>(id) - 2;
            if (id < 2 || slot >= words_.size()) {
                throw ValidationError("decode: unknown token id " + std::to_string(id));
            }
            word = words_[slot];
        }
        if (!out.empty()) {
            out += ' ';
        }
        out += word;
    }
    return out;
}

std::shared_ptr<Tokenizer> make_whitespace_tokenizer() {
    return std::make_shared<WhitespaceTokenizer>();
}

}  // namespace ikit
