#pragma once

#include "curation.hpp"
#include "tokenizer.hpp"

#include <nlohmann/json.hpp>

#include <vector>

namespace ikit {

// Token sequence with per-token media indices. media_index[t] is the 1-based
// index of the last image marker at or before position t, 0 if none.
struct TokenStream {
    std::vector<TokenId> tokens;
    std::vector<int> media_index;
    int n_images = 0;
};

struct LayerSchedule {
    int n_layers = 0;
    int interval = 0;
    std::vector<int> gated_layers;  // 0-based indices carrying cross-attention
};

// Converts a curated doc into a marked token stream: each image-anchored
// chunk becomes [IMAGE, chunk text, ENDOFCHUNK]; text before the first image
// is emitted verbatim with no markers.
TokenStream mark_sequence(const InterleavedDoc & doc, const Tokenizer & tokenizer);

// mask[t][i] = true iff token t attends to image i (i+1 == media_index[t]).
std::vector<std::vector<bool>> media_mask(const TokenStream & stream);

LayerSchedule layer_schedule(int n_layers, int interval);

// Concatenates the streams and splits at fixed window boundaries, recomputing
// window-local media indices. A final fragment shorter than 8 tokens is
// dropped.
std::vector<TokenStream> pack_window(const std::vector<TokenStream> & streams, size_t window,
                                     const Tokenizer & tokenizer);

// Recomputes media_index/n_images from the token ids alone.
void rebuild_media_index(TokenStream & stream, const Tokenizer & tokenizer);

void validate_stream(const TokenStream & stream);

nlohmann::json stream_to_json(const TokenStream & stream);
TokenStream stream_from_json(const nlohmann::json & j);

// Binary form used inside shards: little-endian 32-bit token ids.
std::vector<uint8_t> tokens_to_bytes(const std::vector<TokenId> & tokens);
std::vector<TokenId> tokens_from_bytes(const std::vector<uint8_t> & bytes);

}  // namespace ikit
