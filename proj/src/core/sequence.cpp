#include "sequence.hpp"

#include "common.hpp"

#include <algorithm>

namespace ikit {

TokenStream mark_sequence(const InterleavedDoc & doc, const Tokenizer & tokenizer) {
    validate_doc(doc);
    if (doc.images.empty()) {
        throw ValidationError("mark_sequence: doc " + doc.doc_id + " has zero images");
    }

    // Document order: images sorted by anchor span, stable for equal anchors.
    std::vector<ImageRecord> images = doc.images;
    std::stable_sort(images.begin(), images.end(),
                     [](const ImageRecord & a, const ImageRecord & b) {
                         return a.anchor_span < b.anchor_span;
                     });

    TokenStream out;
    auto append_text = [&](size_t begin, size_t end) {
        for (size_t s = begin; s < end && s < doc.spans.size(); ++s) {
            for (TokenId id : tokenizer.encode(doc.spans[s])) {
                out.tokens.push_back(id);
            }
        }
    };

    // Spans preceding the first image carry no markers.
    append_text(0, static_cast<size_t>(images.front().anchor_span));

    for (size_t i = 0; i < images.size(); ++i) {
        const size_t chunk_begin = static_cast<size_t>(images[i].anchor_span);
        const size_t chunk_end = (i + 1 < images.size())
                                     ? static_cast<size_t>(images[i + 1].anchor_span)
                                     : doc.spans.size();
        out.tokens.push_back(tokenizer.image_token());
        append_text(chunk_begin, chunk_end);
        out.tokens.push_back(tokenizer.endofchunk_token());
    }

    rebuild_media_index(out, tokenizer);
    return out;
}

void rebuild_media_index(TokenStream & stream, const Tokenizer & tokenizer) {
    stream.media_index.assign(stream.tokens.size(), 0);
    int current = 0;
    for (size_t t = 0; t < stream.tokens.size(); ++t) {
        if (stream.tokens[t] == tokenizer.image_token()) {
            current++;
        }
        stream.media_index[t] = current;
    }
    stream.n_images = current;
}

void validate_stream(const TokenStream & stream) {
    if (stream.media_index.size() != stream.tokens.size()) {
        throw ValidationError("token stream: media_index length mismatch");
    }
    int prev = 0;
    for (int m : stream.media_index) {
        if (m < prev) {
            throw ValidationError("token stream: media_index decreases");
        }
        prev = m;
    }
    if (prev != stream.n_images) {
        throw ValidationError("token stream: n_images inconsistent with media_index");
    }
}

std::vector<std::vector<bool>> media_mask(const TokenStream & stream) {
    validate_stream(stream);
    std::vector<std::vector<bool>> mask(stream.tokens.size(),
                                        std::vector<bool>(stream.n_images, false));
    for (size_t t = 0; t < stream.tokens.size(); ++t) {
        const int m = stream.media_index[t];
        if (m > 0) {
            mask[t][m - 1] = true;
        }
    }
    return mask;
}

LayerSchedule layer_schedule(int n_layers, int interval) {
    if (interval < 1 || interval > n_layers) {
        throw ValidationError("layer_schedule: interval must be in [1, n_layers]");
    }
    LayerSchedule sched;
    sched.n_layers = n_layers;
    sched.interval = interval;
    for (int i = 0; i < n_layers; i += interval) {
        sched.gated_layers.push_back(i);
    }
    return sched;
}

std::vector<TokenStream> pack_window(const std::vector<TokenStream> & streams, size_t window,
                                     const Tokenizer & tokenizer) {
    if (window < 8) {
        throw ValidationError("pack_window: window must be >= 8");
    }
    std::vector<TokenId> all;
    for (const auto & s : streams) {
        all.insert(all.end(), s.tokens.begin(), s.tokens.end());
    }
    std::vector<TokenStream> out;
    for (size_t begin = 0; begin < all.size(); begin += window) {
        const size_t end = std::min(begin + window, all.size());
        if (end - begin < 8) {
            break;  // final partial fragment discarded
        }
        TokenStream w;
        w.tokens.assign(all.begin() + begin, all.begin() + end);
        rebuild_media_index(w, tokenizer);
        out.push_back(std::move(w));
    }
    return out;
}

nlohmann::json stream_to_json(const TokenStream & stream) {
    return {{"tokens", stream.tokens}, {"media_index", stream.media_index}};
}

TokenStream stream_from_json(const nlohmann::json & j) {
    TokenStream s;
    try {
        s.tokens = j.at("tokens").get<std::vector<TokenId>>();
        s.media_index = j.at("media_index").get<std::vector<int>>();
    } catch (const nlohmann::json::exception & e) {
        throw ValidationError(std::string("bad token stream record: ") + e.what());
    }
    s.n_images = s.media_index.empty() ? 0 : s.media_index.back();
    validate_stream(s);
    return s;
}

std::vector<uint8_t> tokens_to_bytes(const std::vector<TokenId> & tokens) {
    std::vector<uint8_t> bytes;
    bytes.reserve(tokens.size() * 4);
    for (TokenId id : tokens) {
        const uint32_t u = static_cast<uint32_t>(id);
        bytes.push_back(u & 0xff);
        bytes.push_back((u >> 8) & 0xff);
        bytes.push_back((u >> 16) & 0xff);
        bytes.push_back((u >> 24) & 0xff);
    }
    return bytes;
}

std::vector<TokenId> tokens_from_bytes(const std::vector<uint8_t> & bytes) {
    if (bytes.size() % 4 != 0) {
        throw ValidationError("token bytes: length not a multiple of 4");
    }
    std::vector<TokenId> tokens(bytes.size() / 4);
    for (size_t i = 0; i < tokens.size(); ++i) {
        const uint32_t u = static_cast<uint32_t>(bytes[i * 4]) |
                           (static_cast<uint32_t>(bytes[i * 4 + 1]) << 8) |
                           (static_cast<uint32_t>(bytes[i * 4 + 2]) << 16) |
                           (static_cast<uint32_t>(bytes[i * 4 + 3]) << 24);
        tokens[i] = static_cast<TokenId>(u);
    }
    return tokens;
}

}  // namespace ikit
