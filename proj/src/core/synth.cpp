#include "synth.hpp"

#include "common.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace ikit {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(const std::string & s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return "";
    }
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string kind_name(SlotKind kind) {
    return kind == SlotKind::Image ? "IMAGE" : "SENTENCE";
}

}  // namespace

SlotPattern parse_pattern(const std::string & pattern_text) {
    const std::string text = trim(pattern_text);
    if (text.empty() || text.front() != '(' || text.back() != ')') {
        throw ValidationError("parse_pattern: expected parenthesized pattern at offset 0");
    }
    const std::string body = text.substr(1, text.size() - 2);

    SlotPattern pattern;
    size_t pos = 0;
    while (pos <= body.size()) {
        size_t comma = body.find(',', pos);
        const size_t item_end = (comma == std::string::npos) ? body.size() : comma;
        std::string item = body.substr(pos, item_end - pos);
        const size_t item_offset = pattern_text.find(item, pos) == std::string::npos
                                       ? pos + 1
                                       : pattern_text.find(item, pos);

        const std::string trimmed = trim(item);
        if (trimmed.empty()) {
            throw ValidationError("parse_pattern: empty slot at offset " +
                                  std::to_string(item_offset));
        }
        std::istringstream in(trimmed);
        std::string word;
        std::string label;
        in >> word >> label;
        const std::string kind_word = lower(word);
        SlotKind kind;
        if (kind_word == "image") {
            kind = SlotKind::Image;
        } else if (kind_word == "sentence") {
            kind = SlotKind::Sentence;
        } else {
            throw ValidationError("parse_pattern: unknown slot kind \"" + word +
                                  "\" at offset " + std::to_string(item_offset));
        }
        std::string extra;
        if (label.empty() || (in >> extra)) {
            throw ValidationError("parse_pattern: malformed slot \"" + trimmed +
                                  "\" at offset " + std::to_string(item_offset));
        }
        for (const auto & prev : pattern.slots) {
            if (prev.kind == kind && lower(prev.label) == lower(label)) {
                throw ValidationError("parse_pattern: duplicate label " + kind_name(kind) + " " +
                                      label + " at offset " + std::to_string(item_offset));
            }
        }
        pattern.slots.push_back({kind, label});
        if (comma == std::string::npos) {
            break;
        }
        pos = comma + 1;
    }
    if (pattern.slots.empty()) {
        throw ValidationError("parse_pattern: empty pattern at offset 0");
    }
    return pattern;
}

std::string render_pattern(const SlotPattern & pattern) {
    std::string out = "(";
    for (size_t i = 0; i < pattern.slots.size(); ++i) {
        if (i > 0) {
            out += ", ";
        }
        out += (pattern.slots[i].kind == SlotKind::Image ? "image " : "sentence ") +
               pattern.slots[i].label;
    }
    out += ")";
    return out;
}

SynthSequence parse_response(const std::string & response_text, const SlotPattern & pattern) {
    SynthSequence seq;
    std::istringstream in(response_text);
    std::string line;
    while (std::getline(in, line)) {
        const std::string trimmed = trim(line);
        SlotKind kind;
        size_t prefix_len = 0;
        const std::string low = lower(trimmed);
        if (low.rfind("image ", 0) == 0) {
            kind = SlotKind::Image;
            prefix_len = 6;
        } else if (low.rfind("sentence ", 0) == 0) {
            kind = SlotKind::Sentence;
            prefix_len = 9;
        } else {
            continue;  // preamble or free text
        }
        const size_t colon = trimmed.find(':', prefix_len);
        if (colon == std::string::npos) {
            continue;
        }
        const std::string label = trim(trimmed.substr(prefix_len, colon - prefix_len));
        if (label.empty() || label.find(' ') != std::string::npos) {
            continue;
        }
        seq.slots.push_back({kind, label, trim(trimmed.substr(colon + 1))});
    }

    // Validate against the pattern: same kinds, labels, order.
    for (size_t i = 0; i < seq.slots.size(); ++i) {
        for (size_t j = i + 1; j < seq.slots.size(); ++j) {
            if (seq.slots[i].kind == seq.slots[j].kind &&
                lower(seq.slots[i].label) == lower(seq.slots[j].label)) {
                throw ValidationError("parse_response: duplicate slot " +
                                      kind_name(seq.slots[i].kind) + " " + seq.slots[i].label);
            }
        }
    }
    for (const auto & want : pattern.slots) {
        const bool found = std::any_of(seq.slots.begin(), seq.slots.end(),
                                       [&](const FilledSlot & got) {
                                           return got.kind == want.kind &&
                                                  lower(got.label) == lower(want.label);
                                       });
        if (!found) {
            throw ValidationError("parse_response: " + kind_name(want.kind) + " " + want.label +
                                  " absent");
        }
    }
    if (seq.slots.size() != pattern.slots.size()) {
        throw ValidationError("parse_response: extra slots beyond pattern");
    }
    for (size_t i = 0; i < pattern.slots.size(); ++i) {
        if (seq.slots[i].kind != pattern.slots[i].kind ||
            lower(seq.slots[i].label) != lower(pattern.slots[i].label)) {
            throw ValidationError("parse_response: slot " + kind_name(seq.slots[i].kind) + " " +
                                  seq.slots[i].label + " out of order");
        }
    }
    return seq;
}

IndexTextEmbedder::IndexTextEmbedder(EmbeddingIndex index) : index_(std::move(index)) {
    for (size_t i = 0; i < index_.size(); ++i) {
        rows_[index_.ids()[i]] = i;
    }
}

std::vector<float> IndexTextEmbedder::embed(const std::string & text) const {
    auto it = rows_.find(text);
    if (it == rows_.end()) {
        throw ValidationError("text embedder: no precomputed embedding for \"" + text + "\"");
    }
    return index_.row(it->second);
}

CosineReranker::CosineReranker(EmbeddingIndex images, EmbeddingIndex texts)
    : images_(std::move(images)), texts_(std::move(texts)) {
    for (size_t i = 0; i < images_.size(); ++i) {
        image_rows_[images_.ids()[i]] = i;
    }
    for (size_t i = 0; i < texts_.size(); ++i) {
        text_rows_[texts_.ids()[i]] = i;
    }
}

double CosineReranker::score(const std::string & image_id, const std::string & description) const {
    auto img = image_rows_.find(image_id);
    if (img == image_rows_.end()) {
        throw ValidationError("reranker: no embedding for image " + image_id);
    }
    auto txt = text_rows_.find(description);
    if (txt == text_rows_.end()) {
        throw ValidationError("reranker: no embedding for description \"" + description + "\"");
    }
    const auto a = images_.row(img->second);
    const auto b = texts_.row(txt->second);
    double dot = 0.0;  // rows are unit-norm
    for (size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return dot;
}

InterleavedDoc infill(const SynthSequence & seq, const EmbeddingIndex & index,
                      const TextEmbedder & embedder, const Reranker & rerank,
                      const InfillConfig & cfg) {
    if (cfg.k < 1) {
        throw ValidationError("infill: k must be >= 1");
    }

    // Sentence slot -> span index, in slot order.
    std::vector<int> sentence_span(seq.slots.size(), -1);
    InterleavedDoc doc;
    doc.doc_id = seq.id;
    for (size_t i = 0; i < seq.slots.size(); ++i) {
        if (seq.slots[i].kind == SlotKind::Sentence) {
            sentence_span[i] = static_cast<int>(doc.spans.size());
            doc.spans.push_back(seq.slots[i].text);
        }
    }
    if (doc.spans.empty()) {
        throw ValidationError("infill: sequence " + seq.id + " has no sentence slots");
    }

    for (size_t i = 0; i < seq.slots.size(); ++i) {
        const auto & slot = seq.slots[i];
        if (slot.kind != SlotKind::Image) {
            continue;
        }
        if (slot.text.empty()) {
            throw ValidationError("infill: IMAGE " + slot.label + " has empty description");
        }
        const auto candidates = index.topk(embedder.embed(slot.text), cfg.k);
        if (candidates.empty()) {
            throw ValidationError("infill: no candidates for IMAGE " + slot.label);
        }
        std::string best_id;
        double best_sim = 0.0;
        bool have = false;
        for (const auto & cand : candidates) {
            const double sim = rerank.score(cand.id, slot.text);
            if (!have || sim > best_sim || (sim == best_sim && cand.id < best_id)) {
                best_id = cand.id;
                best_sim = sim;
                have = true;
            }
        }

        // Anchor at the following sentence, else the preceding one.
        int anchor = -1;
        for (size_t j = i + 1; j < seq.slots.size(); ++j) {
            if (sentence_span[j] >= 0) {
                anchor = sentence_span[j];
                break;
            }
        }
        if (anchor < 0) {
            for (size_t j = i; j-- > 0;) {
                if (sentence_span[j] >= 0) {
                    anchor = sentence_span[j];
                    break;
                }
            }
        }
        doc.images.push_back({best_id, anchor, std::clamp(best_sim, -1.0, 1.0)});
    }
    return doc;
}

}  // namespace ikit
