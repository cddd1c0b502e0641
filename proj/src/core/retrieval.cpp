#include "retrieval.hpp"

#include "common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

namespace ikit {

namespace {

double norm2(const std::vector<float> & v) {
    double s = 0.0;
    for (float x : v) {
        s += static_cast<double>(x) * static_cast<double>(x);
    }
    return std::sqrt(s);
}

}  // namespace

EmbeddingIndex EmbeddingIndex::build(const std::vector<Record> & records) {
    if (records.empty()) {
        throw ValidationError("build_index: no records");
    }
    EmbeddingIndex index;
    index.dim_ = records.front().vector.size();
    std::unordered_set<std::string> seen;
    for (const auto & rec : records) {
        if (rec.vector.size() != index.dim_) {
            throw ValidationError("build_index: dimension mismatch for id " + rec.id);
        }
        for (float x : rec.vector) {
            if (!std::isfinite(x)) {
                throw ValidationError("build_index: non-finite component in id " + rec.id);
            }
        }
        const double n = norm2(rec.vector);
        if (n == 0.0) {
            throw ValidationError("build_index: zero vector for id " + rec.id);
        }
        if (!seen.insert(rec.id).second) {
            throw ValidationError("build_index: duplicate id " + rec.id);
        }
        index.ids_.push_back(rec.id);
        for (float x : rec.vector) {
            index.data_.push_back(static_cast<float>(x / n));
        }
    }
    return index;
}

std::vector<ScoredId> EmbeddingIndex::topk(const std::vector<float> & query, size_t k) const {
    if (k == 0) {
        throw ValidationError("topk: k must be >= 1");
    }
    if (query.size() != dim_) {
        throw ValidationError("topk: query dimension mismatch");
    }
    double qnorm = 0.0;
    for (float x : query) {
        if (!std::isfinite(x)) {
            throw ValidationError("topk: non-finite query component");
        }
        qnorm += static_cast<double>(x) * static_cast<double>(x);
    }
    qnorm = std::sqrt(qnorm);
    if (qnorm == 0.0) {
        throw ValidationError("topk: zero query vector");
    }

    // Rank by the raw dot product against unit rows: monotone in cosine and
    // exactly invariant to positive scaling of the query.
    const size_t n = ids_.size();
    std::vector<std::pair<double, size_t>> dots(n);
    for (size_t i = 0; i < n; ++i) {
        double d = 0.0;
        const float * row = data_.data() + i * dim_;
        for (size_t j = 0; j < dim_; ++j) {
            d += static_cast<double>(row[j]) * static_cast<double>(query[j]);
        }
        dots[i] = {d, i};
    }
    auto better = [this](const std::pair<double, size_t> & a, const std::pair<double, size_t> & b) {
        if (a.first != b.first) {
            return a.first > b.first;
        }
        return ids_[a.second] < ids_[b.second];
    };
    const size_t kk = std::min(k, n);
    std::partial_sort(dots.begin(), dots.begin() + kk, dots.end(), better);

    std::vector<ScoredId> out;
    out.reserve(kk);
    for (size_t i = 0; i < kk; ++i) {
        out.push_back({ids_[dots[i].second], dots[i].first / qnorm});
    }
    return out;
}

std::vector<float> EmbeddingIndex::row(size_t i) const {
    return std::vector<float>(data_.begin() + i * dim_, data_.begin() + (i + 1) * dim_);
}

void EmbeddingIndex::save(const std::string & vectors_path, const std::string & ids_path) const {
    std::ofstream vf(vectors_path, std::ios::binary);
    if (!vf) {
        throw RuntimeFailure("cannot write " + vectors_path);
    }
    const nlohmann::json header = {{"dim", dim_}, {"count", ids_.size()}, {"dtype", "f32le"}};
    vf << header.dump() << "\n";
    // Host is little-endian on all supported targets.
    vf.write(reinterpret_cast<const char *>(data_.data()),
             static_cast<std::streamsize>(data_.size() * sizeof(float)));

    std::ofstream idf(ids_path);
    if (!idf) {
        throw RuntimeFailure("cannot write " + ids_path);
    }
    for (const auto & id : ids_) {
        idf << nlohmann::json({{"id", id}}).dump() << "\n";
    }
}

EmbeddingIndex EmbeddingIndex::load(const std::string & vectors_path, const std::string & ids_path) {
    std::ifstream vf(vectors_path, std::ios::binary);
    if (!vf) {
        throw RuntimeFailure("cannot read " + vectors_path);
    }
    std::string header_line;
    if (!std::getline(vf, header_line)) {
        throw ValidationError("embedding file: missing header line");
    }
    size_t dim = 0;
    size_t count = 0;
    try {
        const auto header = nlohmann::json::parse(header_line);
        dim = header.at("dim").get<size_t>();
        count = header.at("count").get<size_t>();
        if (header.at("dtype").get<std::string>() != "f32le") {
            throw ValidationError("embedding file: unsupported dtype");
        }
    } catch (const nlohmann::json::exception & e) {
        throw ValidationError(std::string("embedding file: bad header: ") + e.what());
    }

    std::vector<float> data(dim * count);
    vf.read(reinterpret_cast<char *>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (static_cast<size_t>(vf.gcount()) != data.size() * sizeof(float)) {
        throw ValidationError("embedding file: truncated payload");
    }

    std::ifstream idf(ids_path);
    if (!idf) {
        throw RuntimeFailure("cannot read " + ids_path);
    }
    std::vector<Record> records;
    records.reserve(count);
    std::string line;
    size_t row = 0;
    while (std::getline(idf, line)) {
        if (line.empty()) {
            continue;
        }
        if (row >= count) {
            throw ValidationError("embedding ids: more ids than rows");
        }
        std::string id;
        try {
            id = nlohmann::json::parse(line).at("id").get<std::string>();
        } catch (const nlohmann::json::exception & e) {
            throw ValidationError(std::string("embedding ids: bad record: ") + e.what());
        }
        records.push_back({std::move(id),
                           std::vector<float>(data.begin() + row * dim,
                                              data.begin() + (row + 1) * dim)});
        row++;
    }
    if (row != count) {
        throw ValidationError("embedding ids: fewer ids than rows");
    }
    return build(records);
}

std::vector<ScoredId> order_for_prompt(std::vector<ScoredId> demos) {
    std::stable_sort(demos.begin(), demos.end(),
                     [](const ScoredId & a, const ScoredId & b) { return a.sim < b.sim; });
    return demos;
}

}  // namespace ikit
