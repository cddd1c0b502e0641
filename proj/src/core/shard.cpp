#include "shard.hpp"

#include "common.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <unordered_set>

namespace ikit {

namespace {

constexpr size_t kBlock = 512;

struct TarHeader {
    std::array<char, kBlock> raw{};

    char * name() { return raw.data(); }
    char * mode() { return raw.data() + 100; }
    char * uid() { return raw.data() + 108; }
    char * gid() { return raw.data() + 116; }
    char * size() { return raw.data() + 124; }
    char * mtime() { return raw.data() + 136; }
    char * chksum() { return raw.data() + 148; }
    char * typeflag() { return raw.data() + 156; }
    char * magic() { return raw.data() + 257; }
    char * version() { return raw.data() + 263; }
};

void write_octal(char * field, size_t width, uint64_t value) {
    std::snprintf(field, width, "%0*llo", static_cast<int>(width - 1),
                  static_cast<unsigned long long>(value));
}

TarHeader make_header(const std::string & name, size_t size) {
    if (name.size() > 99) {
        throw ValidationError("tar: entry name too long: " + name);
    }
    TarHeader h;
    std::memcpy(h.name(), name.data(), name.size());
    write_octal(h.mode(), 8, 0644);
    write_octal(h.uid(), 8, 0);
    write_octal(h.gid(), 8, 0);
    write_octal(h.size(), 12, size);
    write_octal(h.mtime(), 12, 0);  // fixed mtime keeps shards byte-reproducible
    *h.typeflag() = '0';
    std::memcpy(h.magic(), "ustar", 6);
    std::memcpy(h.version(), "00", 2);
    std::memset(h.chksum(), ' ', 8);
    uint64_t sum = 0;
    for (unsigned char c : h.raw) {
        sum += c;
    }
    std::snprintf(h.chksum(), 8, "%06llo", static_cast<unsigned long long>(sum));
    h.chksum()[7] = ' ';
    return h;
}

uint64_t parse_octal(const char * field, size_t width) {
    uint64_t value = 0;
    for (size_t i = 0; i < width && field[i]; ++i) {
        const char c = field[i];
        if (c == ' ') {
            continue;
        }
        if (c < '0' || c > '7') {
            throw ValidationError("tar: bad octal field");
        }
        value = value * 8 + static_cast<uint64_t>(c - '0');
    }
    return value;
}

void write_padded(std::ofstream & out, const std::vector<uint8_t> & bytes) {
    out.write(reinterpret_cast<const char *>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    const size_t pad = (kBlock - bytes.size() % kBlock) % kBlock;
    static const std::array<char, kBlock> zeros{};
    out.write(zeros.data(), static_cast<std::streamsize>(pad));
}

std::string shard_name(const std::string & prefix, size_t index) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%06zu", index);
    return prefix + "-" + buf + ".tar";
}

}  // namespace

void validate_sample(const Sample & sample) {
    if (sample.key.empty()) {
        throw ValidationError("sample: empty key");
    }
    if (sample.key.find('/') != std::string::npos || sample.key.find('.') != std::string::npos) {
        throw ValidationError("sample " + sample.key + ": key contains '/' or '.'");
    }
    if (sample.parts.empty()) {
        throw ValidationError("sample " + sample.key + ": no parts");
    }
    for (const auto & [ext, bytes] : sample.parts) {
        (void)bytes;
        if (ext.empty() ||
            std::any_of(ext.begin(), ext.end(), [](unsigned char c) { return std::isupper(c); })) {
            throw ValidationError("sample " + sample.key + ": bad extension \"" + ext + "\"");
        }
    }
}

ShardSet pack(const std::vector<Sample> & samples, size_t max_per_shard,
              const std::string & out_prefix) {
    if (max_per_shard < 1) {
        throw ValidationError("pack: max_per_shard must be >= 1");
    }
    ShardSet set;
    size_t shard_index = 0;
    size_t i = 0;
    while (i < samples.size()) {
        const std::string path = shard_name(out_prefix, shard_index++);
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw RuntimeFailure("pack: cannot write " + path);
        }
        std::unordered_set<std::string> keys;
        size_t in_shard = 0;
        for (; i < samples.size() && in_shard < max_per_shard; ++i, ++in_shard) {
            const Sample & sample = samples[i];
            validate_sample(sample);
            if (!keys.insert(sample.key).second) {
                throw ValidationError("pack: duplicate key " + sample.key + " in shard " + path);
            }
            // std::map iterates extensions in lexicographic order already.
            for (const auto & [ext, bytes] : sample.parts) {
                const auto header = make_header(sample.key + "." + ext, bytes.size());
                out.write(header.raw.data(), kBlock);
                write_padded(out, bytes);
            }
        }
        static const std::array<char, 2 * kBlock> trailer{};
        out.write(trailer.data(), trailer.size());
        set.shard_paths.push_back(path);
        set.sizes.push_back(in_shard);
    }
    return set;
}

std::vector<Sample> unpack(const std::string & shard_path) {
    std::ifstream in(shard_path, std::ios::binary);
    if (!in) {
        throw RuntimeFailure("unpack: cannot read " + shard_path);
    }
    std::vector<Sample> samples;
    std::unordered_set<std::string> finished_keys;
    TarHeader h;
    while (in.read(h.raw.data(), kBlock)) {
        const bool all_zero =
            std::all_of(h.raw.begin(), h.raw.end(), [](char c) { return c == 0; });
        if (all_zero) {
            break;  // end-of-archive marker
        }
        if (std::strncmp(h.magic(), "ustar", 5) != 0) {
            throw ValidationError("unpack: not a ustar archive: " + shard_path);
        }
        const std::string entry(h.name(), strnlen(h.name(), 100));
        const uint64_t size = parse_octal(h.size(), 12);
        const size_t dot = entry.rfind('.');
        if (dot == std::string::npos || dot == 0) {
            throw ValidationError("unpack: entry without extension: " + entry);
        }
        const std::string key = entry.substr(0, dot);
        const std::string ext = entry.substr(dot + 1);

        std::vector<uint8_t> bytes(size);
        in.read(reinterpret_cast<char *>(bytes.data()), static_cast<std::streamsize>(size));
        if (static_cast<uint64_t>(in.gcount()) != size) {
            throw ValidationError("unpack: truncated entry " + entry);
        }
        in.ignore(static_cast<std::streamsize>((kBlock - size % kBlock) % kBlock));

        if (!samples.empty() && samples.back().key == key) {
            if (samples.back().parts.count(ext)) {
                throw ValidationError("unpack: duplicate part " + entry);
            }
            samples.back().parts[ext] = std::move(bytes);
        } else {
            if (finished_keys.count(key)) {
                throw ValidationError("unpack: non-consecutive key at entry " + entry);
            }
            if (!samples.empty()) {
                finished_keys.insert(samples.back().key);
            }
            Sample s;
            s.key = key;
            s.parts[ext] = std::move(bytes);
            samples.push_back(std::move(s));
        }
    }
    return samples;
}

std::vector<std::string> sample_shards(const ShardSet & set, size_t n_draws, uint64_t rng_seed) {
    if (set.shard_paths.empty()) {
        throw ValidationError("sample_shards: empty shard set");
    }
    Rng rng(rng_seed);
    std::vector<std::string> draws;
    draws.reserve(n_draws);
    for (size_t i = 0; i < n_draws; ++i) {
        draws.push_back(set.shard_paths[rng.next_below(set.shard_paths.size())]);
    }
    return draws;
}

std::vector<Sample> interleave_streams(const std::vector<Sample> & a,
                                       const std::vector<Sample> & b, size_t ratio_b_to_a) {
    if (ratio_b_to_a < 1) {
        throw ValidationError("interleave_streams: ratio must be >= 1");
    }
    std::vector<Sample> out;
    size_t ia = 0;
    size_t ib = 0;
    while (true) {
        if (ia >= a.size()) {
            break;
        }
        out.push_back(a[ia++]);
        for (size_t r = 0; r < ratio_b_to_a; ++r) {
            if (ib >= b.size()) {
                return out;
            }
            out.push_back(b[ib++]);
        }
    }
    return out;
}

nlohmann::json manifest_to_json(const ShardSet & set) {
    nlohmann::json shards = nlohmann::json::array();
    for (size_t i = 0; i < set.shard_paths.size(); ++i) {
        shards.push_back({{"path", set.shard_paths[i]}, {"size", set.sizes[i]}});
    }
    return {{"shards", shards}};
}

ShardSet manifest_from_json(const nlohmann::json & j) {
    ShardSet set;
    try {
        for (const auto & shard : j.at("shards")) {
            set.shard_paths.push_back(shard.at("path").get<std::string>());
            set.sizes.push_back(shard.at("size").get<size_t>());
        }
    } catch (const nlohmann::json::exception & e) {
        throw ValidationError(std::string("bad shard manifest: ") + e.what());
    }
    return set;
}

}  // namespace ikit
