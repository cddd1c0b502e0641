#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ikit {

// One training sample: a key plus one file part per extension. Inside a tar
// shard the parts become consecutive entries "{key}.{ext}" with extensions in
// lexicographic order.
struct Sample {
    std::string key;
    std::map<std::string, std::vector<uint8_t>> parts;  // extension -> bytes
};

struct ShardSet {
    std::vector<std::string> shard_paths;
    std::vector<size_t> sizes;  // samples per shard
};

void validate_sample(const Sample & sample);

// Writes POSIX ustar shards named {prefix}-{000000..}.tar, at most
// max_per_shard samples each, samples in input order.
ShardSet pack(const std::vector<Sample> & samples, size_t max_per_shard,
              const std::string & out_prefix);

std::vector<Sample> unpack(const std::string & shard_path);

// n_draws i.i.d. uniform draws with replacement, deterministic given seed.
std::vector<std::string> sample_shards(const ShardSet & set, size_t n_draws, uint64_t rng_seed);

// Repeating blocks of one sample from `a` then `ratio_b_to_a` samples from
// `b`; stops as soon as the next required sample is unavailable.
std::vector<Sample> interleave_streams(const std::vector<Sample> & a,
                                       const std::vector<Sample> & b, size_t ratio_b_to_a);

nlohmann::json manifest_to_json(const ShardSet & set);
ShardSet manifest_from_json(const nlohmann::json & j);

}  // namespace ikit
