#include <doctest.h>

#include "core/common.hpp"
#include "core/shard.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

using namespace ikit;

namespace {

std::filesystem::path tmp_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "ikit_test_shard";
    std::filesystem::create_directories(dir);
    return dir;
}

Sample sample_of(std::string key, std::map<std::string, std::string> parts) {
    Sample s;
    s.key = std::move(key);
    for (auto & [ext, text] : parts) {
        s.parts[ext] = std::vector<uint8_t>(text.begin(), text.end());
    }
    return s;
}

std::vector<uint8_t> read_file(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                                std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("sample validation") {
    CHECK_NOTHROW(validate_sample(sample_of("k1", {{"json", "{}"}})));
    CHECK_THROWS_AS(validate_sample(sample_of("a/b", {{"json", "{}"}})), ValidationError);
    CHECK_THROWS_AS(validate_sample(sample_of("a.b", {{"json", "{}"}})), ValidationError);
    CHECK_THROWS_AS(validate_sample(sample_of("k", {{"JSON", "{}"}})), ValidationError);
    CHECK_THROWS_AS(validate_sample(sample_of("k", {})), ValidationError);
}

TEST_CASE("pack and unpack round trip bit-exact") {
    Rng rng(42);
    std::vector<Sample> samples;
    for (int i = 0; i < 25; ++i) {
        Sample s;
        s.key = "sample" + std::to_string(i);
        for (const std::string ext : {"tok", "json"}) {
            std::vector<uint8_t> bytes(rng.next_below(700) + 1);
            for (auto & b : bytes) {
                b = static_cast<uint8_t>(rng.next());
            }
            s.parts[ext] = bytes;
        }
        samples.push_back(std::move(s));
    }

    const auto prefix = (tmp_dir() / "round").string();
    const auto set = pack(samples, 10, prefix);
    REQUIRE(set.shard_paths.size() == 3);  // 10 + 10 + 5
    CHECK(set.sizes == std::vector<size_t>{10, 10, 5});
    CHECK(set.shard_paths[0] == prefix + "-000000.tar");
    CHECK(set.shard_paths[2] == prefix + "-000002.tar");

    std::vector<Sample> unpacked;
    for (const auto & path : set.shard_paths) {
        for (auto & s : unpack(path)) {
            unpacked.push_back(std::move(s));
        }
    }
    REQUIRE(unpacked.size() == samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        CHECK(unpacked[i].key == samples[i].key);
        CHECK(unpacked[i].parts == samples[i].parts);
    }
}

TEST_CASE("packing is byte-reproducible") {
    std::vector<Sample> samples = {sample_of("a", {{"t", "hello"}}),
                                   sample_of("b", {{"t", "world"}})};
    const auto p1 = (tmp_dir() / "repro1").string();
    const auto p2 = (tmp_dir() / "repro2").string();
    const auto s1 = pack(samples, 10, p1);
    const auto s2 = pack(samples, 10, p2);
    CHECK(read_file(s1.shard_paths[0]) == read_file(s2.shard_paths[0]));
}

TEST_CASE("entries inside a shard are key-grouped with sorted extensions") {
    std::vector<Sample> samples = {sample_of("k1", {{"z", "1"}, {"a", "2"}, {"m", "3"}}),
                                   sample_of("k2", {{"b", "4"}})};
    const auto prefix = (tmp_dir() / "order").string();
    const auto set = pack(samples, 10, prefix);

    // walk the raw tar headers
    const auto bytes = read_file(set.shard_paths[0]);
    std::vector<std::string> names;
    size_t off = 0;
    while (off + 512 <= bytes.size()) {
        if (bytes[off] == 0) {
            break;
        }
        names.emplace_back(reinterpret_cast<const char *>(&bytes[off]));
        size_t size = std::stoul(
            std::string(reinterpret_cast<const char *>(&bytes[off + 124]), 11), nullptr, 8);
        off += 512 + (size + 511) / 512 * 512;
    }
    CHECK(names == std::vector<std::string>{"k1.a", "k1.m", "k1.z", "k2.b"});
}

TEST_CASE("duplicate keys are rejected at pack time") {
    std::vector<Sample> samples = {sample_of("k", {{"t", "1"}}), sample_of("k", {{"t", "2"}})};
    CHECK_THROWS_AS(pack(samples, 10, (tmp_dir() / "dup").string()), ValidationError);
}

TEST_CASE("non-consecutive keys are rejected at unpack time") {
    std::vector<Sample> samples = {sample_of("aa", {{"t", "1"}}), sample_of("bb", {{"t", "2"}}),
                                   sample_of("cc", {{"t", "3"}})};
    const auto prefix = (tmp_dir() / "scatter").string();
    const auto set = pack(samples, 10, prefix);

    // rename the third entry back to the first key, fixing the checksum
    auto bytes = read_file(set.shard_paths[0]);
    const size_t third = 2 * 1024;  // each sample is header + one 512 data block
    std::memcpy(&bytes[third], "aa.t", 5);
    std::memset(&bytes[third + 148], ' ', 8);
    unsigned sum = 0;
    for (size_t i = 0; i < 512; ++i) {
        sum += bytes[third + i];
    }
    char field[8];
    std::snprintf(field, sizeof(field), "%06o", sum);
    std::memcpy(&bytes[third + 148], field, 6);
    bytes[third + 148 + 6] = '\0';
    bytes[third + 148 + 7] = ' ';

    const auto patched = (tmp_dir() / "scatter-patched.tar").string();
    std::ofstream(patched, std::ios::binary)
        .write(reinterpret_cast<const char *>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
    CHECK_THROWS_AS(unpack(patched), ValidationError);
}

TEST_CASE("unpacking an empty archive yields no samples") {
    const auto path = (tmp_dir() / "empty.tar").string();
    std::ofstream out(path, std::ios::binary);
    std::vector<char> zeros(1024, 0);
    out.write(zeros.data(), static_cast<std::streamsize>(zeros.size()));
    out.close();
    CHECK(unpack(path).empty());
}

TEST_CASE("shard sampling is deterministic and covers the set") {
    ShardSet set;
    for (int i = 0; i < 4; ++i) {
        set.shard_paths.push_back("shard-" + std::to_string(i));
        set.sizes.push_back(10);
    }
    const auto a = sample_shards(set, 1000, 9);
    const auto b = sample_shards(set, 1000, 9);
    CHECK(a == b);
    CHECK(a != sample_shards(set, 1000, 10));

    std::map<std::string, int> counts;
    for (const auto & path : a) {
        counts[path]++;
    }
    CHECK(counts.size() == 4);  // replacement sampling still hits everything
}

TEST_CASE("interleaving emits blocks of one a then ratio b") {
    std::vector<Sample> a = {sample_of("a0", {{"t", ""}}), sample_of("a1", {{"t", ""}})};
    std::vector<Sample> b = {sample_of("b0", {{"t", ""}}), sample_of("b1", {{"t", ""}}),
                             sample_of("b2", {{"t", ""}})};
    const auto out = interleave_streams(a, b, 2);
    std::vector<std::string> keys;
    for (const auto & s : out) {
        keys.push_back(s.key);
    }
    CHECK(keys == std::vector<std::string>{"a0", "b0", "b1", "a1", "b2"});
}

TEST_CASE("manifest json round trips") {
    ShardSet set;
    set.shard_paths = {"x-000000.tar", "x-000001.tar"};
    set.sizes = {100, 42};
    const auto back = manifest_from_json(manifest_to_json(set));
    CHECK(back.shard_paths == set.shard_paths);
    CHECK(back.sizes == set.sizes);
}
