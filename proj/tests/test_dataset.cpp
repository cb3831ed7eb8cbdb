#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "flownas/dataset.hpp"

using namespace flownas;

namespace {

Dataset sample_dataset(uint16_t n_classes, uint32_t len, size_t n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    Dataset ds;
    ds.n_classes = n_classes;
    ds.input_len = len;
    for (size_t i = 0; i < n; ++i) {
        SessionVector sv;
        sv.label = uint16_t(i % n_classes);
        sv.bytes.resize(len);
        for (auto& b : sv.bytes) b = uint8_t(rng());
        ds.samples.push_back(std::move(sv));
    }
    return ds;
}

} // namespace

TEST_CASE("dataset round trip is byte identical") {
    auto ds = sample_dataset(4, 64, 3, 1);
    std::ostringstream os(std::ios::binary);
    write_dataset(ds, os);
    std::string first = os.str();

    std::istringstream is(first, std::ios::binary);
    auto loaded = read_dataset(is);
    CHECK(loaded.n_classes == ds.n_classes);
    CHECK(loaded.input_len == ds.input_len);
    REQUIRE(loaded.samples.size() == ds.samples.size());
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        CHECK(loaded.samples[i].label == ds.samples[i].label);
        CHECK(loaded.samples[i].bytes == ds.samples[i].bytes);
    }

    std::ostringstream os2(std::ios::binary);
    write_dataset(loaded, os2);
    CHECK(os2.str() == first);
}

TEST_CASE("file size follows the format arithmetic") {
    uint32_t L = 96;
    auto ds = sample_dataset(11, L, 10000, 2);
    std::ostringstream os(std::ios::binary);
    write_dataset(ds, os);
    CHECK(os.str().size() == 20 + 10000 * (2 + size_t(L)));
}

TEST_CASE("label equal to n_classes is rejected") {
    auto ds = sample_dataset(11, 16, 2, 3);
    ds.samples[1].label = 11;
    std::ostringstream os(std::ios::binary);
    CHECK_THROWS_AS(write_dataset(ds, os), LabelOutOfRange);

    // forge the same corruption on disk
    auto good = sample_dataset(11, 16, 2, 3);
    std::ostringstream os2(std::ios::binary);
    write_dataset(good, os2);
    std::string bytes = os2.str();
    bytes[20] = 11; // first sample label low byte
    std::istringstream is(bytes, std::ios::binary);
    CHECK_THROWS_AS(read_dataset(is), LabelOutOfRange);
}

TEST_CASE("wrong magic and truncation are reported") {
    std::istringstream is("XXXXxxxxxxxxxxxxxxxxxxxx", std::ios::binary);
    CHECK_THROWS_AS(read_dataset(is), BadMagic);

    auto ds = sample_dataset(3, 32, 5, 4);
    std::ostringstream os(std::ios::binary);
    write_dataset(ds, os);
    std::string bytes = os.str();
    std::istringstream trunc(bytes.substr(0, bytes.size() - 10), std::ios::binary);
    CHECK_THROWS_AS(read_dataset(trunc), LengthMismatch);
}

TEST_CASE("length mismatch on write is rejected") {
    auto ds = sample_dataset(3, 32, 2, 5);
    ds.samples[0].bytes.resize(31);
    std::ostringstream os(std::ios::binary);
    CHECK_THROWS_AS(write_dataset(ds, os), LengthMismatch);
}
