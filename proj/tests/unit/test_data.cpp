#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "noilin/data.hpp"
#include "noilin/errors.hpp"

using namespace noilin;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
    auto dir = fs::temp_directory_path() / "noilin_data_tests";
    fs::create_directories(dir);
    return dir / name;
}

void put_u32(std::string& s, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) s.push_back(static_cast<char>((v >> shift) & 0xff));
}

// Hand-assembled IDX pair: n images of rows x cols pixels.
void write_idx(const fs::path& images, const fs::path& labels, std::uint32_t n, std::uint32_t rows,
               std::uint32_t cols, std::uint32_t image_magic = 0x803, std::uint32_t label_count = 0,
               std::size_t drop_pixels = 0) {
    std::string img, lab;
    put_u32(img, image_magic);
    put_u32(img, n);
    put_u32(img, rows);
    put_u32(img, cols);
    for (std::uint32_t k = 0; k < n * rows * cols - drop_pixels; ++k) img.push_back(static_cast<char>(k % 256));
    put_u32(lab, 0x801);
    std::uint32_t nl = label_count ? label_count : n;
    put_u32(lab, nl);
    for (std::uint32_t k = 0; k < nl; ++k) lab.push_back(static_cast<char>(k % 3));
    std::ofstream(images, std::ios::binary) << img;
    std::ofstream(labels, std::ios::binary) << lab;
}

}  // namespace

TEST_CASE("ternary generator is deterministic and balanced") {
    auto a = make_ternary_gaussian(50, default_ternary_centers(), 0.2, 7);
    auto b = make_ternary_gaussian(50, default_ternary_centers(), 0.2, 7);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    CHECK(a.size() == 150);
    CHECK(a.dim() == 2);
    CHECK(a.class_count == 3);
    for (int c = 0; c < 3; ++c) CHECK(std::count(a.labels.begin(), a.labels.end(), c) == 50);
    CHECK_FALSE(a.bounds.has_value());
    auto other = make_ternary_gaussian(50, default_ternary_centers(), 0.2, 8);
    CHECK_FALSE(other.features == a.features);
}

TEST_CASE("ternary generator with zero spread sits on the centers") {
    auto centers = default_ternary_centers();
    auto ds = make_ternary_gaussian(4, centers, 0.0, 1);
    for (Index i = 0; i < ds.size(); ++i) {
        const auto& c = centers[static_cast<std::size_t>(ds.labels[i])];
        CHECK(ds.features(i, 0) == c.x());
        CHECK(ds.features(i, 1) == c.y());
    }
    CHECK(centers[2].y() == std::sqrt(3.0) / 2.0);
}

TEST_CASE("ternary generator preconditions") {
    CHECK_THROWS_AS(make_ternary_gaussian(0, default_ternary_centers(), 0.1, 1), ConfigError);
    CHECK_THROWS_AS(make_ternary_gaussian(3, default_ternary_centers(), -0.1, 1), ConfigError);
    auto same = default_ternary_centers();
    same[1] = same[0];
    CHECK_THROWS_AS(make_ternary_gaussian(3, same, 0.1, 1), ConfigError);
}

TEST_CASE("CSV round trip is exact") {
    auto ds = make_ternary_gaussian(10, default_ternary_centers(), 0.3, 3);
    auto path = temp_path("ds.csv");
    save_csv(path, ds);
    auto back = load_csv(path);
    CHECK(back.features == ds.features);
    CHECK(back.labels == ds.labels);
    CHECK(back.class_count == 3);
    CHECK(load_csv(path, 5).class_count == 5);
}

TEST_CASE("CSV format errors") {
    auto path = temp_path("bad.csv");
    std::ofstream(path) << "f0,label\n0.5,1\nabc,0\n";
    CHECK_THROWS_AS(load_csv(path), FormatError);
    std::ofstream(path, std::ios::trunc) << "f0,label\n0.5,1,3\n";
    CHECK_THROWS_AS(load_csv(path), FormatError);
    std::ofstream(path, std::ios::trunc) << "";
    CHECK_THROWS_AS(load_csv(path), FormatError);
    CHECK_THROWS_AS(load_csv(temp_path("nope.csv")), IoError);
}

TEST_CASE("IDX pair loads, scales to [0,1] and records the domain") {
    auto img = temp_path("ok-images"), lab = temp_path("ok-labels");
    write_idx(img, lab, 4, 2, 3);
    auto ds = load_idx_pair(img, lab);
    CHECK(ds.size() == 4);
    CHECK(ds.dim() == 6);
    CHECK(ds.class_count == 3);
    CHECK(ds.features(1, 0) == 6.0 / 255.0);
    CHECK(ds.labels == std::vector<int>{0, 1, 2, 0});
    REQUIRE(ds.bounds.has_value());
    CHECK(ds.bounds->lo == 0.0);
    CHECK(ds.bounds->hi == 1.0);
}

TEST_CASE("IDX errors are distinct") {
    auto img = temp_path("bad-images"), lab = temp_path("bad-labels");
    write_idx(img, lab, 4, 2, 2, 0x801);
    CHECK_THROWS_AS(load_idx_pair(img, lab), BadMagicError);
    write_idx(img, lab, 4, 2, 2, 0x803, 0, 3);
    CHECK_THROWS_AS(load_idx_pair(img, lab), TruncatedFileError);
    write_idx(img, lab, 4, 2, 2, 0x803, 5);
    CHECK_THROWS_AS(load_idx_pair(img, lab), CountMismatchError);
    std::ofstream(img, std::ios::binary | std::ios::trunc) << "ab";
    CHECK_THROWS_AS(load_idx_pair(img, lab), TruncatedFileError);
    CHECK_THROWS_AS(load_idx_pair(temp_path("missing"), lab), IoError);
}

TEST_CASE("bundled MNIST subset parses") {
    const fs::path dir = NOILIN_DATA_DIR "/mnist012";
    auto train = load_idx_pair(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
    auto test = load_idx_pair(dir / "test-images-idx3-ubyte", dir / "test-labels-idx1-ubyte");
    CHECK(train.size() == 2400);
    CHECK(train.dim() == 784);
    CHECK(train.class_count == 3);
    CHECK(test.size() > 0);
    CHECK(train.features.minCoeff() >= 0.0);
    CHECK(train.features.maxCoeff() <= 1.0);
}

TEST_CASE("split partitions the rows") {
    auto ds = make_ternary_gaussian(20, default_ternary_centers(), 0.3, 3);
    auto parts = split(ds, {12, 99});
    CHECK(parts.valid.size() == 12);
    CHECK(parts.train.size() == 48);
    std::vector<Index> all = parts.train_indices;
    all.insert(all.end(), parts.valid_indices.begin(), parts.valid_indices.end());
    std::sort(all.begin(), all.end());
    std::vector<Index> expect(60);
    std::iota(expect.begin(), expect.end(), Index{0});
    CHECK(all == expect);
    CHECK(std::is_sorted(parts.train_indices.begin(), parts.train_indices.end()));
    for (std::size_t k = 0; k < parts.valid_indices.size(); ++k)
        CHECK(parts.valid.labels[k] == ds.labels[static_cast<std::size_t>(parts.valid_indices[k])]);
    auto again = split(ds, {12, 99});
    CHECK(again.valid_indices == parts.valid_indices);
    CHECK_THROWS_AS(split(ds, {0, 1}), ConfigError);
    CHECK_THROWS_AS(split(ds, {60, 1}), ConfigError);
}

TEST_CASE("validate catches bad labels") {
    LabeledDataset ds;
    ds.features = Mat::Zero(2, 1);
    ds.labels = {0, 3};
    ds.class_count = 3;
    CHECK_THROWS_AS(ds.validate(), ConfigError);
    ds.labels = {0};
    CHECK_THROWS_AS(ds.validate(), ConfigError);
}
