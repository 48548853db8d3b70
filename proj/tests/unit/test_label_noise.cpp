#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "../support/stats.hpp"
#include "noilin/errors.hpp"
#include "noilin/label_noise.hpp"
#include "noilin/rng.hpp"

using namespace noilin;
using namespace noilin::testing;

namespace {

std::vector<int> random_labels(std::size_t n, int C, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> d(0, C - 1);
    std::vector<int> y(n);
    for (auto& v : y) v = d(rng);
    return y;
}

LabeledDataset labels_only(std::vector<int> y, int C) {
    LabeledDataset ds;
    ds.features = Mat::Zero(static_cast<Index>(y.size()), 1);
    ds.labels = std::move(y);
    ds.class_count = C;
    return ds;
}

}  // namespace

TEST_CASE("flip count is round(rate * n)") {
    CHECK(flip_count(0.05, 100) == 5);
    CHECK(flip_count(0.055, 100) == 6);  // 5.5 rounds away from zero
    CHECK(flip_count(0.2, 7) == 1);
    CHECK(flip_count(0.5, 3) == 2);
    CHECK(flip_count(0.0, 50) == 0);
    CHECK(flip_count(1.0, 50) == 50);
}

TEST_CASE("exact flip counts; a flip always changes the label") {
    std::mt19937_64 meta(5);
    for (int trial = 0; trial < 300; ++trial) {
        const int C = 2 + static_cast<int>(meta() % 9);
        const std::size_t n = 1 + meta() % 400;
        const double rate = std::uniform_real_distribution<double>(0.0, 1.0)(meta);
        auto y = random_labels(n, C, meta());
        NoiseSpec spec{trial % 2 ? NoiseKind::pair : NoiseKind::symmetric, rate, 0, {}};
        auto r = flip_labels(y, C, spec, meta());
        std::size_t flipped = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (r.flipped[i]) {
                ++flipped;
                CHECK(r.labels[i] != y[i]);
                CHECK(r.labels[i] >= 0);
                CHECK(r.labels[i] < C);
            } else {
                CHECK(r.labels[i] == y[i]);
            }
        }
        CHECK(flipped == static_cast<std::size_t>(std::llround(rate * static_cast<double>(n))));
    }
}

TEST_CASE("symmetric targets are uniform over the other classes") {
    const int C = 10;
    auto y = random_labels(20000, C, 1);
    std::vector<long long> offsets(C - 1, 0);
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto r = flip_labels(y, C, {NoiseKind::symmetric, 0.5, 0, {}}, s);
        for (std::size_t i = 0; i < y.size(); ++i)
            if (r.flipped[i]) ++offsets[static_cast<std::size_t>((r.labels[i] - y[i] + C) % C - 1)];
    }
    CHECK(chi_square_uniform_p(offsets) > 0.01);
}

TEST_CASE("flipped positions are a uniform subset") {
    const std::size_t n = 20;
    std::vector<int> y(n, 0);
    std::vector<long long> hits(n, 0);
    for (std::uint64_t s = 0; s < 4000; ++s) {
        auto r = flip_labels(y, 3, {NoiseKind::symmetric, 0.25, 0, {}}, s);
        for (std::size_t i = 0; i < n; ++i) hits[i] += r.flipped[i];
    }
    CHECK(chi_square_uniform_p(hits) > 0.01);
}

TEST_CASE("pair flipping follows c -> c+1 mod C or a custom map") {
    std::vector<int> y{0, 1, 2, 3, 0, 1, 2, 3};
    auto r = flip_labels(y, 4, {NoiseKind::pair, 1.0, 0, {}}, 3);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(r.labels[i] == (y[i] + 1) % 4);
    auto m = flip_labels(y, 4, {NoiseKind::pair, 1.0, 0, {2, 3, 0, 1}}, 3);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(m.labels[i] == (y[i] + 2) % 4);
}

TEST_CASE("noise spec validation") {
    std::vector<int> y{0, 1};
    CHECK_THROWS_AS(flip_labels(y, 2, {NoiseKind::symmetric, 1.5, 0, {}}, 0), ConfigError);
    CHECK_THROWS_AS(flip_labels(y, 2, {NoiseKind::symmetric, -0.1, 0, {}}, 0), ConfigError);
    CHECK_THROWS_AS(flip_labels(y, 1, {NoiseKind::symmetric, 0.5, 0, {}}, 0), ConfigError);
    CHECK_THROWS_AS(flip_labels(y, 2, {NoiseKind::pair, 0.5, 0, {0, 1}}, 0), ConfigError);
    CHECK_THROWS_AS(flip_labels(y, 2, {NoiseKind::pair, 0.5, 0, {1}}, 0), ConfigError);
    CHECK_THROWS_AS(flip_labels(y, 2, {NoiseKind::pair, 0.5, 0, {1, 5}}, 0), ConfigError);
    CHECK_NOTHROW(flip_labels(y, 1 + 1, {NoiseKind::pair, 0.5, 0, {1, 0}}, 0));
}

TEST_CASE("flipping is pure in its seed; epochs draw fresh flips") {
    auto ds = labels_only(random_labels(500, 10, 4), 10);
    NoiseSpec spec{NoiseKind::symmetric, 0.3, 1234, {}};
    auto a = flip(ds, spec, 3);
    auto b = flip(ds, spec, 3);
    auto c = flip(ds, spec, 4);
    CHECK(a.noisy_labels == b.noisy_labels);
    CHECK(a.flipped_mask == b.flipped_mask);
    CHECK(a.flipped_mask != c.flipped_mask);
    CHECK(a.flip_count() == 150);
    CHECK(a.base_labels == ds.labels);
    CHECK(a.epoch == 3);
}

TEST_CASE("two independent views disagree at the closed-form rate") {
    const int C = 10;
    const double p = 0.3;
    const std::size_t n = 1000;
    auto y = random_labels(n, C, 8);
    double disagree = 0.0;
    const int reps = 400;
    for (int r = 0; r < reps; ++r) {
        auto a = flip_minibatch(y, C, {NoiseKind::symmetric, p, 0, {}}, derive_seed(1, Stream::flip_attack, r));
        auto b = flip_minibatch(y, C, {NoiseKind::symmetric, p, 0, {}}, derive_seed(1, Stream::flip_loss, r));
        for (std::size_t i = 0; i < n; ++i) disagree += a.labels[i] != b.labels[i];
    }
    const double observed = disagree / static_cast<double>(n * reps);
    const double expected = two_view_disagreement(p, C);
    CHECK(expected == doctest::Approx(0.42 + 0.08).epsilon(1e-12));  // 2(0.3)(0.7) + 0.09 * 8/9
    // standard error of the mean is below 1e-3 here
    CHECK(std::abs(observed - expected) < 4e-3);
}

TEST_CASE("noisy view CSV export") {
    auto ds = labels_only({0, 1, 2}, 3);
    auto v = flip(ds, {NoiseKind::pair, 1.0 / 3.0, 9, {}}, 0);
    auto path = std::filesystem::temp_directory_path() / "noilin_view.csv";
    write_noisy_view_csv(path, v);
    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    CHECK(header == "index,base_label,noisy_label,flipped");
    int rows = 0;
    for (std::string line; std::getline(is, line);) ++rows;
    CHECK(rows == 3);
}
