#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "noilin/data.hpp"

namespace noilin {

enum class NoiseKind { symmetric, pair };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::symmetric;
    double rate = 0.0;  // fraction of labels to flip, in [0, 1]
    std::uint64_t seed = 0;
    // Pair flipping sends class c to pair_map[c]; empty means (c + 1) mod C.
    // Must be a fixed-point-free map so that a flip always changes the label.
    std::vector<int> pair_map;

    void validate(int class_count) const;
};

struct FlipResult {
    std::vector<int> labels;
    std::vector<bool> flipped;
};

/// Noisy relabelling of a whole dataset for one epoch.
struct NoisyView {
    std::vector<int> base_labels;
    std::vector<int> noisy_labels;
    std::vector<bool> flipped_mask;
    int epoch = 0;

    std::size_t flip_count() const;
};

/// Number of labels flipped at rate `rate` over `n` labels: round(rate * n).
std::size_t flip_count(double rate, std::size_t n);

/// Flips exactly round(rate * n) labels chosen uniformly without replacement.
/// Symmetric: the new label is uniform over the other C-1 classes. Pair: the
/// new label is pair_map[c]. Pure in (labels, spec, seed).
FlipResult flip_labels(std::span<const int> labels, int class_count, const NoiseSpec& spec, std::uint64_t seed);

/// Epoch-level view; the epoch participates in seeding so each epoch draws a
/// fresh flip set.
NoisyView flip(const LabeledDataset& ds, const NoiseSpec& spec, int epoch);

/// One minibatch; same contract as flip_labels with flip count round(rate * batch).
FlipResult flip_minibatch(std::span<const int> labels, int class_count, const NoiseSpec& spec, std::uint64_t seed);

/// Audit export: "index,base_label,noisy_label,flipped".
void write_noisy_view_csv(const std::filesystem::path& path, const NoisyView& view);

}  // namespace noilin
