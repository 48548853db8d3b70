#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "noilin/tensor.hpp"

namespace noilin {

/// Axis-aligned box [lo, hi]^d.
struct DomainBounds {
    double lo = 0.0;
    double hi = 1.0;
    bool operator==(const DomainBounds&) const = default;
};

struct LabeledDataset {
    Mat features;             // n x d
    std::vector<int> labels;  // n entries in [0, class_count)
    int class_count = 0;
    std::optional<DomainBounds> bounds;  // unset = unbounded domain

    Index size() const { return features.rows(); }
    Index dim() const { return features.cols(); }

    /// Throws ConfigError when labels are out of range or counts disagree.
    void validate() const;

    LabeledDataset subset(std::span<const Index> rows) const;
};

LabeledDataset make_ternary_gaussian(int n_per_class, const std::array<Eigen::Vector2d, 3>& centers, double sigma,
                                     std::uint64_t seed);

/// Default class centers of the synthetic task: an equilateral triangle with
/// unit side.
std::array<Eigen::Vector2d, 3> default_ternary_centers();

/// IDX image/label pair (e.g. MNIST). Pixels are scaled to [0,1] and the
/// domain is recorded as [0,1]. Class count = max label + 1.
LabeledDataset load_idx_pair(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Header row "f0,...,f{d-1},label", one sample per line.
void save_csv(const std::filesystem::path& path, const LabeledDataset& ds);
LabeledDataset load_csv(const std::filesystem::path& path, std::optional<int> class_count = std::nullopt);

struct SplitSpec {
    Index validation_count = 1000;
    std::uint64_t seed = 0;
};

struct DatasetSplit {
    LabeledDataset train;
    LabeledDataset valid;
    std::vector<Index> train_indices;  // ascending, into the original dataset
    std::vector<Index> valid_indices;
};

/// Uniform random partition into train and validation parts.
DatasetSplit split(const LabeledDataset& ds, const SplitSpec& spec);

}  // namespace noilin
