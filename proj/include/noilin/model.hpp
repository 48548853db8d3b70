#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "noilin/tensor.hpp"

namespace noilin {

struct DenseLayer {
    Tensor weight;  // (fan_in x fan_out)
    Tensor bias;    // (1 x fan_out)
};

/// Fully connected ReLU network producing raw logits.
class MlpClassifier {
public:
    MlpClassifier() = default;

    /// He-style uniform init: weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)),
    /// biases zero. Identical (sizes, seed) give bit-identical parameters.
    static MlpClassifier init(const std::vector<int>& layer_sizes, std::uint64_t seed);

    /// Builds a model from explicit layers; shapes must chain.
    static MlpClassifier from_layers(std::vector<DenseLayer> layers, std::uint64_t seed = 0);

    /// logits = relu-chained affine maps of x, shape (batch x classes).
    Tensor forward(const Tensor& x) const;
    Mat logits(const Mat& x) const;

    std::vector<Tensor> parameters() const;
    std::vector<std::string> parameter_names() const;
    std::size_t parameter_count() const;

    const std::vector<int>& layer_sizes() const { return sizes_; }
    int input_dim() const { return sizes_.front(); }
    int num_classes() const { return sizes_.back(); }
    std::uint64_t seed() const { return seed_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }

    void set_trainable(bool on);

    /// Deep copy; requires_grad flags are preserved.
    MlpClassifier clone() const;
    /// Deep copy with gradient tracking off, for read-only use (attacks,
    /// evaluation, sharing across workers).
    MlpClassifier frozen() const;

    bool operator==(const MlpClassifier& other) const;

private:
    std::vector<int> sizes_;
    std::vector<DenseLayer> layers_;
    std::uint64_t seed_ = 0;
};

struct CheckpointInfo {
    std::uint64_t seed = 0;
    std::string config_hash;
};

// Layout: 8-byte magic "NOILCKPT", u64 little-endian header length, UTF-8
// JSON header {format, version, layer_sizes, seed, config_hash, tensors:
// [{name, shape, offset}]}, then every tensor's row-major values as
// little-endian f64 in header order. Offsets are in bytes from the payload
// start.
void save_checkpoint(const std::filesystem::path& path, const MlpClassifier& model, const CheckpointInfo& info);
MlpClassifier load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

}  // namespace noilin
