#include "noilin/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <json.hpp>

#include "noilin/rng.hpp"

namespace noilin {

namespace {

constexpr char kMagic[8] = {'N', 'O', 'I', 'L', 'C', 'K', 'P', 'T'};

std::uint64_t to_little(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
    return v;
}

void write_u64(std::ostream& os, std::uint64_t v) {
    v = to_little(v);
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return to_little(v);
}

void write_f64(std::ostream& os, double d) { write_u64(os, std::bit_cast<std::uint64_t>(d)); }

}  // namespace

MlpClassifier MlpClassifier::init(const std::vector<int>& layer_sizes, std::uint64_t seed) {
    if (layer_sizes.size() < 2) throw ConfigError("MlpClassifier::init: need at least 2 layer sizes");
    for (int s : layer_sizes)
        if (s <= 0) throw ConfigError("MlpClassifier::init: layer sizes must be positive");

    Rng rng(derive_seed(seed, Stream::init));
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        int fan_in = layer_sizes[l], fan_out = layer_sizes[l + 1];
        double bound = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        Mat w(fan_in, fan_out);
        for (Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
        layers.push_back({Tensor(std::move(w), true), Tensor::zeros(1, fan_out, true)});
    }
    return from_layers(std::move(layers), seed);
}

MlpClassifier MlpClassifier::from_layers(std::vector<DenseLayer> layers, std::uint64_t seed) {
    if (layers.empty()) throw ConfigError("MlpClassifier: no layers");
    MlpClassifier m;
    m.sizes_.push_back(static_cast<int>(layers.front().weight.rows()));
    for (const auto& layer : layers) {
        if (layer.weight.rows() != m.sizes_.back())
            throw ShapeError("MlpClassifier: layer input " + std::to_string(layer.weight.rows()) +
                             " does not match previous width " + std::to_string(m.sizes_.back()));
        if (layer.bias.rows() != 1 || layer.bias.cols() != layer.weight.cols())
            throw ShapeError("MlpClassifier: bias shape " + shape_string(layer.bias.shape()) +
                             " does not match weight " + shape_string(layer.weight.shape()));
        m.sizes_.push_back(static_cast<int>(layer.weight.cols()));
    }
    m.layers_ = std::move(layers);
    m.seed_ = seed;
    return m;
}

Tensor MlpClassifier::forward(const Tensor& x) const {
    if (x.cols() != input_dim())
        throw ShapeError("MlpClassifier::forward: feature dimension " + std::to_string(x.cols()) +
                         " does not match model input " + std::to_string(input_dim()));
    Tensor h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        h = add(matmul(h, layers_[l].weight), layers_[l].bias);
        if (l + 1 < layers_.size()) h = relu(h);
    }
    return h;
}

Mat MlpClassifier::logits(const Mat& x) const {
    if (x.cols() != input_dim())
        throw ShapeError("MlpClassifier::logits: feature dimension " + std::to_string(x.cols()) +
                         " does not match model input " + std::to_string(input_dim()));
    Mat h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Mat z = h * layers_[l].weight.value();
        z.rowwise() += layers_[l].bias.value().row(0);
        h = (l + 1 < layers_.size()) ? Mat(z.cwiseMax(0.0)) : std::move(z);
    }
    return h;
}

std::vector<Tensor> MlpClassifier::parameters() const {
    std::vector<Tensor> out;
    for (const auto& layer : layers_) {
        out.push_back(layer.weight);
        out.push_back(layer.bias);
    }
    return out;
}

std::vector<std::string> MlpClassifier::parameter_names() const {
    std::vector<std::string> out;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        out.push_back("layer" + std::to_string(l) + ".weight");
        out.push_back("layer" + std::to_string(l) + ".bias");
    }
    return out;
}

std::size_t MlpClassifier::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += static_cast<std::size_t>(p.size());
    return n;
}

void MlpClassifier::set_trainable(bool on) {
    for (auto& p : parameters()) p.set_requires_grad(on);
}

MlpClassifier MlpClassifier::clone() const {
    std::vector<DenseLayer> layers;
    for (const auto& l : layers_)
        layers.push_back({Tensor(l.weight.value(), l.weight.requires_grad()), Tensor(l.bias.value(), l.bias.requires_grad())});
    MlpClassifier m;
    m.sizes_ = sizes_;
    m.layers_ = std::move(layers);
    m.seed_ = seed_;
    return m;
}

MlpClassifier MlpClassifier::frozen() const {
    MlpClassifier m = clone();
    m.set_trainable(false);
    return m;
}

bool MlpClassifier::operator==(const MlpClassifier& other) const {
    if (sizes_ != other.sizes_) return false;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (layers_[l].weight.value() != other.layers_[l].weight.value()) return false;
        if (layers_[l].bias.value() != other.layers_[l].bias.value()) return false;
    }
    return true;
}

void save_checkpoint(const std::filesystem::path& path, const MlpClassifier& model, const CheckpointInfo& info) {
    nlohmann::json header;
    header["format"] = "noilin-ckpt";
    header["version"] = 1;
    header["layer_sizes"] = model.layer_sizes();
    header["seed"] = info.seed;
    header["config_hash"] = info.config_hash;
    auto params = model.parameters();
    auto names = model.parameter_names();
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        header["tensors"].push_back({{"name", names[i]}, {"shape", {params[i].rows(), params[i].cols()}}, {"offset", offset}});
        offset += static_cast<std::uint64_t>(params[i].size()) * 8;
    }
    std::string text = header.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
    os.write(kMagic, sizeof kMagic);
    write_u64(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : params)
        for (Index i = 0; i < p.size(); ++i) write_f64(os, p.value().data()[i]);
    if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

MlpClassifier load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path.string());
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw BadMagicError("not a checkpoint file: " + path.string());
    std::uint64_t len = read_u64(is);
    if (!is || len > (1u << 26)) throw TruncatedFileError("checkpoint header truncated: " + path.string());
    std::string text(len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(len));
    if (!is) throw TruncatedFileError("checkpoint header truncated: " + path.string());

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("checkpoint header is not valid JSON (" + path.string() + "): " + e.what());
    }
    auto sizes = header.at("layer_sizes").get<std::vector<int>>();
    std::vector<Mat> values;
    for (const auto& t : header.at("tensors")) {
        auto shape = t.at("shape").get<std::vector<Index>>();
        Mat m(shape.at(0), shape.at(1));
        for (Index i = 0; i < m.size(); ++i) {
            std::uint64_t bits = read_u64(is);
            m.data()[i] = std::bit_cast<double>(bits);
        }
        if (!is) throw TruncatedFileError("checkpoint payload truncated: " + path.string());
        values.push_back(std::move(m));
    }
    if (values.size() != 2 * (sizes.size() - 1))
        throw FormatError("checkpoint tensor count does not match layer sizes: " + path.string());
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
        layers.push_back({Tensor(values[2 * l], true), Tensor(values[2 * l + 1], true)});
    if (info) {
        info->seed = header.value("seed", std::uint64_t{0});
        info->config_hash = header.value("config_hash", std::string{});
    }
    auto model = MlpClassifier::from_layers(std::move(layers), header.value("seed", std::uint64_t{0}));
    if (model.layer_sizes() != sizes) throw FormatError("checkpoint shapes inconsistent: " + path.string());
    return model;
}

}  // namespace noilin
