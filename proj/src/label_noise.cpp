#include "noilin/label_noise.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "noilin/errors.hpp"
#include "noilin/rng.hpp"

namespace noilin {

void NoiseSpec::validate(int class_count) const {
    if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("noise rate must lie in [0, 1], got " + std::to_string(rate));
    if (rate > 0.0 && class_count < 2) throw ConfigError("label flipping needs at least 2 classes");
    if (kind == NoiseKind::pair && !pair_map.empty()) {
        if (static_cast<int>(pair_map.size()) != class_count)
            throw ConfigError("pair_map must have one entry per class");
        for (int c = 0; c < class_count; ++c) {
            int to = pair_map[c];
            if (to < 0 || to >= class_count) throw ConfigError("pair_map entry out of range");
            if (to == c) throw ConfigError("pair_map must not map a class to itself");
        }
    }
}

std::size_t NoisyView::flip_count() const {
    return static_cast<std::size_t>(std::count(flipped_mask.begin(), flipped_mask.end(), true));
}

std::size_t flip_count(double rate, std::size_t n) {
    return static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
}

FlipResult flip_labels(std::span<const int> labels, int class_count, const NoiseSpec& spec, std::uint64_t seed) {
    spec.validate(class_count);
    FlipResult out{std::vector<int>(labels.begin(), labels.end()), std::vector<bool>(labels.size(), false)};
    std::size_t k = flip_count(spec.rate, labels.size());
    if (k == 0) return out;

    Rng rng(seed);
    std::vector<std::size_t> idx(labels.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // partial Fisher-Yates: the first k slots are a uniform k-subset
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));

    std::uniform_int_distribution<int> other(0, class_count - 2);
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t at = idx[i];
        int y = labels[at];
        int to;
        if (spec.kind == NoiseKind::symmetric) {
            to = other(rng);
            if (to >= y) ++to;
        } else {
            to = spec.pair_map.empty() ? (y + 1) % class_count : spec.pair_map[y];
        }
        out.labels[at] = to;
        out.flipped[at] = true;
    }
    return out;
}

NoisyView flip(const LabeledDataset& ds, const NoiseSpec& spec, int epoch) {
    auto r = flip_labels(ds.labels, ds.class_count, spec,
                         derive_seed(spec.seed, Stream::flip_epoch, static_cast<std::uint64_t>(epoch)));
    return NoisyView{ds.labels, std::move(r.labels), std::move(r.flipped), epoch};
}

FlipResult flip_minibatch(std::span<const int> labels, int class_count, const NoiseSpec& spec, std::uint64_t seed) {
    return flip_labels(labels, class_count, spec, seed);
}

void write_noisy_view_csv(const std::filesystem::path& path, const NoisyView& view) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << "index,base_label,noisy_label,flipped\n";
    for (std::size_t i = 0; i < view.noisy_labels.size(); ++i)
        os << i << ',' << view.base_labels[i] << ',' << view.noisy_labels[i] << ',' << (view.flipped_mask[i] ? 1 : 0)
           << '\n';
    if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace noilin
