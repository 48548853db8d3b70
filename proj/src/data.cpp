#include "noilin/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "noilin/errors.hpp"
#include "noilin/rng.hpp"

namespace noilin {

void LabeledDataset::validate() const {
    if (static_cast<Index>(labels.size()) != features.rows())
        throw ConfigError("dataset: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(features.rows()) + " rows");
    for (int y : labels)
        if (y < 0 || y >= class_count)
            throw ConfigError("dataset: label " + std::to_string(y) + " outside [0, " + std::to_string(class_count) + ")");
}

LabeledDataset LabeledDataset::subset(std::span<const Index> rows) const {
    LabeledDataset out;
    out.features.resize(static_cast<Index>(rows.size()), dim());
    out.labels.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        out.features.row(static_cast<Index>(k)) = features.row(rows[k]);
        out.labels.push_back(labels[rows[k]]);
    }
    out.class_count = class_count;
    out.bounds = bounds;
    return out;
}

std::array<Eigen::Vector2d, 3> default_ternary_centers() {
    return {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.5, std::sqrt(3.0) / 2.0)};
}

LabeledDataset make_ternary_gaussian(int n_per_class, const std::array<Eigen::Vector2d, 3>& centers, double sigma,
                                     std::uint64_t seed) {
    if (n_per_class <= 0) throw ConfigError("make_ternary_gaussian: n_per_class must be positive");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("make_ternary_gaussian: sigma must be >= 0");
    for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b)
            if (centers[a] == centers[b]) throw ConfigError("make_ternary_gaussian: class centers must be distinct");

    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    LabeledDataset ds;
    ds.class_count = 3;
    ds.features.resize(3 * static_cast<Index>(n_per_class), 2);
    ds.labels.reserve(3 * n_per_class);
    Index row = 0;
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < n_per_class; ++i, ++row) {
            double dx = gauss(rng), dy = gauss(rng);
            ds.features(row, 0) = centers[c].x() + sigma * dx;
            ds.features(row, 1) = centers[c].y() + sigma * dy;
            ds.labels.push_back(c);
        }
    }
    return ds;
}

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at, const std::filesystem::path& path) {
    if (at + 4 > b.size()) throw TruncatedFileError("IDX header truncated: " + path.string());
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
           std::uint32_t{b[at + 3]};
}

}  // namespace

LabeledDataset load_idx_pair(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    auto img = read_all(images_path);
    auto lab = read_all(labels_path);

    if (be32(img, 0, images_path) != 0x00000803)
        throw BadMagicError("IDX image magic must be 0x00000803: " + images_path.string());
    if (be32(lab, 0, labels_path) != 0x00000801)
        throw BadMagicError("IDX label magic must be 0x00000801: " + labels_path.string());

    std::uint32_t n_img = be32(img, 4, images_path);
    std::uint32_t rows = be32(img, 8, images_path);
    std::uint32_t cols = be32(img, 12, images_path);
    std::uint32_t n_lab = be32(lab, 4, labels_path);

    std::size_t pixels = std::size_t{rows} * cols;
    if (img.size() < 16 + std::size_t{n_img} * pixels)
        throw TruncatedFileError("IDX image payload truncated: " + images_path.string());
    if (lab.size() < 8 + std::size_t{n_lab}) throw TruncatedFileError("IDX label payload truncated: " + labels_path.string());
    if (n_img != n_lab)
        throw CountMismatchError("IDX count mismatch: " + std::to_string(n_img) + " images vs " + std::to_string(n_lab) +
                                 " labels");

    LabeledDataset ds;
    ds.features.resize(n_img, static_cast<Index>(pixels));
    for (std::size_t i = 0; i < n_img; ++i)
        for (std::size_t p = 0; p < pixels; ++p)
            ds.features(static_cast<Index>(i), static_cast<Index>(p)) = img[16 + i * pixels + p] / 255.0;
    int max_label = -1;
    for (std::size_t i = 0; i < n_lab; ++i) {
        ds.labels.push_back(lab[8 + i]);
        max_label = std::max(max_label, ds.labels.back());
    }
    ds.class_count = max_label + 1;
    ds.bounds = DomainBounds{0.0, 1.0};
    return ds;
}

void save_csv(const std::filesystem::path& path, const LabeledDataset& ds) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    for (Index j = 0; j < ds.dim(); ++j) os << 'f' << j << ',';
    os << "label\n";
    os << std::setprecision(17);
    for (Index i = 0; i < ds.size(); ++i) {
        for (Index j = 0; j < ds.dim(); ++j) os << ds.features(i, j) << ',';
        os << ds.labels[i] << '\n';
    }
    if (!os) throw IoError("failed writing " + path.string());
}

LabeledDataset load_csv(const std::filesystem::path& path, std::optional<int> class_count) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw FormatError("empty CSV: " + path.string());
    Index columns = std::count(line.begin(), line.end(), ',') + 1;
    if (columns < 2) throw FormatError("CSV needs at least one feature and a label: " + path.string());

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
            }
        }
        if (static_cast<Index>(row.size()) != columns)
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                              " columns");
        labels.push_back(static_cast<int>(row.back()));
        row.pop_back();
        rows.push_back(std::move(row));
    }
    LabeledDataset ds;
    ds.features.resize(static_cast<Index>(rows.size()), columns - 1);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (Index j = 0; j < columns - 1; ++j) ds.features(static_cast<Index>(i), j) = rows[i][j];
    ds.labels = std::move(labels);
    ds.class_count = class_count.value_or(
        ds.labels.empty() ? 0 : *std::max_element(ds.labels.begin(), ds.labels.end()) + 1);
    ds.validate();
    return ds;
}

DatasetSplit split(const LabeledDataset& ds, const SplitSpec& spec) {
    if (spec.validation_count <= 0 || spec.validation_count >= ds.size())
        throw ConfigError("split: validation_count " + std::to_string(spec.validation_count) + " must lie in (0, " +
                          std::to_string(ds.size()) + ")");
    std::vector<Index> order(static_cast<std::size_t>(ds.size()));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(derive_seed(spec.seed, Stream::split));
    std::shuffle(order.begin(), order.end(), rng);

    DatasetSplit out;
    out.valid_indices.assign(order.begin(), order.begin() + spec.validation_count);
    out.train_indices.assign(order.begin() + spec.validation_count, order.end());
    std::sort(out.valid_indices.begin(), out.valid_indices.end());
    std::sort(out.train_indices.begin(), out.train_indices.end());
    out.train = ds.subset(out.train_indices);
    out.valid = ds.subset(out.valid_indices);
    return out;
}

}  // namespace noilin
