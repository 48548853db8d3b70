#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "noilin/data.hpp"
#include "noilin/scheduler.hpp"
#include "noilin/train.hpp"

namespace noilin {

/// Where a dataset comes from. `ternary` specs are exactly what `gen-data`
/// writes as its JSON sidecar.
struct DatasetSpec {
    enum class Kind { ternary, csv, idx } kind = Kind::ternary;
    // ternary
    int n_per_class = 100;
    std::array<Eigen::Vector2d, 3> centers = default_ternary_centers();
    double sigma = 0.25;
    std::uint64_t seed = 0;
    // csv
    std::filesystem::path path;
    std::optional<int> class_count;
    std::optional<DomainBounds> bounds;
    // idx
    std::filesystem::path images;
    std::filesystem::path labels;

    nlohmann::json to_json() const;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "run";
    DatasetSpec train_data;  // validation rows are carved out of this pool
    DatasetSpec test_data;
    Index validation_count = 1000;
    std::vector<int> hidden = {64};
    TrainConfig train;
    NoilinParams noilin;
    EvalConfig eval;
    std::vector<std::string> eval_attacks = {"pgd40", "cw30"};
    int track_diversity = 0;  // number of training rows to follow

    nlohmann::json raw;  // the document as given
};

/// Parses and validates a config document. Unknown keys and type errors are
/// ConfigErrors naming the offending field path (e.g. "train.attack.steps").
/// Relative dataset paths resolve against base_dir.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Fully specified document equivalent to cfg (every default spelled out).
/// Parsing it back yields the same settings.
nlohmann::json to_json(const ExperimentConfig& cfg);

DatasetSpec parse_dataset_spec(const nlohmann::json& j, const std::string& path,
                               const std::filesystem::path& base_dir = {});
LabeledDataset materialize(const DatasetSpec& spec);

struct ExperimentData {
    LabeledDataset train;
    LabeledDataset valid;
    LabeledDataset test;
};

ExperimentData load_experiment_data(const ExperimentConfig& cfg);

/// Content hash in git's blob form: sha1("blob <len>\0" + content), hex.
std::string git_blob_sha1(const std::string& content);

}  // namespace noilin
