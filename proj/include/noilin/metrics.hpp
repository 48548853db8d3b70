#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noilin/attack.hpp"
#include "noilin/data.hpp"
#include "noilin/model.hpp"

namespace noilin {

std::vector<int> predict(const MlpClassifier& model, const Mat& x);

/// Fraction of samples classified correctly. With an attack, each sample is
/// first perturbed by pgd against its true label. Samples are processed in
/// fixed chunks whose random streams derive from `seed`, so the result does
/// not depend on the worker count.
double accuracy(const MlpClassifier& model, const LabeledDataset& ds, const AttackConfig* attack = nullptr,
                std::uint64_t seed = 0);

// Named evaluation attacks shared by the training loop and the CLI.
std::vector<std::string> attack_names();
AttackConfig named_attack(const std::string& name, double epsilon, std::optional<DomainBounds> domain,
                          double cw_kappa = 0.0);
std::uint64_t named_attack_seed(std::uint64_t run_seed, const std::string& name);

/// f_y - max_{j != y} f_j per row.
std::vector<double> logit_margins(const Mat& logits, std::span<const int> labels);

struct MarginStats {
    double median = 0.0;
    double stddev = 0.0;  // population standard deviation
};

MarginStats margin_stats(std::span<const double> margins);
MarginStats logit_margin_stats(const MlpClassifier& model, const LabeledDataset& ds);

enum class KlDirection {
    adversarial_to_natural,  // KL(f(x_adv) || f(x_nat))
    natural_to_adversarial,
};

struct SimilarityRow {
    Index index = 0;
    int true_label = 0;
    int flipped_label = 0;
    double kl_nl = 0.0;  // noisy-label adversarial vs natural
    double kl_cl = 0.0;  // clean-label adversarial vs natural
    double ce_natural = 0.0;
    double ce_cl = 0.0;
    double ce_nl = 0.0;
};

/// For every sample: a clean-label adversarial x_cl (attack on the true
/// label) and a noisy-label one x_nl (attack on a uniformly drawn wrong
/// label), their KL to the natural prediction, and the cross-entropy of the
/// true label at x, x_cl and x_nl.
std::vector<SimilarityRow> nl_similarity_report(const MlpClassifier& model, const LabeledDataset& ds,
                                                const AttackConfig& attack, std::uint64_t seed,
                                                KlDirection direction = KlDirection::adversarial_to_natural);

void write_similarity_csv(const std::filesystem::path& path, std::span<const SimilarityRow> rows);

/// Per tracked training example: outer loss and weight-gradient norm, one
/// entry per epoch observed.
struct DiversityTrace {
    Index index = 0;
    std::vector<double> outer_loss;
    std::vector<double> grad_norm;
};

struct DiversityPoint {
    double loss = 0.0;
    double grad_norm = 0.0;
};

/// loss(f(x_adv), loss_label) and the L2 norm of its gradient with respect to
/// all model parameters, where x_adv attacks `x` (one row) on `attack_label`.
DiversityPoint diversity_point(const MlpClassifier& model, const Mat& x, int attack_label, int loss_label,
                               const AttackConfig& attack, Rng& rng);

void write_diversity_csv(const std::filesystem::path& path, std::span<const DiversityTrace> traces);

/// Population variance.
double variance(std::span<const double> values);

}  // namespace noilin
