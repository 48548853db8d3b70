#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noilin/attack.hpp"
#include "noilin/data.hpp"
#include "noilin/label_noise.hpp"
#include "noilin/losses.hpp"
#include "noilin/metrics.hpp"
#include "noilin/model.hpp"
#include "noilin/scheduler.hpp"

namespace noilin {

enum class Method { sat, trades };

/// Where flipped labels enter a training step.
///   none       clean labels everywhere
///   inner      flipped labels drive the attack, loss uses clean labels
///   outer      attack uses clean labels, loss uses flipped labels
///   both       one flip set drives both
///   mismatched independent flip sets for attack and loss
///   noilin     like `both`, but the whole training set is flipped once per
///              epoch at the scheduler's current rate
/// The first four flip per minibatch at the configured noise rate.
enum class InjectionSite { none, inner, outer, both, mismatched, noilin };

enum class LrSchedule { piecewise, multiple_decay, cosine, cyclic };

/// Label smoothing for SAT: `outer` smooths the loss targets, `both` also
/// drives the attack with the smoothed targets, `adaptive` is `outer` with
/// rho following the adaptive noise rate.
enum class SmoothingMode { none, outer, both, adaptive };

std::string to_string(Method m);
std::string to_string(InjectionSite s);
std::string to_string(LrSchedule s);
std::string to_string(SmoothingMode s);
Method parse_method(const std::string& s);
InjectionSite parse_injection_site(const std::string& s);
LrSchedule parse_lr_schedule(const std::string& s);
SmoothingMode parse_smoothing_mode(const std::string& s);

struct LrConfig {
    LrSchedule schedule = LrSchedule::piecewise;
    double base = 0.1;
};

/// Learning rate at (0-based) epoch of a run with total_epochs epochs:
///   piecewise       base * 0.1^k, k = decay points passed; decays at 50% and
///                   75% of the run (epochs 60 and 90 of 120)
///   multiple_decay  base * 0.1^min(3, floor(epoch / (E/4)))
///   cosine          base * (1 + cos(pi * epoch / E)) / 2
///   cyclic          triangle rising to base at E/2 and back to 0 at E
/// Accepts epoch in [0, total_epochs]; the upper end evaluates the closed
/// form at the end of training.
double lr_at(const LrConfig& cfg, double epoch, int total_epochs);

struct TrainConfig {
    Method method = Method::sat;
    InjectionSite site = InjectionSite::none;
    NoiseSpec noise;  // kind and rate for per-minibatch sites; seed is derived from `seed`
    int epochs = 120;
    int batch_size = 128;
    LrConfig lr;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    AttackConfig attack;  // training-time attack
    double trades_beta = kTradesBeta;
    SmoothingMode smoothing = SmoothingMode::none;
    double smoothing_rho = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double eta = 0.0;
    double train_loss = 0.0;
    double nat_train_acc = 0.0;
    double nat_test_acc = 0.0;
    double rob_valid_acc = 0.0;
    double rob_test_pgd40 = 0.0;
    double rob_test_cw30 = 0.0;
    bool boosted = false;
};

inline constexpr const char* kEpochCsvHeader =
    "epoch,lr,eta,train_loss,nat_train_acc,nat_test_acc,rob_valid_acc,rob_test_pgd40,rob_test_cw30,boosted";

std::string epoch_csv_row(const EpochRecord& r);

/// Labels actually used for every training example during one epoch.
struct EpochProvenance {
    std::vector<int> attack_labels;
    std::vector<int> loss_labels;
    std::vector<bool> attack_flipped;
    std::vector<bool> loss_flipped;
    std::vector<int> batch;  // minibatch index each example was drawn in
};

struct EpochOutcome {
    double lr = 0.0;
    double eta = 0.0;
    double train_loss = 0.0;
    EpochProvenance provenance;
};

struct SgdState {
    std::vector<Mat> velocity;
};

/// v <- momentum * v + (g + weight_decay * theta); theta <- theta - lr * v.
void sgd_update(Mat& theta, const Mat& grad, Mat& velocity, double lr, double momentum, double weight_decay);

/// Applies sgd_update to every parameter from its accumulated gradient, then
/// clears the gradients. Non-finite gradients raise NumericError before any
/// parameter changes.
void sgd_step(std::span<Tensor> params, SgdState& state, double lr, double momentum, double weight_decay);

/// One pass over `train`. `epoch_view` carries the per-epoch flips for the
/// noilin site and is ignored otherwise; `eta` is the noise rate in effect.
EpochOutcome train_epoch(MlpClassifier& model, SgdState& state, const LabeledDataset& train,
                         const NoisyView* epoch_view, const TrainConfig& cfg, int epoch, double eta);

struct EvalConfig {
    double epsilon = 8.0 / 255.0;
    double cw_kappa = 0.0;
    bool pgd40 = true;
    bool cw30 = true;
    Index test_limit = 0;  // evenly spaced test subset of this size; 0 = all
};

struct RunData {
    const LabeledDataset& train;
    const LabeledDataset& valid;  // clean, never trained on
    const LabeledDataset& test;
};

struct RunOptions {
    std::vector<int> hidden = {64};
    NoilinParams noilin = NoilinParams::sat_defaults();
    EvalConfig eval;
    std::optional<std::filesystem::path> output_dir;
    std::string config_hash;
    std::vector<Index> tracked;  // training rows followed by diversity traces
    // Replaces the measured robust validation accuracy fed to the scheduler.
    std::function<double(int epoch, double measured)> validation_feed;
    std::function<void(const EpochRecord&, const EpochOutcome&)> on_epoch;
};

struct RunResult {
    MlpClassifier final_model;
    MlpClassifier best_model;
    int best_epoch = 0;
    std::vector<EpochRecord> records;
    std::vector<DiversityTrace> diversity;
};

/// Full training run. Robust validation accuracy (PGD-10) picks the best
/// checkpoint and feeds the noise scheduler. With an output directory,
/// writes epochs.csv, best.ckpt, last.ckpt and (when tracking) diversity.csv.
/// A training attack without its own clamp domain inherits the training
/// set's bounds.
RunResult run(const TrainConfig& cfg, const RunData& data, const RunOptions& options);

/// Test subset used for per-epoch evaluation.
LabeledDataset evaluation_subset(const LabeledDataset& test, Index limit);

}  // namespace noilin
