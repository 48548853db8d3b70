#include "noilin/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "noilin/errors.hpp"
#include "noilin/format.hpp"
#include "noilin/losses.hpp"
#include "noilin/rng.hpp"

namespace noilin {

std::string to_string(Method m) { return m == Method::sat ? "sat" : "trades"; }

std::string to_string(InjectionSite s) {
    switch (s) {
        case InjectionSite::none: return "none";
        case InjectionSite::inner: return "inner";
        case InjectionSite::outer: return "outer";
        case InjectionSite::both: return "both";
        case InjectionSite::mismatched: return "mismatched";
        case InjectionSite::noilin: return "noilin";
    }
    return "?";
}

std::string to_string(LrSchedule s) {
    switch (s) {
        case LrSchedule::piecewise: return "piecewise";
        case LrSchedule::multiple_decay: return "multiple_decay";
        case LrSchedule::cosine: return "cosine";
        case LrSchedule::cyclic: return "cyclic";
    }
    return "?";
}

std::string to_string(SmoothingMode s) {
    switch (s) {
        case SmoothingMode::none: return "none";
        case SmoothingMode::outer: return "outer";
        case SmoothingMode::both: return "both";
        case SmoothingMode::adaptive: return "adaptive";
    }
    return "?";
}

Method parse_method(const std::string& s) {
    if (s == "sat") return Method::sat;
    if (s == "trades") return Method::trades;
    throw ConfigError("unknown method '" + s + "' (valid: sat, trades)");
}

InjectionSite parse_injection_site(const std::string& s) {
    for (auto site : {InjectionSite::none, InjectionSite::inner, InjectionSite::outer, InjectionSite::both,
                      InjectionSite::mismatched, InjectionSite::noilin})
        if (to_string(site) == s) return site;
    throw ConfigError("unknown injection site '" + s + "' (valid: none, inner, outer, both, mismatched, noilin)");
}

LrSchedule parse_lr_schedule(const std::string& s) {
    for (auto sch : {LrSchedule::piecewise, LrSchedule::multiple_decay, LrSchedule::cosine, LrSchedule::cyclic})
        if (to_string(sch) == s) return sch;
    throw ConfigError("unknown lr schedule '" + s + "' (valid: piecewise, multiple_decay, cosine, cyclic)");
}

SmoothingMode parse_smoothing_mode(const std::string& s) {
    for (auto m : {SmoothingMode::none, SmoothingMode::outer, SmoothingMode::both, SmoothingMode::adaptive})
        if (to_string(m) == s) return m;
    throw ConfigError("unknown label smoothing mode '" + s + "' (valid: none, outer, both, adaptive)");
}

double lr_at(const LrConfig& cfg, double epoch, int total_epochs) {
    if (total_epochs < 1) throw ConfigError("lr_at: total_epochs must be >= 1");
    if (!(epoch >= 0.0 && epoch <= total_epochs))
        throw ConfigError("lr_at: epoch " + format_double(epoch) + " outside [0, " + std::to_string(total_epochs) + "]");
    const double E = total_epochs;
    switch (cfg.schedule) {
        case LrSchedule::piecewise: {
            int passed = (epoch >= 0.5 * E) + (epoch >= 0.75 * E);
            return cfg.base / std::pow(10.0, passed);
        }
        case LrSchedule::multiple_decay: {
            int passed = std::min(3, static_cast<int>(std::floor(epoch / (E / 4.0))));
            return cfg.base / std::pow(10.0, passed);
        }
        case LrSchedule::cosine: return cfg.base * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / E));
        case LrSchedule::cyclic: {
            double half = E / 2.0;
            return epoch <= half ? cfg.base * (epoch / half) : cfg.base * ((E - epoch) / half);
        }
    }
    throw ConfigError("lr_at: unknown schedule");
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(lr.base > 0.0)) throw ConfigError("train: base learning rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
    if (!(trades_beta >= 0.0)) throw ConfigError("train: trades beta must be >= 0");
    if (!(noise.rate >= 0.0 && noise.rate <= 1.0)) throw ConfigError("train: noise rate must lie in [0, 1]");
    if (!(smoothing_rho >= 0.0 && smoothing_rho < 1.0)) throw ConfigError("train: smoothing rho must lie in [0, 1)");
    if (smoothing != SmoothingMode::none && method != Method::sat)
        throw ConfigError("train: label smoothing is only defined for sat");
    attack.validate();
}

std::string epoch_csv_row(const EpochRecord& r) {
    std::string s = std::to_string(r.epoch);
    for (double v : {r.lr, r.eta, r.train_loss, r.nat_train_acc, r.nat_test_acc, r.rob_valid_acc, r.rob_test_pgd40,
                     r.rob_test_cw30})
        s += "," + format_double(v);
    s += r.boosted ? ",1" : ",0";
    return s;
}

void sgd_update(Mat& theta, const Mat& grad, Mat& velocity, double lr, double momentum, double weight_decay) {
    if (velocity.size() == 0) velocity = Mat::Zero(theta.rows(), theta.cols());
    velocity = momentum * velocity + (grad + weight_decay * theta);
    theta -= lr * velocity;
}

void sgd_step(std::span<Tensor> params, SgdState& state, double lr, double momentum, double weight_decay) {
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].has_grad() && !params[i].grad().allFinite())
            throw NumericError("sgd_step: non-finite gradient in parameter " + std::to_string(i));
    if (state.velocity.size() != params.size()) state.velocity.assign(params.size(), Mat());
    for (std::size_t i = 0; i < params.size(); ++i) {
        Mat& theta = params[i].mutable_value();
        Mat grad = params[i].has_grad() ? params[i].grad() : Mat::Zero(theta.rows(), theta.cols());
        sgd_update(theta, grad, state.velocity[i], lr, momentum, weight_decay);
        params[i].clear_grad();
    }
}

EpochOutcome train_epoch(MlpClassifier& model, SgdState& state, const LabeledDataset& train,
                         const NoisyView* epoch_view, const TrainConfig& cfg, int epoch, double eta) {
    cfg.validate();
    if (train.dim() != model.input_dim() || train.class_count != model.num_classes())
        throw ShapeError("train_epoch: dataset (" + std::to_string(train.dim()) + " features, " +
                         std::to_string(train.class_count) + " classes) does not fit the model");
    const auto n = static_cast<std::size_t>(train.size());
    if (cfg.site == InjectionSite::noilin && (!epoch_view || epoch_view->noisy_labels.size() != n))
        throw ConfigError("train_epoch: noilin site needs a per-epoch noisy view of the training set");

    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    Rng shuffle_rng(derive_seed(cfg.seed, Stream::shuffle, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochOutcome out;
    out.lr = lr_at(cfg.lr, epoch, cfg.epochs);
    out.eta = eta;
    auto& prov = out.provenance;
    prov.attack_labels.assign(n, 0);
    prov.loss_labels.assign(n, 0);
    prov.attack_flipped.assign(n, false);
    prov.loss_flipped.assign(n, false);
    prov.batch.assign(n, 0);

    NoiseSpec spec = cfg.noise;
    spec.rate = eta;
    const double rho = cfg.smoothing == SmoothingMode::adaptive ? eta : cfg.smoothing_rho;
    const int C = train.class_count;
    model.set_trainable(true);
    auto params = model.parameters();

    double loss_sum = 0.0;
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t start = 0, b = 0; start < n; start += bs, ++b) {
        const std::size_t len = std::min(bs, n - start);
        std::span<const Index> idx(order.data() + start, len);
        LabeledDataset batch = train.subset(idx);
        const auto& y = batch.labels;

        FlipResult attack_side{y, std::vector<bool>(len, false)};
        FlipResult loss_side = attack_side;
        auto flip_with = [&](Stream s) {
            return flip_minibatch(y, C, spec, derive_seed(cfg.seed, s, static_cast<std::uint64_t>(epoch), b));
        };
        switch (cfg.site) {
            case InjectionSite::none: break;
            case InjectionSite::inner: attack_side = flip_with(Stream::flip_attack); break;
            case InjectionSite::outer: loss_side = flip_with(Stream::flip_loss); break;
            case InjectionSite::both:
                attack_side = flip_with(Stream::flip_attack);
                loss_side = attack_side;
                break;
            case InjectionSite::mismatched:
                attack_side = flip_with(Stream::flip_attack);
                loss_side = flip_with(Stream::flip_loss);
                break;
            case InjectionSite::noilin:
                for (std::size_t k = 0; k < len; ++k) {
                    attack_side.labels[k] = epoch_view->noisy_labels[idx[k]];
                    attack_side.flipped[k] = epoch_view->flipped_mask[idx[k]];
                }
                loss_side = attack_side;
                break;
        }
        for (std::size_t k = 0; k < len; ++k) {
            auto i = static_cast<std::size_t>(idx[k]);
            prov.attack_labels[i] = attack_side.labels[k];
            prov.loss_labels[i] = loss_side.labels[k];
            prov.attack_flipped[i] = attack_side.flipped[k];
            prov.loss_flipped[i] = loss_side.flipped[k];
            prov.batch[i] = static_cast<int>(b);
        }

        AttackConfig attack = cfg.attack;
        AttackGoal goal{attack_side.labels};
        Mat natural_logits, soft_targets;
        if (cfg.method == Method::trades) {
            attack.objective = AttackObjective::kl;
            natural_logits = model.logits(batch.features);
            goal.natural_logits = &natural_logits;
        } else if (cfg.smoothing == SmoothingMode::both) {
            attack.objective = AttackObjective::soft_cross_entropy;
            soft_targets = smoothed_targets(attack_side.labels, C, rho);
            goal.soft_targets = &soft_targets;
        }
        Rng attack_rng(derive_seed(cfg.seed, Stream::attack_start, static_cast<std::uint64_t>(epoch), b));
        Mat x_adv = pgd(model, batch.features, goal, attack, attack_rng);

        Tape tape;
        Tensor loss;
        if (cfg.method == Method::trades) {
            loss = trades_loss(model, Tensor(batch.features), Tensor(x_adv), loss_side.labels, cfg.trades_beta);
        } else if (cfg.smoothing != SmoothingMode::none) {
            loss = soft_cross_entropy(model.forward(Tensor(x_adv)), smoothed_targets(loss_side.labels, C, rho));
        } else {
            loss = cross_entropy(model.forward(Tensor(x_adv)), loss_side.labels);
        }
        if (!std::isfinite(loss.item()))
            throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(b));
        tape.backward(loss);
        sgd_step(params, state, out.lr, cfg.momentum, cfg.weight_decay);
        loss_sum += loss.item() * static_cast<double>(len);
    }
    out.train_loss = loss_sum / static_cast<double>(n);
    return out;
}

LabeledDataset evaluation_subset(const LabeledDataset& test, Index limit) {
    if (limit <= 0 || limit >= test.size()) return test;
    // evenly spaced rows, so class-sorted files stay balanced
    std::vector<Index> rows(static_cast<std::size_t>(limit));
    for (Index k = 0; k < limit; ++k) rows[k] = k * test.size() / limit;
    return test.subset(rows);
}

namespace {

void check_compatible(const LabeledDataset& a, const LabeledDataset& b, const char* name) {
    if (a.dim() != b.dim() || a.class_count != b.class_count)
        throw ConfigError(std::string("run: ") + name + " set does not match the training set's shape");
}

}  // namespace

RunResult run(const TrainConfig& config, const RunData& data, const RunOptions& options) {
    config.validate();
    TrainConfig cfg = config;
    if (!cfg.attack.clamp_domain) cfg.attack.clamp_domain = data.train.bounds;
    data.train.validate();
    data.valid.validate();
    data.test.validate();
    check_compatible(data.train, data.valid, "validation");
    check_compatible(data.train, data.test, "test");
    if (data.valid.size() == 0 || data.test.size() == 0) throw ConfigError("run: empty validation or test set");
    if (cfg.site != InjectionSite::none && data.train.class_count < 2)
        throw ConfigError("run: label noise needs at least 2 classes");

    std::vector<int> sizes{static_cast<int>(data.train.dim())};
    sizes.insert(sizes.end(), options.hidden.begin(), options.hidden.end());
    sizes.push_back(data.train.class_count);

    RunResult result;
    MlpClassifier model = MlpClassifier::init(sizes, cfg.seed);
    SgdState sgd;

    const bool adaptive = cfg.site == InjectionSite::noilin || cfg.smoothing == SmoothingMode::adaptive;
    std::optional<NoilinScheduler> scheduler;
    if (adaptive) scheduler.emplace(options.noilin);

    const LabeledDataset test = evaluation_subset(data.test, options.eval.test_limit);
    const auto domain = data.train.bounds;
    const AttackConfig valid_attack = named_attack("pgd10", options.eval.epsilon, domain);
    const AttackConfig pgd40 = named_attack("pgd40", options.eval.epsilon, domain);
    const AttackConfig cw30 = named_attack("cw30", options.eval.epsilon, domain, options.eval.cw_kappa);

    for (Index idx : options.tracked) {
        if (idx < 0 || idx >= data.train.size()) throw ConfigError("run: tracked index out of range");
        result.diversity.push_back({idx, {}, {}});
    }

    double best_valid = -1.0;
    for (int e = 0; e < cfg.epochs; ++e) {
        double eta = 0.0;
        if (adaptive)
            eta = scheduler->current_eta();
        else if (cfg.site != InjectionSite::none)
            eta = cfg.noise.rate;

        std::optional<NoisyView> view;
        if (cfg.site == InjectionSite::noilin) {
            NoiseSpec spec = cfg.noise;
            spec.rate = eta;
            spec.seed = derive_seed(cfg.seed, Stream::flip_epoch);
            view = flip(data.train, spec, e);
        }
        EpochOutcome outcome = train_epoch(model, sgd, data.train, view ? &*view : nullptr, cfg, e, eta);

        EpochRecord rec;
        rec.epoch = e;
        rec.lr = outcome.lr;
        rec.eta = eta;
        rec.train_loss = outcome.train_loss;
        rec.nat_train_acc = accuracy(model, data.train);
        rec.nat_test_acc = accuracy(model, test);
        rec.rob_valid_acc = accuracy(model, data.valid, &valid_attack, named_attack_seed(cfg.seed, "pgd10"));
        rec.rob_test_pgd40 = options.eval.pgd40 ? accuracy(model, test, &pgd40, named_attack_seed(cfg.seed, "pgd40"))
                                                : std::nan("");
        rec.rob_test_cw30 =
            options.eval.cw30 ? accuracy(model, test, &cw30, named_attack_seed(cfg.seed, "cw30")) : std::nan("");
        if (scheduler) {
            double fed = options.validation_feed ? options.validation_feed(e, rec.rob_valid_acc) : rec.rob_valid_acc;
            rec.boosted = scheduler->observe(fed);
        }
        if (rec.rob_valid_acc > best_valid) {
            best_valid = rec.rob_valid_acc;
            result.best_model = model.clone();
            result.best_epoch = e;
        }
        for (auto& trace : result.diversity) {
            auto i = static_cast<std::size_t>(trace.index);
            Rng rng(derive_seed(cfg.seed, Stream::tracked, static_cast<std::uint64_t>(e), i));
            AttackConfig attack = cfg.attack;
            if (attack.objective != AttackObjective::cw) attack.objective = AttackObjective::cross_entropy;
            auto point = diversity_point(model, data.train.features.row(trace.index), outcome.provenance.attack_labels[i],
                                         outcome.provenance.loss_labels[i], attack, rng);
            trace.outer_loss.push_back(point.loss);
            trace.grad_norm.push_back(point.grad_norm);
        }
        if (options.on_epoch) options.on_epoch(rec, outcome);
        result.records.push_back(rec);
    }
    result.final_model = model.clone();

    if (options.output_dir) {
        const auto& dir = *options.output_dir;
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());
        std::ofstream csv(dir / "epochs.csv", std::ios::trunc);
        if (!csv) throw IoError("cannot write " + (dir / "epochs.csv").string());
        csv << kEpochCsvHeader << '\n';
        for (const auto& r : result.records) csv << epoch_csv_row(r) << '\n';
        if (!csv) throw IoError("failed writing " + (dir / "epochs.csv").string());
        CheckpointInfo info{cfg.seed, options.config_hash};
        save_checkpoint(dir / "best.ckpt", result.best_model, info);
        save_checkpoint(dir / "last.ckpt", result.final_model, info);
        if (!result.diversity.empty()) write_diversity_csv(dir / "diversity.csv", result.diversity);
    }
    return result;
}

}  // namespace noilin
