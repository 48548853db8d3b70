#include "noilin/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "noilin/errors.hpp"
#include "noilin/format.hpp"
#include "noilin/rng.hpp"

namespace noilin {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ShapeError*>(&e)) return exit_config;
    if (dynamic_cast<const NumericError*>(&e)) return exit_numeric;
    if (dynamic_cast<const IoError*>(&e)) return exit_io;
    if (dynamic_cast<const std::ios_base::failure*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e))
        return exit_io;
    return exit_internal;
}

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << text;
    if (!os) throw IoError("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// Config for a checkpoint: either given, or the copy stored in the run
// directory, whose relative paths resolve against the original location.
ExperimentConfig config_for(const fs::path& checkpoint, const std::optional<fs::path>& config) {
    if (config) return load_experiment_config(*config);
    fs::path dir = checkpoint.parent_path();
    fs::path copy = dir / "config.json";
    fs::path base = dir;
    if (fs::exists(dir / "metadata.json")) {
        json meta = json::parse(read_file(dir / "metadata.json"), nullptr, false);
        if (meta.is_object() && meta.contains("config_base_dir") && meta["config_base_dir"].is_string())
            base = meta["config_base_dir"].get<std::string>();
    }
    json doc = json::parse(read_file(copy), nullptr, false);
    if (doc.is_discarded()) throw ConfigError(copy.string() + ": invalid JSON");
    return parse_experiment_config(doc, base);
}

const LabeledDataset& pick_split(const ExperimentData& data, const LabeledDataset& test_subset, const std::string& name) {
    if (name == "train") return data.train;
    if (name == "valid") return data.valid;
    if (name == "test") return test_subset;
    throw ConfigError("unknown data split '" + name + "' (valid: train, valid, test)");
}

void check_fits(const MlpClassifier& model, const LabeledDataset& ds) {
    if (model.input_dim() != ds.dim() || model.num_classes() != ds.class_count)
        throw ShapeError("checkpoint expects " + std::to_string(model.input_dim()) + " features and " +
                         std::to_string(model.num_classes()) + " classes; data has " + std::to_string(ds.dim()) +
                         " and " + std::to_string(ds.class_count));
}

std::vector<Index> tracked_rows(Index n, int count) {
    std::vector<Index> rows;
    for (int k = 0; k < count && k < n; ++k) rows.push_back(static_cast<Index>(k) * n / std::min<Index>(count, n));
    return rows;
}

}  // namespace

fs::path cmd_gen_data(const GenDataOptions& opt) {
    if (opt.n <= 0 || opt.n % 3 != 0) throw ConfigError("gen-data: --n must be a positive multiple of 3");
    if (!(opt.sigma >= 0.0)) throw ConfigError("gen-data: --sigma must be >= 0");
    DatasetSpec spec;
    spec.kind = DatasetSpec::Kind::ternary;
    spec.n_per_class = opt.n / 3;
    spec.sigma = opt.sigma;
    spec.seed = opt.seed;
    if (opt.out.has_parent_path()) ensure_dir(opt.out.parent_path());
    save_csv(opt.out, materialize(spec));
    fs::path sidecar = opt.out;
    sidecar += ".json";
    write_file(sidecar, spec.to_json().dump(2) + "\n");
    return sidecar;
}

fs::path cmd_train(const fs::path& config_path, const std::optional<fs::path>& output_dir, std::ostream& log) {
    const std::string text = read_file(config_path);
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ConfigError(config_path.string() + ": invalid JSON");
    const fs::path base = fs::absolute(config_path).parent_path();
    ExperimentConfig cfg = parse_experiment_config(doc, base);
    const fs::path dir = output_dir ? *output_dir : cfg.output_dir;
    ensure_dir(dir);

    ExperimentData data = load_experiment_data(cfg);
    const std::string hash = git_blob_sha1(text);
    write_file(dir / "config.json", text);

    RunOptions opt;
    opt.hidden = cfg.hidden;
    opt.noilin = cfg.noilin;
    opt.eval = cfg.eval;
    opt.output_dir = dir;
    opt.config_hash = hash;
    opt.tracked = tracked_rows(data.train.size(), cfg.track_diversity);
    opt.on_epoch = [&](const EpochRecord& r, const EpochOutcome&) {
        log << "epoch " << r.epoch << "  lr " << format_double(r.lr) << "  eta " << format_double(r.eta) << "  loss "
            << format_double(r.train_loss) << "  nat_test " << format_double(r.nat_test_acc) << "  rob_valid "
            << format_double(r.rob_valid_acc) << "  pgd40 " << format_double(r.rob_test_pgd40) << "  cw30 "
            << format_double(r.rob_test_cw30) << (r.boosted ? "  boosted" : "") << '\n';
    };
    RunResult result = run(cfg.train, RunData{data.train, data.valid, data.test}, opt);

    json meta = {
        {"config_hash", hash},
        {"config_base_dir", base.string()},
        {"seeds",
         {{"run", cfg.seed},
          {"init", derive_seed(cfg.seed, Stream::init)},
          {"split", derive_seed(cfg.seed, Stream::split)},
          {"epoch_flips", derive_seed(cfg.seed, Stream::flip_epoch)},
          {"pgd10", named_attack_seed(cfg.seed, "pgd10")},
          {"pgd40", named_attack_seed(cfg.seed, "pgd40")},
          {"cw30", named_attack_seed(cfg.seed, "cw30")}}},
        {"effective_config", to_json(cfg)},
        {"decisions",
         {{"training_attack_domain", data.train.bounds ? json{data.train.bounds->lo, data.train.bounds->hi} : json()},
          {"training_attack_random_start", cfg.train.attack.random_start},
          {"weight_decay_scope", "all parameters, biases included"},
          {"best_checkpoint_metric", "rob_valid_acc (pgd10)"},
          {"adaptive_noise", cfg.train.site == InjectionSite::noilin || cfg.train.smoothing == SmoothingMode::adaptive},
          {"train_rows", data.train.size()},
          {"valid_rows", data.valid.size()},
          {"test_rows", evaluation_subset(data.test, cfg.eval.test_limit).size()},
          {"tracked_rows", opt.tracked}}},
        {"best_epoch", result.best_epoch},
        {"epochs", cfg.train.epochs},
    };
    write_file(dir / "metadata.json", meta.dump(2) + "\n");
    log << "best epoch " << result.best_epoch << ", run written to " << dir.string() << '\n';
    return dir;
}

EvalReport cmd_eval(const EvalOptions& opt, std::ostream& log) {
    for (const auto& name : opt.attacks) named_attack(name, 0.0, std::nullopt);  // reject unknown names early
    CheckpointInfo info;
    MlpClassifier model = load_checkpoint(opt.checkpoint, &info);
    ExperimentConfig cfg = config_for(opt.checkpoint, opt.config);
    ExperimentData data = load_experiment_data(cfg);
    LabeledDataset test = evaluation_subset(data.test, cfg.eval.test_limit);
    const LabeledDataset& ds = pick_split(data, test, opt.data);
    check_fits(model, ds);

    EvalReport rep;
    rep.data = opt.data;
    rep.samples = ds.size();
    rep.natural = accuracy(model, ds);
    for (const auto& name : opt.attacks) {
        AttackConfig a = named_attack(name, cfg.eval.epsilon, data.train.bounds, cfg.eval.cw_kappa);
        rep.robust.emplace_back(name, accuracy(model, ds, &a, named_attack_seed(info.seed, name)));
    }
    rep.margins = logit_margin_stats(model, ds);

    fs::path dir = opt.out_dir ? *opt.out_dir : opt.checkpoint.parent_path();
    if (dir.empty()) dir = ".";
    ensure_dir(dir);
    std::string header = "data,samples,natural", row = rep.data + "," + std::to_string(rep.samples) + "," +
                                                         format_double(rep.natural);
    for (const auto& [name, acc] : rep.robust) {
        header += "," + name;
        row += "," + format_double(acc);
    }
    write_file(dir / "eval_accuracy.csv", header + "\n" + row + "\n");
    write_file(dir / "eval_margins.csv", "data,samples,median,stddev\n" + rep.data + "," + std::to_string(rep.samples) +
                                             "," + format_double(rep.margins.median) + "," +
                                             format_double(rep.margins.stddev) + "\n");

    log << "data " << rep.data << " (" << rep.samples << " samples)\n";
    log << "natural " << format_double(rep.natural) << '\n';
    for (const auto& [name, acc] : rep.robust) log << name << ' ' << format_double(acc) << '\n';
    log << "margin median " << format_double(rep.margins.median) << " stddev " << format_double(rep.margins.stddev)
        << '\n';
    return rep;
}

double cmd_attack(const AttackOptions& opt, std::ostream& log) {
    named_attack(opt.attack, 0.0, std::nullopt);
    CheckpointInfo info;
    MlpClassifier model = load_checkpoint(opt.checkpoint, &info);
    ExperimentConfig cfg = config_for(opt.checkpoint, opt.config);
    ExperimentData data = load_experiment_data(cfg);
    LabeledDataset test = evaluation_subset(data.test, cfg.eval.test_limit);
    const LabeledDataset& ds = pick_split(data, test, opt.data);
    check_fits(model, ds);

    AttackConfig a = named_attack(opt.attack, cfg.eval.epsilon, data.train.bounds, cfg.eval.cw_kappa);
    Rng rng(derive_seed(named_attack_seed(info.seed, opt.attack), Stream::attack_start));
    LabeledDataset adv = ds;
    adv.features = pgd(model, ds.features, ds.labels, a, rng);
    if (opt.out.has_parent_path()) ensure_dir(opt.out.parent_path());
    save_csv(opt.out, adv);
    double acc = accuracy(model, adv);
    log << "wrote " << adv.size() << " adversarial examples to " << opt.out.string() << "; accuracy on them "
        << format_double(acc) << '\n';
    return acc;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Adversarial training with adaptive label-noise injection"};
    app.require_subcommand(1);

    GenDataOptions gen;
    bool ternary = false;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset as CSV plus a JSON spec sidecar");
    gen_cmd->add_flag("--ternary", ternary, "Three-class 2-D Gaussian task")->required();
    gen_cmd->add_option("--n", gen.n, "Total number of rows (multiple of 3)")->required();
    gen_cmd->add_option("--seed", gen.seed, "Generator seed");
    gen_cmd->add_option("--sigma", gen.sigma, "Per-class standard deviation");
    gen_cmd->add_option("--out", gen.out, "Output CSV path");

    fs::path train_config;
    std::optional<fs::path> train_out;
    auto* train_cmd = app.add_subcommand("train", "Run adversarial training from a JSON config");
    train_cmd->add_option("config", train_config, "Config file")->required();
    train_cmd->add_option("--output-dir", train_out, "Overrides the config's output_dir");

    EvalOptions ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
    eval_cmd->add_option("--config", ev.config, "Config (default: config.json beside the checkpoint)");
    eval_cmd->add_option("--attack", ev.attacks, "pgd10, pgd20, pgd40 or cw30; repeatable");
    eval_cmd->add_option("--data", ev.data, "train, valid or test");
    eval_cmd->add_option("--out-dir", ev.out_dir, "Where eval_*.csv go (default: the checkpoint's directory)");

    AttackOptions at;
    auto* attack_cmd = app.add_subcommand("attack", "Dump adversarial examples for a checkpoint");
    attack_cmd->add_option("--checkpoint", at.checkpoint, "Checkpoint file")->required();
    attack_cmd->add_option("--config", at.config, "Config (default: config.json beside the checkpoint)");
    attack_cmd->add_option("--attack", at.attack, "pgd10, pgd20, pgd40 or cw30");
    attack_cmd->add_option("--data", at.data, "train, valid or test");
    attack_cmd->add_option("--out", at.out, "Output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_config;
    }

    try {
        if (gen_cmd->parsed()) {
            fs::path sidecar = cmd_gen_data(gen);
            out << "wrote " << gen.out.string() << " and " << sidecar.string() << '\n';
        } else if (train_cmd->parsed()) {
            cmd_train(train_config, train_out, out);
        } else if (eval_cmd->parsed()) {
            cmd_eval(ev, out);
        } else if (attack_cmd->parsed()) {
            cmd_attack(at, out);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return exit_ok;
}

}  // namespace noilin
