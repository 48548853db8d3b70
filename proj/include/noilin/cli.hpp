#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "noilin/config.hpp"
#include "noilin/metrics.hpp"

namespace noilin {

/// Process exit codes.
enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_numeric = 3, exit_io = 4, exit_internal = 1 };

int exit_code_for(const std::exception& e);

struct GenDataOptions {
    int n = 300;  // total rows, a positive multiple of 3
    std::uint64_t seed = 0;
    double sigma = 0.25;
    std::filesystem::path out = "ternary.csv";
};

/// Writes the CSV and a sidecar `<out>.json` holding the ternary dataset spec,
/// which can be used directly as a dataset entry of a training config.
/// Returns the sidecar path.
std::filesystem::path cmd_gen_data(const GenDataOptions& opt);

/// Trains from a config file. The run directory receives config.json (a
/// verbatim copy), epochs.csv, best.ckpt, last.ckpt, metadata.json and, when
/// tracking, diversity.csv. Returns the run directory.
std::filesystem::path cmd_train(const std::filesystem::path& config_path,
                                const std::optional<std::filesystem::path>& output_dir, std::ostream& log);

struct EvalOptions {
    std::filesystem::path checkpoint;
    std::optional<std::filesystem::path> config;  // default: config.json next to the checkpoint
    std::vector<std::string> attacks;
    std::string data = "test";  // train, valid or test
    std::optional<std::filesystem::path> out_dir;  // default: the checkpoint's directory
};

struct EvalReport {
    std::string data;
    Index samples = 0;
    double natural = 0.0;
    std::vector<std::pair<std::string, double>> robust;
    MarginStats margins;
};

/// Natural and per-attack robust accuracy of a checkpoint, with the same
/// attack seeds a training run uses, so the final epochs.csv row is
/// reproduced exactly. Writes eval_accuracy.csv and eval_margins.csv.
EvalReport cmd_eval(const EvalOptions& opt, std::ostream& log);

struct AttackOptions {
    std::filesystem::path checkpoint;
    std::optional<std::filesystem::path> config;
    std::string attack = "pgd40";
    std::string data = "test";
    std::filesystem::path out = "adversarial.csv";
};

/// Dumps adversarial versions of the chosen split as a dataset CSV (true
/// labels kept). Returns the accuracy on the dumped examples.
double cmd_attack(const AttackOptions& opt, std::ostream& log);

/// Parses argv and runs one subcommand; errors become exit codes.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace noilin
