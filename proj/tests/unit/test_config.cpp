#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "noilin/config.hpp"
#include "noilin/errors.hpp"

using namespace noilin;
using nlohmann::json;

namespace {

json minimal() {
    return json::parse(R"({
        "data": {"train": {"kind": "ternary", "n_per_class": 20, "seed": 1},
                 "test": {"kind": "ternary", "n_per_class": 10, "seed": 2},
                 "validation_count": 6}
    })");
}

std::string error_of(const json& doc) {
    try {
        parse_experiment_config(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("minimal config takes the documented defaults") {
    auto cfg = parse_experiment_config(minimal());
    CHECK(cfg.seed == 0);
    CHECK(cfg.train.method == Method::sat);
    CHECK(cfg.train.site == InjectionSite::none);
    CHECK(cfg.train.epochs == 120);
    CHECK(cfg.train.batch_size == 128);
    CHECK(cfg.train.lr.base == 0.1);
    CHECK(cfg.train.lr.schedule == LrSchedule::piecewise);
    CHECK(cfg.train.momentum == 0.9);
    CHECK(cfg.train.weight_decay == 5e-4);
    CHECK(cfg.train.attack.epsilon == 8.0 / 255.0);
    CHECK(cfg.train.attack.alpha == 2.0 / 255.0);
    CHECK(cfg.train.attack.steps == 10);
    CHECK(cfg.noilin.eta_min == 0.05);
    CHECK(cfg.noilin.eta_max == 0.6);
    CHECK(cfg.noilin.tau == 10);
    CHECK(cfg.noilin.gamma == 0.1);
    CHECK(cfg.eval.epsilon == cfg.train.attack.epsilon);
    CHECK(cfg.eval.pgd40);
    CHECK(cfg.eval.cw30);
    CHECK(cfg.hidden == std::vector<int>{64});
    CHECK(cfg.validation_count == 6);
}

TEST_CASE("trades without beta uses 6 and the trades noise defaults") {
    auto doc = minimal();
    doc["train"] = {{"method", "trades"}, {"injection_site", "noilin"}};
    auto cfg = parse_experiment_config(doc);
    CHECK(cfg.train.trades_beta == 6.0);
    CHECK(cfg.noilin.eta_max == 0.4);
    CHECK(cfg.noilin.gamma == 0.05);
    doc["noilin"] = {{"tau", 3}};
    cfg = parse_experiment_config(doc);
    CHECK(cfg.noilin.tau == 3);
    CHECK(cfg.noilin.eta_max == 0.4);
}

TEST_CASE("schema violations name the field path") {
    auto doc = minimal();
    doc["train"] = {{"attack", {{"stepz", 3}}}};
    CHECK(error_of(doc) == "train.attack.stepz: unknown key");
    doc["train"] = {{"attack", {{"steps", "ten"}}}};
    CHECK(error_of(doc) == "train.attack.steps: expected integer, got string");
    doc["train"] = {{"epochs", 2.5}};
    CHECK(error_of(doc) == "train.epochs: expected integer, got number");
    doc["train"] = {{"injection_site", "middle"}};
    CHECK(error_of(doc).rfind("train.injection_site: unknown injection site", 0) == 0);
    doc["train"] = {{"noise", {{"kind", "pair"}, {"rate", 1.5}}}};
    CHECK(error_of(doc).rfind("train:", 0) == 0);
    doc = minimal();
    doc["colour"] = 1;
    CHECK(error_of(doc) == "colour: unknown key");
    doc = minimal();
    doc["data"]["train"]["kind"] = "parquet";
    CHECK(error_of(doc).rfind("data.train.kind: unknown dataset kind", 0) == 0);
    doc = minimal();
    doc["data"].erase("test");
    CHECK(error_of(doc) == "data.test: required field missing");
    doc = minimal();
    doc["evaluation"] = {{"attacks", json::array({"pgd40", "fgsm"})}};
    CHECK(error_of(doc).rfind("evaluation.attacks: unknown per-epoch attack 'fgsm'", 0) == 0);
    doc = minimal();
    doc["noilin"] = {{"eta_min", 0.7}};
    CHECK(error_of(doc).rfind("noilin: ", 0) == 0);
    doc = minimal();
    doc["seed"] = -1;
    CHECK(error_of(doc) == "seed: expected non-negative integer, got integer");
    CHECK(error_of(json::array()) == "<root>: expected object, got array");
}

TEST_CASE("effective config round-trips") {
    auto doc = minimal();
    doc["seed"] = 12;
    doc["train"] = {{"method", "sat"},
                    {"injection_site", "outer"},
                    {"noise", {{"kind", "pair"}, {"rate", 0.2}, {"pair_map", json::array({1, 2, 0})}}},
                    {"label_smoothing", {{"mode", "outer"}, {"rho", 0.2}}},
                    {"lr", {{"schedule", "cosine"}, {"base", 0.03}}}};
    doc["evaluation"] = {{"attacks", json::array({"pgd40"})}, {"test_limit", 5}, {"track_diversity", 3}};
    auto cfg = parse_experiment_config(doc);
    json once = to_json(cfg);
    auto back = parse_experiment_config(once);
    CHECK(to_json(back) == once);
    CHECK(back.train.noise.pair_map == std::vector<int>{1, 2, 0});
    CHECK(back.train.lr.schedule == LrSchedule::cosine);
    CHECK_FALSE(back.eval.cw30);
    CHECK(back.track_diversity == 3);
}

TEST_CASE("dataset specs materialize and split deterministically") {
    auto cfg = parse_experiment_config(minimal());
    auto a = load_experiment_data(cfg);
    auto b = load_experiment_data(cfg);
    CHECK(a.train.size() == 54);
    CHECK(a.valid.size() == 6);
    CHECK(a.test.size() == 30);
    CHECK(a.valid.features == b.valid.features);
    auto doc = minimal();
    doc["data"]["validation_count"] = 60;
    CHECK_THROWS_AS(load_experiment_data(parse_experiment_config(doc)), ConfigError);
}

TEST_CASE("relative dataset paths resolve against the config directory") {
    auto dir = std::filesystem::temp_directory_path() / "noilin_cfg_paths";
    std::filesystem::create_directories(dir / "sub");
    save_csv(dir / "sub" / "d.csv", make_ternary_gaussian(5, default_ternary_centers(), 0.1, 1));
    std::ofstream(dir / "cfg.json") << R"({"data": {"train": {"kind": "csv", "path": "sub/d.csv", "bounds": [-5, 5]},
                                              "test": {"kind": "csv", "path": "sub/d.csv"},
                                              "validation_count": 3}})";
    auto cfg = load_experiment_config(dir / "cfg.json");
    CHECK(cfg.train_data.path == dir / "sub" / "d.csv");
    auto data = load_experiment_data(cfg);
    REQUIRE(data.train.bounds.has_value());
    CHECK(data.train.bounds->hi == 5.0);
}

TEST_CASE("git-style blob hashes") {
    CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}
