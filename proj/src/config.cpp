#include "noilin/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "noilin/errors.hpp"
#include "noilin/metrics.hpp"
#include "noilin/rng.hpp"

namespace noilin {

using nlohmann::json;

namespace {

std::string type_name(const json& j) {
    if (j.is_number_integer()) return "integer";
    return j.type_name();
}

// Reads fields of one JSON object, remembering which keys were consumed so
// that leftovers can be reported as unknown.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected object, got " + type_name(j_));
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    std::string field(const std::string& key) const {
        if (key.empty()) return path_;
        return path_.empty() ? key : path_ + "." + key;
    }

    const json* child(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    double number(const std::string& key, double fallback) {
        const json* v = child(key);
        if (!v) return fallback;
        if (!v->is_number()) fail(field(key), "expected number, got " + type_name(*v));
        return v->get<double>();
    }

    long long integer(const std::string& key, long long fallback) {
        const json* v = child(key);
        if (!v) return fallback;
        if (!v->is_number_integer()) fail(field(key), "expected integer, got " + type_name(*v));
        return v->get<long long>();
    }

    std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
        const json* v = child(key);
        if (!v) return fallback;
        if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<long long>() < 0))
            fail(field(key), "expected non-negative integer, got " + type_name(*v));
        return v->get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool fallback) {
        const json* v = child(key);
        if (!v) return fallback;
        if (!v->is_boolean()) fail(field(key), "expected boolean, got " + type_name(*v));
        return v->get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        const json* v = child(key);
        if (!v) return fallback;
        if (!v->is_string()) fail(field(key), "expected string, got " + type_name(*v));
        return v->get<std::string>();
    }

    std::string required_string(const std::string& key) {
        if (!has(key)) fail(field(key), "required field missing");
        return string(key, "");
    }

    std::vector<int> int_list(const std::string& key, std::vector<int> fallback) {
        const json* v = child(key);
        if (!v) return fallback;
        if (!v->is_array()) fail(field(key), "expected array, got " + type_name(*v));
        std::vector<int> out;
        for (std::size_t i = 0; i < v->size(); ++i) {
            const json& e = (*v)[i];
            if (!e.is_number_integer())
                fail(field(key) + "[" + std::to_string(i) + "]", "expected integer, got " + type_name(e));
            out.push_back(e.get<int>());
        }
        return out;
    }

    std::vector<std::string> string_list(const std::string& key, std::vector<std::string> fallback) {
        const json* v = child(key);
        if (!v) return fallback;
        if (!v->is_array()) fail(field(key), "expected array, got " + type_name(*v));
        std::vector<std::string> out;
        for (std::size_t i = 0; i < v->size(); ++i) {
            const json& e = (*v)[i];
            if (!e.is_string()) fail(field(key) + "[" + std::to_string(i) + "]", "expected string, got " + type_name(e));
            out.push_back(e.get<std::string>());
        }
        return out;
    }

    // Runs fn and prefixes any ConfigError it throws with the field path.
    template <class Fn>
    auto checked(const std::string& key, Fn&& fn) -> decltype(fn()) {
        try {
            return fn();
        } catch (const ConfigError& e) {
            std::string msg = e.what();
            if (msg.rfind(field(key) + ":", 0) == 0) throw;
            throw ConfigError(field(key) + ": " + msg);
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) fail(field(it.key()), "unknown key");
    }

    [[noreturn]] static void fail(const std::string& field, const std::string& what) {
        throw ConfigError(field + ": " + what);
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
}

NoiseSpec parse_noise(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    NoiseSpec spec;
    std::string kind = r.string("kind", "symmetric");
    if (kind == "symmetric")
        spec.kind = NoiseKind::symmetric;
    else if (kind == "pair")
        spec.kind = NoiseKind::pair;
    else
        ObjectReader::fail(r.field("kind"), "unknown noise kind '" + kind + "' (valid: symmetric, pair)");
    spec.rate = r.number("rate", 0.0);
    spec.pair_map = r.int_list("pair_map", {});
    r.finish();
    return spec;
}

AttackConfig parse_attack(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    AttackConfig a;
    a.epsilon = r.number("epsilon", a.epsilon);
    a.alpha = r.number("alpha", a.alpha);
    a.steps = static_cast<int>(r.integer("steps", a.steps));
    std::string obj = r.string("objective", to_string(a.objective));
    a.objective = r.checked("objective", [&] { return parse_attack_objective(obj); });
    a.kappa = r.number("kappa", a.kappa);
    a.random_start = r.boolean("random_start", a.random_start);
    r.finish();
    r.checked("", [&] { a.validate(); });
    return a;
}

}  // namespace

json DatasetSpec::to_json() const {
    switch (kind) {
        case Kind::ternary: {
            json c = json::array();
            for (const auto& v : centers) c.push_back({v.x(), v.y()});
            return {{"kind", "ternary"}, {"n_per_class", n_per_class}, {"centers", c}, {"sigma", sigma}, {"seed", seed}};
        }
        case Kind::csv: {
            json j = {{"kind", "csv"}, {"path", path.string()}};
            if (class_count) j["class_count"] = *class_count;
            if (bounds) j["bounds"] = {bounds->lo, bounds->hi};
            return j;
        }
        case Kind::idx: return {{"kind", "idx"}, {"images", images.string()}, {"labels", labels.string()}};
    }
    return {};
}

DatasetSpec parse_dataset_spec(const json& j, const std::string& path, const std::filesystem::path& base_dir) {
    if (j.is_string()) {
        // a path to a JSON spec file, e.g. the sidecar written by gen-data
        auto file = resolve(base_dir, j.get<std::string>());
        return parse_dataset_spec(read_json_file(file), path, file.parent_path());
    }
    ObjectReader r(j, path);
    DatasetSpec spec;
    std::string kind = r.required_string("kind");
    if (kind == "ternary") {
        spec.kind = DatasetSpec::Kind::ternary;
        spec.n_per_class = static_cast<int>(r.integer("n_per_class", spec.n_per_class));
        if (spec.n_per_class < 1) ObjectReader::fail(r.field("n_per_class"), "must be >= 1");
        if (const json* c = r.child("centers")) {
            if (!c->is_array() || c->size() != 3) ObjectReader::fail(r.field("centers"), "expected 3 points");
            for (std::size_t k = 0; k < 3; ++k) {
                const json& p = (*c)[k];
                if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
                    ObjectReader::fail(r.field("centers") + "[" + std::to_string(k) + "]", "expected [x, y]");
                spec.centers[k] = {p[0].get<double>(), p[1].get<double>()};
            }
        }
        spec.sigma = r.number("sigma", spec.sigma);
        if (!(spec.sigma >= 0.0)) ObjectReader::fail(r.field("sigma"), "must be >= 0");
        spec.seed = r.seed("seed", 0);
    } else if (kind == "csv") {
        spec.kind = DatasetSpec::Kind::csv;
        spec.path = resolve(base_dir, r.required_string("path"));
        if (r.has("class_count")) {
            spec.class_count = static_cast<int>(r.integer("class_count", 0));
            if (*spec.class_count < 1) ObjectReader::fail(r.field("class_count"), "must be >= 1");
        }
        if (const json* b = r.child("bounds")) {
            if (!b->is_array() || b->size() != 2 || !(*b)[0].is_number() || !(*b)[1].is_number())
                ObjectReader::fail(r.field("bounds"), "expected [lo, hi]");
            spec.bounds = DomainBounds{(*b)[0].get<double>(), (*b)[1].get<double>()};
            if (!(spec.bounds->lo < spec.bounds->hi)) ObjectReader::fail(r.field("bounds"), "lo must be < hi");
        }
    } else if (kind == "idx") {
        spec.kind = DatasetSpec::Kind::idx;
        spec.images = resolve(base_dir, r.required_string("images"));
        spec.labels = resolve(base_dir, r.required_string("labels"));
    } else {
        ObjectReader::fail(r.field("kind"), "unknown dataset kind '" + kind + "' (valid: ternary, csv, idx)");
    }
    r.finish();
    return spec;
}

LabeledDataset materialize(const DatasetSpec& spec) {
    switch (spec.kind) {
        case DatasetSpec::Kind::ternary:
            return make_ternary_gaussian(spec.n_per_class, spec.centers, spec.sigma, spec.seed);
        case DatasetSpec::Kind::csv: {
            LabeledDataset ds = load_csv(spec.path, spec.class_count);
            ds.bounds = spec.bounds;
            return ds;
        }
        case DatasetSpec::Kind::idx: return load_idx_pair(spec.images, spec.labels);
    }
    throw ConfigError("unknown dataset kind");
}

ExperimentConfig parse_experiment_config(const json& doc, const std::filesystem::path& base_dir) {
    ExperimentConfig cfg;
    cfg.raw = doc;
    ObjectReader root(doc, "");
    cfg.seed = root.seed("seed", 0);
    cfg.output_dir = root.string("output_dir", cfg.output_dir.string());

    {
        const json* d = root.child("data");
        if (!d) ObjectReader::fail("data", "required field missing");
        ObjectReader r(*d, "data");
        const json* tr = r.child("train");
        const json* te = r.child("test");
        if (!tr) ObjectReader::fail("data.train", "required field missing");
        if (!te) ObjectReader::fail("data.test", "required field missing");
        cfg.train_data = parse_dataset_spec(*tr, "data.train", base_dir);
        cfg.test_data = parse_dataset_spec(*te, "data.test", base_dir);
        cfg.validation_count = r.integer("validation_count", cfg.validation_count);
        if (cfg.validation_count < 1) ObjectReader::fail("data.validation_count", "must be >= 1");
        r.finish();
    }

    if (const json* m = root.child("model")) {
        ObjectReader r(*m, "model");
        cfg.hidden = r.int_list("hidden", cfg.hidden);
        for (int h : cfg.hidden)
            if (h < 1) ObjectReader::fail("model.hidden", "layer widths must be >= 1");
        r.finish();
    }

    TrainConfig& t = cfg.train;
    t.seed = cfg.seed;
    if (const json* tj = root.child("train")) {
        ObjectReader r(*tj, "train");
        std::string method = r.string("method", to_string(t.method));
        t.method = r.checked("method", [&] { return parse_method(method); });
        std::string site = r.string("injection_site", to_string(t.site));
        t.site = r.checked("injection_site", [&] { return parse_injection_site(site); });
        if (const json* n = r.child("noise")) t.noise = parse_noise(*n, "train.noise");
        t.epochs = static_cast<int>(r.integer("epochs", t.epochs));
        t.batch_size = static_cast<int>(r.integer("batch_size", t.batch_size));
        if (const json* lr = r.child("lr")) {
            ObjectReader lr_r(*lr, "train.lr");
            std::string sch = lr_r.string("schedule", to_string(t.lr.schedule));
            t.lr.schedule = lr_r.checked("schedule", [&] { return parse_lr_schedule(sch); });
            t.lr.base = lr_r.number("base", t.lr.base);
            lr_r.finish();
        }
        t.momentum = r.number("momentum", t.momentum);
        t.weight_decay = r.number("weight_decay", t.weight_decay);
        if (const json* a = r.child("attack")) t.attack = parse_attack(*a, "train.attack");
        t.trades_beta = r.number("trades_beta", t.trades_beta);
        if (const json* s = r.child("label_smoothing")) {
            ObjectReader s_r(*s, "train.label_smoothing");
            std::string mode = s_r.string("mode", to_string(t.smoothing));
            t.smoothing = s_r.checked("mode", [&] { return parse_smoothing_mode(mode); });
            t.smoothing_rho = s_r.number("rho", t.smoothing_rho);
            s_r.finish();
        }
        r.finish();
    }
    ObjectReader(json::object(), "train").checked("", [&] { t.validate(); });

    cfg.noilin = t.method == Method::trades ? NoilinParams::trades_defaults() : NoilinParams::sat_defaults();
    if (const json* nj = root.child("noilin")) {
        ObjectReader r(*nj, "noilin");
        cfg.noilin.eta_min = r.number("eta_min", cfg.noilin.eta_min);
        cfg.noilin.eta_max = r.number("eta_max", cfg.noilin.eta_max);
        cfg.noilin.tau = static_cast<int>(r.integer("tau", cfg.noilin.tau));
        cfg.noilin.gamma = r.number("gamma", cfg.noilin.gamma);
        r.finish();
        r.checked("", [&] { cfg.noilin.validate(); });
    }

    if (const json* ej = root.child("evaluation")) {
        ObjectReader r(*ej, "evaluation");
        cfg.eval.epsilon = r.number("epsilon", t.attack.epsilon);
        if (!(cfg.eval.epsilon >= 0.0)) ObjectReader::fail("evaluation.epsilon", "must be >= 0");
        cfg.eval.cw_kappa = r.number("cw_kappa", cfg.eval.cw_kappa);
        if (!(cfg.eval.cw_kappa >= 0.0)) ObjectReader::fail("evaluation.cw_kappa", "must be >= 0");
        cfg.eval_attacks = r.string_list("attacks", cfg.eval_attacks);
        for (const auto& name : cfg.eval_attacks)
            if (name != "pgd40" && name != "cw30")
                ObjectReader::fail("evaluation.attacks",
                                   "unknown per-epoch attack '" + name + "' (valid: pgd40, cw30)");
        cfg.eval.test_limit = r.integer("test_limit", 0);
        if (cfg.eval.test_limit < 0) ObjectReader::fail("evaluation.test_limit", "must be >= 0");
        cfg.track_diversity = static_cast<int>(r.integer("track_diversity", 0));
        if (cfg.track_diversity < 0) ObjectReader::fail("evaluation.track_diversity", "must be >= 0");
        r.finish();
    } else {
        cfg.eval.epsilon = t.attack.epsilon;
    }
    auto wants = [&](const char* n) {
        return std::find(cfg.eval_attacks.begin(), cfg.eval_attacks.end(), n) != cfg.eval_attacks.end();
    };
    cfg.eval.pgd40 = wants("pgd40");
    cfg.eval.cw30 = wants("cw30");

    root.finish();
    return cfg;
}

json to_json(const ExperimentConfig& cfg) {
    const TrainConfig& t = cfg.train;
    json noise = {{"kind", t.noise.kind == NoiseKind::pair ? "pair" : "symmetric"}, {"rate", t.noise.rate}};
    if (!t.noise.pair_map.empty()) noise["pair_map"] = t.noise.pair_map;
    return {
        {"seed", cfg.seed},
        {"output_dir", cfg.output_dir.string()},
        {"data",
         {{"train", cfg.train_data.to_json()},
          {"test", cfg.test_data.to_json()},
          {"validation_count", cfg.validation_count}}},
        {"model", {{"hidden", cfg.hidden}}},
        {"train",
         {{"method", to_string(t.method)},
          {"injection_site", to_string(t.site)},
          {"noise", noise},
          {"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"lr", {{"schedule", to_string(t.lr.schedule)}, {"base", t.lr.base}}},
          {"momentum", t.momentum},
          {"weight_decay", t.weight_decay},
          {"attack",
           {{"epsilon", t.attack.epsilon},
            {"alpha", t.attack.alpha},
            {"steps", t.attack.steps},
            {"objective", to_string(t.attack.objective)},
            {"kappa", t.attack.kappa},
            {"random_start", t.attack.random_start}}},
          {"trades_beta", t.trades_beta},
          {"label_smoothing", {{"mode", to_string(t.smoothing)}, {"rho", t.smoothing_rho}}}}},
        {"noilin",
         {{"eta_min", cfg.noilin.eta_min},
          {"eta_max", cfg.noilin.eta_max},
          {"tau", cfg.noilin.tau},
          {"gamma", cfg.noilin.gamma}}},
        {"evaluation",
         {{"epsilon", cfg.eval.epsilon},
          {"cw_kappa", cfg.eval.cw_kappa},
          {"attacks", cfg.eval_attacks},
          {"test_limit", cfg.eval.test_limit},
          {"track_diversity", cfg.track_diversity}}},
    };
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return parse_experiment_config(read_json_file(path), path.parent_path());
}

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
    LabeledDataset pool = materialize(cfg.train_data);
    LabeledDataset test = materialize(cfg.test_data);
    pool.validate();
    test.validate();
    // a class missing from one file must not shrink the label space
    int classes = std::max(pool.class_count, test.class_count);
    pool.class_count = test.class_count = classes;
    if (pool.dim() != test.dim())
        throw ConfigError("data: train has " + std::to_string(pool.dim()) + " features, test has " +
                          std::to_string(test.dim()));
    DatasetSplit parts = split(pool, SplitSpec{cfg.validation_count, derive_seed(cfg.seed, Stream::split)});
    return {std::move(parts.train), std::move(parts.valid), std::move(test)};
}

std::string git_blob_sha1(const std::string& content) {
    std::string blob = "blob " + std::to_string(content.size());
    blob.push_back('\0');
    blob += content;
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1)
        throw Error("sha1 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 15]);
    }
    return out;
}

}  // namespace noilin
