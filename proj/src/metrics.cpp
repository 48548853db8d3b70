#include "noilin/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "noilin/errors.hpp"
#include "noilin/format.hpp"
#include "noilin/losses.hpp"
#include "noilin/parallel.hpp"

namespace noilin {

namespace {

constexpr Index kChunk = 128;

int argmax_row(const Mat& m, Index i) {
    Index best;
    m.row(i).maxCoeff(&best);
    return static_cast<int>(best);
}

}  // namespace

std::vector<int> predict(const MlpClassifier& model, const Mat& x) {
    Mat logits = model.logits(x);
    std::vector<int> out(static_cast<std::size_t>(logits.rows()));
    for (Index i = 0; i < logits.rows(); ++i) out[i] = argmax_row(logits, i);
    return out;
}

double accuracy(const MlpClassifier& model, const LabeledDataset& ds, const AttackConfig* attack, std::uint64_t seed) {
    if (ds.size() == 0) throw ConfigError("accuracy: empty dataset");
    MlpClassifier net = model.frozen();
    const std::size_t chunks = static_cast<std::size_t>((ds.size() + kChunk - 1) / kChunk);
    std::vector<Index> correct(chunks, 0);
    parallel_for(chunks, [&](std::size_t c) {
        Index begin = static_cast<Index>(c) * kChunk;
        Index len = std::min(kChunk, ds.size() - begin);
        Mat x = ds.features.middleRows(begin, len);
        std::span<const int> y(ds.labels.data() + begin, static_cast<std::size_t>(len));
        if (attack) {
            Rng rng(derive_seed(seed, Stream::eval_attack, c));
            x = pgd(net, x, y, *attack, rng);
        }
        auto pred = predict(net, x);
        for (Index i = 0; i < len; ++i) correct[c] += pred[i] == y[i];
    });
    Index total = 0;
    for (Index c : correct) total += c;
    return static_cast<double>(total) / static_cast<double>(ds.size());
}

std::vector<std::string> attack_names() { return {"pgd10", "pgd20", "pgd40", "cw30"}; }

AttackConfig named_attack(const std::string& name, double epsilon, std::optional<DomainBounds> domain, double cw_kappa) {
    if (name == "pgd10") return pgd_preset(epsilon, 10, domain);
    if (name == "pgd20") return pgd_preset(epsilon, 20, domain);
    if (name == "pgd40") return pgd_preset(epsilon, 40, domain);
    if (name == "cw30") return cw_preset(epsilon, 30, domain, cw_kappa);
    std::string valid;
    for (const auto& n : attack_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown attack '" + name + "' (valid: " + valid + ")");
}

std::uint64_t named_attack_seed(std::uint64_t run_seed, const std::string& name) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char ch : name) h = (h ^ ch) * 1099511628211ULL;
    return derive_seed(run_seed, Stream::eval_attack, h);
}

std::vector<double> logit_margins(const Mat& logits, std::span<const int> labels) {
    if (static_cast<Index>(labels.size()) != logits.rows()) throw ShapeError("logit_margins: label count mismatch");
    if (logits.cols() < 2) throw ConfigError("logit_margins: need at least 2 classes");
    std::vector<double> out;
    out.reserve(labels.size());
    for (Index i = 0; i < logits.rows(); ++i) {
        double other = -INFINITY;
        for (Index j = 0; j < logits.cols(); ++j)
            if (j != labels[i]) other = std::max(other, logits(i, j));
        out.push_back(logits(i, labels[i]) - other);
    }
    return out;
}

MarginStats margin_stats(std::span<const double> margins) {
    if (margins.empty()) throw ConfigError("margin_stats: no samples");
    std::vector<double> sorted(margins.begin(), margins.end());
    std::sort(sorted.begin(), sorted.end());
    std::size_t n = sorted.size();
    double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return {median, std::sqrt(variance(margins))};
}

MarginStats logit_margin_stats(const MlpClassifier& model, const LabeledDataset& ds) {
    if (ds.size() == 0) throw ConfigError("logit_margin_stats: empty dataset");
    auto m = logit_margins(model.logits(ds.features), ds.labels);
    return margin_stats(m);
}

std::vector<SimilarityRow> nl_similarity_report(const MlpClassifier& model, const LabeledDataset& ds,
                                                const AttackConfig& attack, std::uint64_t seed, KlDirection direction) {
    if (ds.class_count < 2) throw ConfigError("nl_similarity_report: need at least 2 classes");
    MlpClassifier net = model.frozen();
    Rng label_rng(derive_seed(seed, Stream::similarity));
    std::uniform_int_distribution<int> other(0, ds.class_count - 2);
    std::vector<int> flipped(ds.labels.size());
    for (std::size_t i = 0; i < flipped.size(); ++i) {
        int to = other(label_rng);
        flipped[i] = to >= ds.labels[i] ? to + 1 : to;
    }

    Rng cl_rng(derive_seed(seed, Stream::attack_start, 0));
    Rng nl_rng(derive_seed(seed, Stream::attack_start, 1));
    Mat x_cl = pgd(net, ds.features, ds.labels, attack, cl_rng);
    Mat x_nl = pgd(net, ds.features, flipped, attack, nl_rng);

    Mat f_nat = net.logits(ds.features), f_cl = net.logits(x_cl), f_nl = net.logits(x_nl);
    bool adv_first = direction == KlDirection::adversarial_to_natural;
    Eigen::VectorXd kl_cl = adv_first ? kl_rows(f_cl, f_nat) : kl_rows(f_nat, f_cl);
    Eigen::VectorXd kl_nl = adv_first ? kl_rows(f_nl, f_nat) : kl_rows(f_nat, f_nl);
    Mat ce_nat = cross_entropy_per_sample(Tensor(f_nat), ds.labels).value();
    Mat ce_cl = cross_entropy_per_sample(Tensor(f_cl), ds.labels).value();
    Mat ce_nl = cross_entropy_per_sample(Tensor(f_nl), ds.labels).value();

    std::vector<SimilarityRow> rows;
    for (Index i = 0; i < ds.size(); ++i) {
        rows.push_back({i, ds.labels[i], flipped[i], std::max(0.0, kl_nl(i)), std::max(0.0, kl_cl(i)), ce_nat(i, 0),
                        ce_cl(i, 0), ce_nl(i, 0)});
    }
    return rows;
}

void write_similarity_csv(const std::filesystem::path& path, std::span<const SimilarityRow> rows) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << "index,true_label,flipped_label,kl_nl,kl_cl,ce_natural,ce_cl,ce_nl\n";
    for (const auto& r : rows)
        os << r.index << ',' << r.true_label << ',' << r.flipped_label << ',' << format_double(r.kl_nl) << ','
           << format_double(r.kl_cl) << ',' << format_double(r.ce_natural) << ',' << format_double(r.ce_cl) << ','
           << format_double(r.ce_nl) << '\n';
    if (!os) throw IoError("failed writing " + path.string());
}

DiversityPoint diversity_point(const MlpClassifier& model, const Mat& x, int attack_label, int loss_label,
                               const AttackConfig& attack, Rng& rng) {
    if (x.rows() != 1) throw ShapeError("diversity_point: expects a single example");
    int a = attack_label, l = loss_label;
    Mat x_adv = pgd(model, x, std::span<const int>(&a, 1), attack, rng);

    MlpClassifier net = model.clone();
    net.set_trainable(true);
    Tape tape;
    Tensor loss = cross_entropy(net.forward(Tensor(x_adv)), std::span<const int>(&l, 1));
    tape.backward(loss);
    double sq = 0.0;
    for (const auto& p : net.parameters())
        if (p.has_grad()) sq += p.grad().squaredNorm();
    return {loss.item(), std::sqrt(sq)};
}

void write_diversity_csv(const std::filesystem::path& path, std::span<const DiversityTrace> traces) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << "index,epoch,outer_loss,grad_norm\n";
    for (const auto& t : traces)
        for (std::size_t e = 0; e < t.outer_loss.size(); ++e)
            os << t.index << ',' << e << ',' << format_double(t.outer_loss[e]) << ',' << format_double(t.grad_norm[e])
               << '\n';
    if (!os) throw IoError("failed writing " + path.string());
}

double variance(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(values.size());
}

}  // namespace noilin
