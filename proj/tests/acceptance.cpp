// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed here.
//
// The desk-scale sweep (criteria 5, 7, 8 and the trained half of 3) trains
// five mnist3x34 networks and takes roughly 40 minutes on one core. Set
// NORMLAB_ACCEPTANCE_RESUME=1 to reuse finished sweep points from an earlier run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "gradcheck.hpp"
#include "helpers.hpp"
#include "oracles.hpp"
#include "normlab/analysis/bounds.hpp"
#include "normlab/analysis/linear_demo.hpp"
#include "normlab/analysis/statistics.hpp"
#include "normlab/data/labels.hpp"
#include "normlab/nn/architectures.hpp"
#include "normlab/nn/init.hpp"
#include "normlab/normalize.hpp"
#include "normlab/protocols/experiment.hpp"
#include "normlab/results.hpp"

using namespace normlab;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kGradTol = 1e-4;
constexpr std::size_t kGradInstances = 20;
constexpr double kHomogeneityTol = 1e-5;
constexpr std::size_t kHomogeneityInputs = 1000;
constexpr double kAbsorbTol = 1e-5;
constexpr std::size_t kAbsorbInputs = 100;
constexpr double kChanceLossTol = 1e-9;
constexpr double kRlErrorTol = 0.03;
constexpr double kRlNormLossTol = 0.2;
constexpr double kFitTol = 1e-10;
constexpr std::size_t kFitSets = 100;
constexpr double kMinR2 = 0.98;
constexpr double kSlopeLo = 0.8, kSlopeHi = 1.2;
constexpr std::size_t kMinStdValues = 4;
constexpr double kSweepBudgetSeconds = 2 * 3600;
constexpr double kMinSpearman = 0.5;
constexpr double kRademacherSe = 3.0;
constexpr double kMinNormTol = 1e-6;
constexpr double kOrthogonalTol = 1e-10;
constexpr std::size_t kMinNormSystems = 20;
constexpr double kPsiTol = 1e-12;
constexpr std::size_t kPsiGrid = 1001;
constexpr std::size_t kCorruptionPairs = 1000;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::map<int, Outcome> outcomes;
std::map<int, std::string> titles = {
    {1, "architecture arithmetic"},   {2, "gradient correctness"},     {3, "normalization exactness"},
    {4, "BN absorption equivalence"}, {5, "chance-loss anchors"},      {6, "fit-statistics oracle"},
    {7, "desk-scale linearity"},      {8, "capacity correlation"},     {9, "Rademacher estimate"},
    {10, "min-norm GD"},              {11, "psi-transform"},           {12, "corruption procedure"}};

void record(int id, bool pass, const std::string& detail) {
    outcomes[id] = {pass, detail};
    std::cerr << "  criterion " << id << (pass ? " passed" : " FAILED") << ": " << detail << std::endl;
}

void guarded(int id, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        record(id, false, std::string("exception: ") + e.what());
    }
}

std::string fmt(double v, int prec = 6) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

void criterion1() {
    const auto c = nn::param_count(nn::build_architecture<float>("cifar3x24", 10));
    const auto m = nn::param_count(nn::build_architecture<float>("mnist3x34", 10));
    record(1, c == 154464 && m == 165784,
           "param_count cifar3x24=" + std::to_string(c) + " (want 154464), mnist3x34=" + std::to_string(m) +
               " (want 165784)");
}

void criterion2() {
    double worst = 0;
    std::string where;
    std::size_t runs = 0;
    for (std::string kind : {"dense", "relu", "conv", "batchnorm"})
        for (std::uint64_t s = 1; s <= kGradInstances; ++s) {
            const auto r = testing_util::gradcheck_instance(kind, nn::Mode::train, 1000 * s + kind.size());
            ++runs;
            if (r.worst > worst) {
                worst = r.worst;
                where = kind + " seed " + std::to_string(s);
            }
        }
    for (std::uint64_t s = 1; s <= kGradInstances; ++s) {
        const auto r = testing_util::gradcheck_instance("batchnorm", nn::Mode::eval, 7000 + s);
        ++runs;
        if (r.worst > worst) {
            worst = r.worst;
            where = "batchnorm(eval) seed " + std::to_string(s);
        }
    }
    record(2, worst < kGradTol,
           std::to_string(runs) + " float64 instances over dense/relu/conv/batchnorm; worst relative error " +
               fmt(worst, 3) + " (" + where + "), tolerance " + fmt(kGradTol));
}

struct HomogeneityResult {
    double deviation = 0;
    bool argmax_same = true;
    std::size_t ties = 0;
};

HomogeneityResult homogeneity(const nn::Network<float>& net, const Tensor<float>& inputs) {
    const auto plain = net.has_batchnorm() ? absorb_batchnorm(net) : net;
    const auto nz = normalize_layerwise(plain);
    const auto a = nn::forward(nz.network, inputs, nn::Mode::eval);
    const auto b = nn::forward(plain, inputs, nn::Mode::eval);
    HomogeneityResult r;
    r.deviation = relative_deviation(a, b, nz.product_norm);
    const std::size_t k = a.dim(1);
    for (std::size_t i = 0; i < a.dim(0); ++i) {
        if (nn::has_tied_max(b.data() + i * k, k)) {
            ++r.ties;
            continue;
        }
        if (nn::argmax(a.data() + i * k, k) != nn::argmax(b.data() + i * k, k)) r.argmax_same = false;
    }
    return r;
}

Tensor<float> first_rows(const data::Dataset& ds, std::size_t n) {
    std::vector<std::size_t> idx(std::min(n, ds.size()));
    std::iota(idx.begin(), idx.end(), 0);
    return ds.gather<float>(idx);
}

/// Gives a conv5 network realistic batch-norm statistics: random weights and
/// affine parameters, then a few train-mode passes to fill the running stats.
nn::Network<float> conv5_with_statistics(std::uint64_t seed) {
    auto net = nn::build_architecture<float>("conv5", 10);
    nn::init_gaussian(net, 0.1, seed);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    std::normal_distribution<double> g(0, 0.2);
    for (auto& l : net.layers())
        if (l.spec.kind == nn::LayerKind::batchnorm)
            for (std::size_t c = 0; c < l.gamma.size(); ++c) {
                l.gamma[c] = float(u(rng));
                l.beta[c] = float(g(rng));
            }
    for (int pass = 0; pass < 20; ++pass) {
        auto x = testing_util::random_tensor<float>({32, 3, 32, 32}, rng);
        nn::ForwardTrace<float> trace;
        nn::forward(net, x, nn::Mode::train, &trace);
        nn::update_running_statistics(net, trace);
    }
    return net;
}

void criterion3(const protocols::Datasets& mnist, const std::vector<nn::Network<float>>& trained) {
    double worst = 0;
    bool argmax_ok = true;
    std::size_t ties = 0, nets = 0;
    std::mt19937_64 rng(3);
    auto check = [&](const nn::Network<float>& net, const Tensor<float>& x) {
        const auto r = homogeneity(net, x);
        worst = std::max(worst, r.deviation);
        argmax_ok = argmax_ok && r.argmax_same;
        ties += r.ties;
        ++nets;
    };
    const auto mnist_x = first_rows(mnist.test, kHomogeneityInputs);
    for (std::uint64_t s = 1; s <= 3; ++s) {
        auto m = nn::build_architecture<float>("mnist3x34", 10);
        nn::init_gaussian(m, 0.05, s);
        check(m, mnist_x);
        auto c = nn::build_architecture<float>("cifar3x24", 10);
        nn::init_fan_in(c, s);
        check(c, testing_util::random_tensor<float>({kHomogeneityInputs, 3, 32, 32}, rng));
        check(conv5_with_statistics(s), testing_util::random_tensor<float>({kHomogeneityInputs, 3, 32, 32}, rng));
    }
    const std::size_t random_nets = nets;
    for (const auto& net : trained) check(net, mnist_x);
    const bool enough_trained = !trained.empty();
    record(3, enough_trained && worst < kHomogeneityTol && argmax_ok,
           std::to_string(random_nets) + " random + " + std::to_string(nets - random_nets) +
               " trained nets (float32, BN absorbed), " + std::to_string(kHomogeneityInputs) +
               " inputs each; max |Prho*normalized - original|/max|original| = " + fmt(worst, 3) + " (tol " +
               fmt(kHomogeneityTol) + "); argmax identical: " + (argmax_ok ? "yes" : "no") +
               (ties ? " (" + std::to_string(ties) + " tied rows skipped)" : ""));
}

void criterion4() {
    double worst = 0;
    std::mt19937_64 rng(4);
    for (std::uint64_t s = 1; s <= 3; ++s) {
        const auto net = conv5_with_statistics(10 + s);
        const auto x = testing_util::random_tensor<float>({kAbsorbInputs, 3, 32, 32}, rng);
        worst = std::max(worst, relative_deviation(nn::forward(absorb_batchnorm(net), x, nn::Mode::eval),
                                                   nn::forward(net, x, nn::Mode::eval)));
    }
    record(4, worst < kAbsorbTol,
           "conv5 (float32) eval outputs before/after absorption on " + std::to_string(kAbsorbInputs) +
               " random inputs x 3 nets: max relative deviation " + fmt(worst, 3) + " (tol " + fmt(kAbsorbTol) + ")");
}

void criterion6() {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-2, 4);
    std::normal_distribution<double> g;
    double worst = 0;
    for (std::size_t t = 0; t < kFitSets; ++t) {
        const std::size_t n = 2 + rng() % 60;
        const double a = 3 * g(rng), b = g(rng), noise = std::abs(g(rng));
        std::vector<analysis::Point> pts(n);
        for (auto& p : pts) {
            p.x = u(rng);
            p.y = a * p.x + b + noise * g(rng);
        }
        const auto f = analysis::linear_fit(pts);
        const auto o = testing_util::ols_oracle(pts);
        for (double d : {f.slope - o.slope, f.intercept - o.intercept, f.r2 - o.r2, f.adjusted_r2 - o.adjusted_r2,
                         f.rmse - o.rmse})
            worst = std::max(worst, std::abs(d));
    }
    // published fits as convention fixtures: exact lines reproduce their coefficients
    auto line = [](double slope, double icpt) {
        std::vector<analysis::Point> p;
        for (double x : {2.1, 2.2, 2.3}) p.push_back({x, slope * x + icpt});
        return analysis::linear_fit(p);
    };
    const auto f1 = line(1.0075, -0.0174), f2 = line(0.9642, 0.0844);
    std::vector<analysis::Point> bp;
    for (double x : {2.1, 2.2, 2.3}) bp.push_back({x, 0.9642 * x + 0.0844});
    const auto b = analysis::bound_report(bp, 0.05, 50000);
    const bool fixtures = std::abs(f1.slope - 1.0075) < kFitTol && std::abs(f1.intercept + 0.0174) < kFitTol &&
                          std::abs(f2.slope - 0.9642) < kFitTol && std::abs(b.offset - 0.0844) < kFitTol;
    record(6, worst < kFitTol && fixtures,
           std::to_string(kFitSets) + " random point sets vs QR least-squares oracle: max abs deviation " +
               fmt(worst, 3) + " (tol " + fmt(kFitTol) + "); published-fit fixtures " + (fixtures ? "ok" : "wrong"));
}

void criterion9() {
    bool ok = true;
    std::string detail;
    for (std::size_t n : {10u, 50u, 200u}) {
        std::vector<std::vector<double>> xs(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) xs[i][i] = 1.0;
        const auto e = analysis::rademacher_linear(xs, 1.0, 2000, n);
        const double analytic = 1 / std::sqrt(double(n));
        const bool match = std::abs(e.estimate - analytic) <= kRademacherSe * e.standard_error + 1e-12;
        const bool below = e.estimate <= e.ceiling + kRademacherSe * e.standard_error + 1e-12;
        ok = ok && match && below;
        detail += "N=" + std::to_string(n) + " est " + fmt(e.estimate, 8) + " vs 1/sqrt(N) " + fmt(analytic, 8) + "; ";
    }
    // random data: never above the X W / sqrt(N) ceiling
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    for (int t = 0; t < 20; ++t) {
        std::vector<std::vector<double>> xs(40, std::vector<double>(8));
        for (auto& x : xs)
            for (auto& v : x) v = g(rng);
        const auto e = analysis::rademacher_linear(xs, 1.5, 1000, t);
        ok = ok && e.estimate <= e.ceiling + kRademacherSe * e.standard_error;
    }
    record(9, ok, detail + "20 Gaussian sets below the XW/sqrt(N) ceiling (3 SE)");
}

void criterion10() {
    std::mt19937_64 rng(10);
    double worst_dist = 0, worst_orth = 0;
    for (std::size_t t = 0; t < kMinNormSystems; ++t) {
        const Eigen::Index n = 5 + Eigen::Index(rng() % 10), d = n + 10 + Eigen::Index(rng() % 30);
        Eigen::MatrixXd x;
        Eigen::VectorXd y;
        testing_util::random_system(rng, n, d, x, y);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(x.transpose() * x / double(n), Eigen::EigenvaluesOnly);
        const auto rep = analysis::min_norm_gd_demo(x, y, 1.0 / eig.eigenvalues().maxCoeff(), 20000);
        worst_dist = std::max(worst_dist, (rep.weights - testing_util::min_norm_oracle(x, y)).norm());
        worst_orth = std::max(worst_orth, rep.max_orthogonal);
    }
    record(10, worst_dist < kMinNormTol && worst_orth < kOrthogonalTol,
           std::to_string(kMinNormSystems) + " underdetermined systems from w=0: max ||w_GD - X^+ y|| = " +
               fmt(worst_dist, 3) + " (tol " + fmt(kMinNormTol) + "), max orthogonal component " +
               fmt(worst_orth, 3) + " (tol " + fmt(kOrthogonalTol) + ")");
}

void criterion11() {
    using analysis::psi_transform;
    const bool anchors = std::abs(psi_transform(0.0)) <= kPsiTol && std::abs(psi_transform(1.0) - 1) <= kPsiTol &&
                         std::abs(psi_transform(0.6) - 0.2) <= kPsiTol;
    bool monotone = true, convex = true;
    std::vector<double> v(kPsiGrid);
    for (std::size_t i = 0; i < kPsiGrid; ++i) v[i] = psi_transform(double(i) / double(kPsiGrid - 1));
    for (std::size_t i = 1; i < kPsiGrid; ++i) monotone = monotone && v[i] >= v[i - 1];
    for (std::size_t i = 1; i + 1 < kPsiGrid; ++i) convex = convex && v[i - 1] + v[i + 1] - 2 * v[i] >= -1e-15;
    record(11, anchors && monotone && convex,
           std::string("psi(0)=") + fmt(psi_transform(0.0)) + " psi(1)=" + fmt(psi_transform(1.0)) +
               " psi(0.6)=" + fmt(psi_transform(0.6), 15) + "; monotone " + (monotone ? "yes" : "no") +
               ", convex " + (convex ? "yes" : "no") + " on " + std::to_string(kPsiGrid) + " points");
}

void criterion12() {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0, 1);
    std::size_t bad_multiset = 0, bad_count = 0;
    for (std::size_t t = 0; t < kCorruptionPairs; ++t) {
        const std::size_t n = 1 + rng() % 500;
        auto ds = testing_util::synthetic_mnist(1, 10, t);
        ds.images = Tensor<float>({n, 1, 1, 1});
        ds.labels = testing_util::random_labels(n, 10, rng);
        const double fraction = u(rng);
        const auto [out, plan] = data::corrupt_labels(ds, fraction, rng());
        auto a = ds.labels, b = out.labels;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        if (a != b) ++bad_multiset;
        if (plan.selected.size() != std::size_t(std::floor(fraction * double(n) + 0.5))) ++bad_count;
    }
    record(12, bad_multiset == 0 && bad_count == 0,
           std::to_string(kCorruptionPairs) + " random (fraction, seed) pairs: multiset violations " +
               std::to_string(bad_multiset) + ", |selected| != round(fraction N) " + std::to_string(bad_count));
}

void sweep_criteria(const std::string& config_path, const fs::path& run_dir, protocols::Datasets& data_out,
                    std::vector<nn::Network<float>>& trained) {
    auto cfg = protocols::ExperimentConfig::load(config_path);
    cfg.output_dir = run_dir.string();
    const auto data = protocols::load_datasets(cfg.dataset);
    data_out = data;
    std::cerr << "sweep: " << data.train.size() << " train / " << data.test.size() << " test examples, stds";
    for (double s : cfg.sweep_values) std::cerr << " " << s;
    std::cerr << " + random labels" << std::endl;

    protocols::RunOptions opts;
    opts.resume = std::getenv("NORMLAB_ACCEPTANCE_RESUME") != nullptr;
    if (!opts.resume) fs::remove_all(run_dir);
    opts.log = [](const std::string& m) {
        if (m.find("selected") != std::string::npos || m.find("warning") != std::string::npos ||
            m.find("resume") != std::string::npos)
            std::cerr << "  " << m << std::endl;
    };
    const auto t0 = std::chrono::steady_clock::now();
    const auto recs = protocols::run_experiment(cfg, data, opts);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto table = ResultsTable::from_records(recs);
    std::ofstream(run_dir / "results.csv") << emit_results_csv(table);
    std::ofstream(run_dir / "summary.json") << build_summary(cfg, recs, data.train.size()).dump(2) << "\n";

    for (const auto& r : recs)
        trained.push_back(protocols::load_checkpoint((run_dir / "points" / r.checkpoint).string()).network);

    // 5: chance anchors
    double zero_logit_dev = 0;
    for (std::size_t k : {2u, 10u, 100u}) {
        Tensor<double> z({4, k}, 0.0);
        zero_logit_dev = std::max(zero_logit_dev, std::abs(nn::loss_crossentropy(z, std::vector<nn::Label>{0, 1, 1, 0}) -
                                                           std::log(double(k))));
    }
    const protocols::RunRecord* rl = nullptr;
    std::size_t std_points = 0;
    bool zero_train_error = true;
    std::string errors;
    for (const auto& r : recs) {
        if (r.sweep_kind == "random-labels") rl = &r;
        if (r.sweep_kind == "init-std") ++std_points;
        zero_train_error = zero_train_error && r.train.error == 0.0;
        errors += r.sweep_kind + "(" + fmt(r.sweep_value) + ")=" + fmt(r.train.error) + " ";
    }
    const double chance_err = 1.0 - 1.0 / 10.0;
    if (!rl) {
        record(5, false, "sweep has no random-label point");
    } else {
        const bool ok = zero_logit_dev <= kChanceLossTol && std::abs(rl->test.error - chance_err) <= kRlErrorTol &&
                        std::abs(rl->norm_train.loss - std::log(10.0)) <= kRlNormLossTol;
        record(5, ok,
               "zero-logit CE - ln K max deviation " + fmt(zero_logit_dev, 3) + "; random-label net test error " +
                   fmt(rl->test.error, 4) + " (want 0.9 +- " + fmt(kRlErrorTol) + "), normalized train loss " +
                   fmt(rl->norm_train.loss, 7) + " (want ln 10 = 2.302585 +- " + fmt(kRlNormLossTol) + ")");
    }

    // 7: linearity of the normalized losses
    const auto fit = fit_columns(table, "norm_train_loss", "norm_test_loss");
    const bool ok7 = std_points >= kMinStdValues && rl && zero_train_error && fit.r2 >= kMinR2 &&
                     fit.slope >= kSlopeLo && fit.slope <= kSlopeHi && seconds <= kSweepBudgetSeconds;
    std::string pts;
    for (const auto& row : table.rows)
        pts += "(" + fmt(row.norm_train_loss, 7) + ", " + fmt(row.norm_test_loss, 7) + ") ";
    record(7, ok7,
           std::to_string(std_points) + " stds + " + (rl ? "1" : "0") + " RL point on " +
               std::to_string(data.train.size()) + " MNIST examples; normalized fit slope " + fmt(fit.slope, 5) +
               " intercept " + fmt(fit.intercept, 5) + " R2 " + fmt(fit.r2, 6) + " (want R2 >= " + fmt(kMinR2) +
               ", slope in [" + fmt(kSlopeLo) + ", " + fmt(kSlopeHi) + "]); train errors " + errors + "; points " +
               pts + "; sweep time " + fmt(seconds / 60, 3) + " min (budget 120)");

    // 8: product norm vs unnormalized test loss
    const double rho = analysis::spearman(table.column("product_norm"), table.column("test_loss"));
    record(8, rho > kMinSpearman,
           "Spearman(product_norm, test_loss) = " + fmt(rho, 4) + " over " + std::to_string(table.rows.size()) +
               " points (want > " + fmt(kMinSpearman) + ")");
}

}  // namespace

int main(int argc, char** argv) {
    const std::string config = argc > 1 ? argv[1] : std::string(NORMLAB_SOURCE_DIR) + "/configs/mnist_init_std.json";
    const fs::path run_dir = argc > 2 ? fs::path(argv[2]) : fs::path("acceptance_run");

    guarded(1, criterion1);
    guarded(2, criterion2);
    guarded(4, criterion4);
    guarded(6, criterion6);
    guarded(9, criterion9);
    guarded(10, criterion10);
    guarded(11, criterion11);
    guarded(12, criterion12);

    protocols::Datasets mnist;
    std::vector<nn::Network<float>> trained;
    try {
        sweep_criteria(config, run_dir, mnist, trained);
    } catch (const std::exception& e) {
        for (int id : {5, 7, 8})
            if (!outcomes.count(id)) record(id, false, std::string("sweep failed: ") + e.what());
    }
    guarded(3, [&] {
        if (mnist.test.size() == 0) mnist = protocols::load_datasets(
                                        protocols::ExperimentConfig::load(config).dataset);
        criterion3(mnist, trained);
    });

    int failed = 0;
    std::cout << "\nacceptance criteria\n";
    for (const auto& [id, title] : titles) {
        const auto it = outcomes.find(id);
        const bool pass = it != outcomes.end() && it->second.pass;
        failed += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << "  " << id << ". " << title << ": "
                  << (it != outcomes.end() ? it->second.detail : "not run") << "\n";
    }
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed") << std::endl;
    return failed ? 1 : 0;
}
