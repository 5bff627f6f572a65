// Acceptance gate. Prints one PASS/FAIL line per criterion; the exit status
// is non-zero when any selected criterion fails.
#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/statistics/bivariate_statistics.hpp>

#include "diagan/bayes.hpp"
#include "diagan/drs.hpp"
#include "diagan/errors.hpp"
#include "diagan/io.hpp"
#include "diagan/metrics.hpp"
#include "diagan/pipeline.hpp"

namespace fs = std::filesystem;
using namespace diagan;

namespace {

// Tolerances and thresholds.
constexpr double kOracleSuiteSeconds = 120.0;
constexpr double kLdrvRatioMin = 5.0;
constexpr double kSpearmanMax = -0.5;
constexpr int kDroppedModesMin = 3;
constexpr long kDroppedBelow = 10;
constexpr long kCoveredAtLeast = 50;
constexpr int kRecallGapSeedsMin = 4;
constexpr double kDrsTvMax = 0.05;
constexpr std::size_t kDrsAccepted = 50000;
constexpr int kDrsBins = 200;
constexpr double kFittedLdrMaeMax = 0.1;
constexpr int kLaplaceFeatures = 20;
constexpr std::size_t kLaplaceDraws = 100000;
constexpr double kLaplaceSe = 3.0;
constexpr int kVanillaCoveredMax = 22;
constexpr int kStrictWinsMin = 3;
constexpr std::size_t kGeneratedSamples = 10000;

// Networks in the long-running criteria are 128 units wide instead of 512 so
// five seeds fit the time budget on one core.
const std::vector<std::string> kWidth = {"net.hidden_width=128"};
const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4, 5};

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_cache = "acceptance_cache";

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (const auto& x : v) out += (out.empty() ? "" : " ") + fmt(static_cast<double>(x));
  return out;
}

// Average ranks, ties share the mean rank.
std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    for (std::size_t t = i; t <= j; ++t) r[order[t]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return boost::math::statistics::correlation_coefficient(ranks(a), ranks(b));
}

ExperimentConfig acceptance_config(const std::string& preset, std::uint64_t seed, std::vector<std::string> extra = {}) {
  extra.insert(extra.begin(), kWidth.begin(), kWidth.end());
  extra.push_back("seed=" + std::to_string(seed));
  return load_config("preset = " + preset + "\n", extra);
}

// Phase-1 run directory for `cfg`, trained through the pipeline once and then
// reused by every criterion that needs the same configuration.
fs::path phase1_run(const ExperimentConfig& cfg) {
  const fs::path root = g_cache / (cfg.dataset.name + "_s" + std::to_string(cfg.seed) + "_" + cfg.hash());
  if (fs::exists(root / "manifest.json") && RunManifest::load(root).has_phase("phase1")) return root;
  const fs::path partial = root.string() + ".partial";
  fs::remove_all(partial);
  fs::create_directories(g_cache);
  cmd_train(cfg, partial);
  fs::rename(partial, root);
  return root;
}

struct Phase1 {
  ExperimentConfig cfg;
  LabeledDataset data;
  LdrLog log;
  GanTrainer trainer;
};

Phase1 load_phase1(const ExperimentConfig& cfg) {
  const fs::path root = phase1_run(cfg);
  const ExperimentConfig stored = load_run_config(root);
  return {stored, read_dataset_csv(root / "dataset.csv"), LdrLog::read_csv(root / "phase1" / "ldr_log.csv"),
          GanTrainer::load(root / "phase1" / "checkpoint", stored.train)};
}

Matrix generator_samples(const GanTrainer& t, std::uint64_t seed) {
  RngStream rng(seed, StreamId::evaluation);
  return t.model().generate(kGeneratedSamples, rng);
}

void log_line(const std::string& s) {
  std::printf("  %s\n", s.c_str());
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------

Outcome c1_oracle_suite() {
  const auto start = std::chrono::steady_clock::now();
  doctest::Context ctx;
  ctx.setOption("no-intro", true);
  ctx.setOption("no-version", true);
  const int failed = ctx.run();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {failed == 0 && seconds < kOracleSuiteSeconds,
          "oracle/property suite " + std::string(failed ? "had failures" : "clean") + " in " + fmt(seconds) + " s (limit " +
              fmt(kOracleSuiteSeconds) + " s)"};
}

Outcome c2_ldrv_minor_detection() {
  std::vector<double> ratios;
  for (auto seed : kSeeds) {
    const Phase1 p = load_phase1(acceptance_config("single_gaussian", seed, {"dataset.sigma=3"}));
    double minor = 0, major = 0;
    std::size_t n_minor = 0, n_major = 0;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const double v = ldrv(p.log.row(i));
      if (p.data.group[i] == Group::minor) minor += v, ++n_minor;
      if (p.data.group[i] == Group::major) major += v, ++n_major;
    }
    minor /= static_cast<double>(n_minor);
    major /= static_cast<double>(n_major);
    ratios.push_back(minor / major);
    log_line("seed " + std::to_string(seed) + ": mean LDRV minor " + fmt(minor) + " major " + fmt(major) + " ratio " +
             fmt(ratios.back()));
  }
  const double m = median(ratios);
  return {m >= kLdrvRatioMin, "median LDRV(minor)/LDRV(major) = " + fmt(m) + " (>= " + fmt(kLdrvRatioMin) + "; seeds " +
                                  join(ratios) + ")"};
}

Outcome c3_ldrm_mode_drop() {
  const auto spec = GaussianMixtureSpec::twenty_five();
  std::vector<double> rhos;
  bool all_qualify = true;
  for (auto seed : kSeeds) {
    const Phase1 p = load_phase1(acceptance_config("twenty_five_gaussians", seed));
    const ModeCoverageReport rep = high_quality_counts(generator_samples(p.trainer, seed), spec);
    const std::vector<double> ldrm_mode = per_mode_mean(p.data, p.log.ldrm_all(), spec.centers.size());
    const std::vector<double> counts(rep.counts.begin(), rep.counts.end());
    const int dropped = rep.modes_dropped(kDroppedBelow);
    all_qualify = all_qualify && dropped >= kDroppedModesMin;
    rhos.push_back(spearman(ldrm_mode, counts));
    log_line("seed " + std::to_string(seed) + ": dropped modes " + std::to_string(dropped) + ", spearman " +
             fmt(rhos.back()));
  }
  const double m = median(rhos);
  return {all_qualify && m <= kSpearmanMax,
          "median spearman(LDRM, high-quality count) = " + fmt(m) + " (<= " + fmt(kSpearmanMax) + "; seeds " + join(rhos) +
              (all_qualify ? "" : "; a run dropped fewer than " + std::to_string(kDroppedModesMin) + " modes") + ")"};
}

Outcome c4_recall_gap() {
  int gaps = 0;
  for (auto seed : kSeeds) {
    Phase1 p = load_phase1(acceptance_config("single_gaussian", seed, {"dataset.sigma=" + fmt(sigma_for_minority_level(3))}));
    p.trainer.run_plain_phase2(p.data, SamplingDistribution::uniform(p.data.size()));
    const Matrix gen = generator_samples(p.trainer, seed);
    const Matrix minor = p.data.points(p.data.indices_of(Group::minor), Eigen::all);
    const Matrix major = p.data.points(p.data.indices_of(Group::major), Eigen::all);
    const double r_minor = partial_recall(minor, gen, p.cfg.eval.knn_k);
    const double r_major = partial_recall(major, gen, p.cfg.eval.knn_k);
    gaps += r_minor < r_major ? 1 : 0;
    log_line("seed " + std::to_string(seed) + ": partial recall minor " + fmt(r_minor, 4) + " major " + fmt(r_major, 4));
  }
  return {gaps >= kRecallGapSeedsMin, std::to_string(gaps) + "/" + std::to_string(kSeeds.size()) +
                                          " seeds with minor recall below major (need " + std::to_string(kRecallGapSeedsMin) +
                                          ")"};
}

// p_g = N(0, 1) and p_data = N(0.5, 1), both restricted to [kLo, kHi).
constexpr double kLo = -3.5, kHi = 4.5;

Matrix truncated_normal(std::size_t n, RngStream& rng, double mean) {
  Matrix m(static_cast<Eigen::Index>(n), 1);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double x = 0.0;
    do {
      x = mean + rng.normal();
    } while (x < kLo || x >= kHi);
    m(i, 0) = x;
  }
  return m;
}

Vector optimal_ldr(const Matrix& x) {
  Vector out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = 0.5 * x(i, 0) - 0.125;
  return out;
}

// Fits a small sigmoid discriminator to a frozen real/fake pool with the
// non-saturating loss and returns the mean |LDR - log(p_data_hat/p_g_hat)|
// over well-populated histogram bins.
double fitted_ldr_error() {
  RngStream rng(11, StreamId::test);
  const Matrix real = truncated_normal(40000, rng, 0.5), fake = truncated_normal(40000, rng, 0.0);
  MlpNetwork d = MlpNetwork::kaiming({1, 32, 32, 1}, Activation::relu, Activation::sigmoid, rng);
  AdamState opt(d.parameter_count(), {0.5, 0.999, 1e-8});
  constexpr Eigen::Index kBatch = 512;
  for (int step = 0; step < 4000; ++step) {
    std::vector<Eigen::Index> ri(kBatch), fi(kBatch);
    for (auto& i : ri) i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(real.rows())));
    for (auto& i : fi) i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(fake.rows())));
    const DiscriminatorLoss l = d_loss_ns(d, real(ri, Eigen::all), fake(fi, Eigen::all));
    adam_step(opt, d, l.grads, step < 3000 ? 1e-3 : 1e-4);
  }
  constexpr int kBins = 20;
  constexpr double lo = -2.0, hi = 2.5;
  std::vector<double> nr(kBins, 0.0), nf(kBins, 0.0);
  const auto bin = [&](double x) { return static_cast<int>(std::floor((x - lo) / (hi - lo) * kBins)); };
  for (Eigen::Index i = 0; i < real.rows(); ++i)
    if (int b = bin(real(i, 0)); b >= 0 && b < kBins) nr[b] += 1;
  for (Eigen::Index i = 0; i < fake.rows(); ++i)
    if (int b = bin(fake(i, 0)); b >= 0 && b < kBins) nf[b] += 1;
  double err = 0.0;
  int used = 0;
  for (int b = 0; b < kBins; ++b) {
    if (nr[b] < 200 || nf[b] < 200) continue;
    Matrix centre(1, 1);
    centre(0, 0) = lo + (b + 0.5) * (hi - lo) / kBins;
    err += std::abs(discriminator_ldr(d, centre)[0] - std::log(nr[b] / nf[b]));
    ++used;
  }
  return err / used;
}

Outcome c5_drs_exactness() {
  RngStream rng(5, StreamId::drs);
  DrsState state;
  state.ldr_max = 0.5 * kHi - 0.125;  // supremum of the LDR on the support
  const CandidateSource source = [](std::size_t n, RngStream& r) { return truncated_normal(n, r, 0.0); };
  const DrsResult res = sample_n(source, optimal_ldr, kDrsAccepted, state, rng);

  std::vector<double> hist(kDrsBins, 0.0);
  const double width = (kHi - kLo) / kDrsBins;
  for (Eigen::Index i = 0; i < res.samples.rows(); ++i) {
    const int b = std::min(kDrsBins - 1, static_cast<int>((res.samples(i, 0) - kLo) / width));
    hist[static_cast<std::size_t>(b)] += 1.0 / static_cast<double>(res.samples.rows());
  }
  const boost::math::normal_distribution<double> target(0.5, 1.0);
  const double mass = boost::math::cdf(target, kHi) - boost::math::cdf(target, kLo);
  double tv = 0.0;
  for (int b = 0; b < kDrsBins; ++b) {
    const double p = (boost::math::cdf(target, kLo + (b + 1) * width) - boost::math::cdf(target, kLo + b * width)) / mass;
    tv += 0.5 * std::abs(hist[static_cast<std::size_t>(b)] - p);
  }
  const double mae = fitted_ldr_error();
  log_line("accepted " + std::to_string(res.accepted) + " of " + std::to_string(res.proposed) + " proposals");
  log_line("fitted discriminator: mean |LDR - log(p_data/p_g)| over bins = " + fmt(mae));
  return {tv <= kDrsTvMax && mae <= kFittedLdrMaeMax,
          "TV(accepted, p_data) = " + fmt(tv, 4) + " (<= " + fmt(kDrsTvMax) + "), fitted-D LDR error " + fmt(mae) +
              " (<= " + fmt(kFittedLdrMaeMax) + ")"};
}

Outcome c6_laplace() {
  RngStream rng(6, StreamId::bayes);
  constexpr int n = 50, d = 5;
  Eigen::MatrixXd f(n, d);
  Eigen::VectorXd truth(d);
  for (int j = 0; j < d; ++j) truth[j] = rng.normal();
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) f(i, j) = rng.normal();
    y[static_cast<std::size_t>(i)] = rng.uniform() < 1.0 / (1.0 + std::exp(-f.row(i).dot(truth))) ? 1 : 0;
  }
  const LogisticPosterior post = fit_posterior(f, y, 1.0);
  int agree = 0;
  double worst = 0.0;
  for (int t = 0; t < kLaplaceFeatures; ++t) {
    Eigen::VectorXd phi(d);
    for (int j = 0; j < d; ++j) phi[j] = rng.normal();
    const McVariance mc = mc_ldrv_oracle(phi, post, kLaplaceDraws, rng);
    const double z = std::abs(mc.variance - ldrv_approx(phi, post)) / mc.standard_error;
    worst = std::max(worst, z);
    agree += z <= kLaplaceSe ? 1 : 0;
  }
  return {agree == kLaplaceFeatures, std::to_string(agree) + "/" + std::to_string(kLaplaceFeatures) +
                                         " features within " + fmt(kLaplaceSe) + " SE (largest " + fmt(worst) + " SE)"};
}

Outcome c7_dia_benefit() {
  const auto spec = GaussianMixtureSpec::twenty_five();
  std::vector<double> fd_vanilla, fd_dia;
  int strict = 0;
  bool never_worse = true, vanilla_qualifies = true;
  for (auto seed : kSeeds) {
    const ExperimentConfig cfg = acceptance_config("twenty_five_gaussians", seed);
    Phase1 vanilla = load_phase1(cfg);
    Phase1 dia = load_phase1(cfg);

    vanilla.trainer.run_plain_phase2(vanilla.data, SamplingDistribution::uniform(vanilla.data.size()));
    const Matrix gv = generator_samples(vanilla.trainer, seed);

    const ScoreTable scores = compute_scores(dia.log, dia.cfg.train.score_k, dia.cfg.clip);
    dia.trainer.run_phase2(dia.data, SamplingDistribution(scores.frequency));
    RngStream drs_rng(seed, StreamId::drs);
    const auto source = generator_source(dia.trainer.model().generator);
    const auto ldr_fn = discriminator_ldr_fn(*dia.trainer.model().aux);
    const DrsState state = init_ldr_max(source, ldr_fn, drs_rng, dia.cfg.drs);
    const DrsResult gd = sample_n(source, ldr_fn, kGeneratedSamples, state, drs_rng, dia.cfg.drs);

    const int cv = high_quality_counts(gv, spec).modes_covered(kCoveredAtLeast);
    const int cd = high_quality_counts(gd.samples, spec).modes_covered(kCoveredAtLeast);
    fd_vanilla.push_back(frechet_distance(vanilla.data.points, gv).distance);
    fd_dia.push_back(frechet_distance(dia.data.points, gd.samples).distance);
    vanilla_qualifies = vanilla_qualifies && cv <= kVanillaCoveredMax;
    never_worse = never_worse && cd >= cv;
    strict += cd > cv ? 1 : 0;
    log_line("seed " + std::to_string(seed) + ": covered vanilla " + std::to_string(cv) + " dia " + std::to_string(cd) +
             ", frechet vanilla " + fmt(fd_vanilla.back()) + " dia " + fmt(fd_dia.back()) + ", DRS acceptance " +
             fmt(gd.acceptance_rate()));
  }
  const double mv = median(fd_vanilla), md = median(fd_dia);
  const bool pass = vanilla_qualifies && never_worse && strict >= kStrictWinsMin && md <= mv;
  return {pass, "dia covers >= vanilla in every seed: " + std::string(never_worse ? "yes" : "no") + ", strictly more in " +
                    std::to_string(strict) + " (need " + std::to_string(kStrictWinsMin) + "), median frechet dia " + fmt(md) +
                    " vs vanilla " + fmt(mv) + (vanilla_qualifies ? "" : ", a vanilla run covered more than 22 modes")};
}

Outcome c8_determinism() {
  const fs::path base = fs::temp_directory_path() / ("diagan_accept_det_" + std::to_string(::getpid()));
  fs::remove_all(base);
  const ExperimentConfig cfg = load_config(
      "preset = twenty_five_gaussians\ntrain.epochs = 20\ntrain.window = 5\nnet.hidden_width = 32\n"
      "drs.samples = 2000\neval.samples = 2000\n",
      {"seed=8"});
  for (const char* run : {"a", "b"}) {
    cmd_train(cfg, base / run);
    cmd_diagnose(base / run);
    cmd_resample_train(base / run);
    cmd_drs(base / run, cfg.drs_samples);
    cmd_evaluate(base / run);
  }
  std::vector<std::string> differing;
  const std::vector<std::string> files = {"phase1/ldr_log.csv", "diagnose/scores.csv", "drs/samples.csv",
                                          "evaluate/mode_coverage.csv", "evaluate/metrics.json"};
  for (const auto& f : files) {
    if (read_text_file(base / "a" / f) != read_text_file(base / "b" / f)) differing.push_back(f);
  }
  fs::remove_all(base);
  std::string detail = std::to_string(files.size() - differing.size()) + "/" + std::to_string(files.size()) +
                       " artifacts byte-identical across two runs";
  for (const auto& f : differing) detail += "; differs: " + f;
  return {differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  std::string cache = g_cache.string();
  app.add_option("--criterion", only, "Run a single criterion (1-8); all when omitted")->check(CLI::Range(0, 8));
  app.add_option("--cache", cache, "Directory for reusable phase-1 runs");
  CLI11_PARSE(app, argc, argv);
  g_cache = cache;

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"formula oracle suite", c1_oracle_suite},     {"LDRV minor detection", c2_ldrv_minor_detection},
      {"LDRM mode-drop detection", c3_ldrm_mode_drop}, {"recall gap", c4_recall_gap},
      {"DRS exactness", c5_drs_exactness},           {"Laplace validation", c6_laplace},
      {"Dia-GAN end-to-end benefit", c7_dia_benefit}, {"determinism", c8_determinism}};

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (only != 0 && only != id) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s C%d %s: %s [%.0f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str(), s);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
