// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "oracles.hpp"
#include "score/coding_rate.hpp"
#include "score/dataio.hpp"
#include "score/label_compress.hpp"
#include "score/selector.hpp"
#include "score/synthbench.hpp"

using namespace score;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double mean(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

// P(X >= k) for X ~ Binomial(n, 1/2).
double sign_test_p(int k, int n) {
  double p = 0.0;
  for (int i = k; i <= n; ++i)
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
  return p;
}

Outcome determinant_lemma() {
  const Index d = 16;
  double worst = 0.0;
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Index size = std::uniform_int_distribution<Index>(0, 32)(rng);
    const Eigen::MatrixXd s = oracle::gaussian(d, size, rng);
    const Eigen::VectorXd z = oracle::gaussian(d, 1, rng);
    CodingRateParams params;
    const double gamma = params.gamma(d, size + 1);
    GramState<double> state(d, gamma, ScalingMode::Fixed);
    for (Index j = 0; j < size; ++j) state.insert(s.col(j));
    const double gain = state.marginal_gain(z);

    const Eigen::MatrixXd base = Eigen::MatrixXd::Identity(d, d) + gamma * s * s.transpose();
    const double direct = 0.5 * (oracle::eigen_logdet(base + gamma * z * z.transpose()) - oracle::eigen_logdet(base));
    worst = std::max(worst, oracle::relative_diff(gain, direct));
  }
  return {worst <= 1e-8, fmt("max relative diff %.2e over 100 trials", worst)};
}

Outcome submodularity() {
  int violations = 0;
  double tightest = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index d = std::uniform_int_distribution<Index>(2, 12)(rng);
    const Index nb = std::uniform_int_distribution<Index>(1, 20)(rng);
    const Index na = std::uniform_int_distribution<Index>(0, nb)(rng);
    const double gamma = std::uniform_real_distribution<double>(0.05, 5.0)(rng);
    const Eigen::MatrixXd pool = oracle::gaussian(d, nb + 1, rng);
    GramState<double> a(d, gamma, ScalingMode::Fixed);
    GramState<double> b(d, gamma, ScalingMode::Fixed);
    for (Index j = 0; j < nb; ++j) {
      if (j < na) a.insert(pool.col(j));
      b.insert(pool.col(j));
    }
    const double slack = a.marginal_gain(pool.col(nb)) - b.marginal_gain(pool.col(nb));
    tightest = std::min(tightest, slack);
    if (slack < -1e-10) ++violations;
  }
  return {violations == 0, fmt("%d violations in 1000 nested pairs, min slack %.2e", violations, tightest)};
}

Outcome rank_surrogate() {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd u = oracle::gaussian(10, 3, rng);
  const Eigen::MatrixXd m = u * u.transpose();
  std::vector<double> x, y;
  for (double lambda : {1e6, 1e7, 1e8}) {
    x.push_back(std::log(lambda));
    y.push_back(logdet_psd(Eigen::MatrixXd(Eigen::MatrixXd::Identity(10, 10) + lambda * m)));
  }
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxy / sxx;
  return {std::abs(slope - 3.0) <= 0.05, fmt("slope %.6f for planted rank 3", slope)};
}

Outcome greedy_near_optimal() {
  const double bound = 1.0 - 1.0 / std::exp(1.0);
  int below = 0, exact = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    MixtureSpec mix;
    mix.num_classes = 2;
    mix.per_class = 6;
    mix.dim = 4;
    mix.subspace_rank = 2;
    mix.seed = derive_seed(seed, "mixture");
    const auto features = gen_mixture(mix);
    LabelGenSpec ls;
    ls.num_augs = 3;
    ls.seed = derive_seed(seed, "labels");
    const auto labels = gen_soft_labels(features, ls);

    SelectionConfig config;
    config.ipc = 2;
    config.alpha = 0.0;
    config.beta = 0.0;
    config.params.scaling = ScalingMode::Fixed;
    config.params.gamma_fixed = 1.0;
    config.candidate_batch = features.size();
    config.seed = derive_seed(seed, "select");
    const auto greedy = select(features, labels, config);
    const auto rates = precompute_label_rates(labels, config.params);
    const double value = selection_objective(features, rates, greedy.selected_positions, 0.0, 0.0, config.params);
    const auto best = brute_force_select(features, labels, config);
    const double ratio = value / best.value;
    worst = std::min(worst, ratio);
    if (value < bound * best.value) ++below;
    if (value >= best.value - 1e-12 * std::abs(best.value)) ++exact;
  }
  return {below == 0, fmt("%d/20 below (1-1/e) of optimum, worst ratio %.4f, exact optimum in %d/20 (%.2f)", below, worst,
                          exact, exact / 20.0)};
}

Outcome rpca_recovery() {
  const auto inst = planted_rpca_instance(60, 40, 3, 0.05, 1.0, 0);
  const auto dec = rpca_pcp(inst.observed);
  const double err = (dec.low_rank - inst.low_rank).norm() / inst.low_rank.norm();
  const double cut = 1e-3 * inst.sparse.cwiseAbs().maxCoeff();
  const Eigen::MatrixXd s = dec.sparse_dense();
  int mismatches = 0;
  for (Index i = 0; i < s.rows(); ++i)
    for (Index j = 0; j < s.cols(); ++j)
      if ((std::abs(s(i, j)) > cut) != (inst.sparse(i, j) != 0.0)) ++mismatches;

  // Context only: how often the same instance shape recovers across seeds.
  int recovered = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto other = planted_rpca_instance(60, 40, 3, 0.05, 1.0, seed);
    const auto o = rpca_pcp(other.observed);
    if ((o.low_rank - other.low_rank).norm() / other.low_rank.norm() <= 1e-4) ++recovered;
  }
  const bool pass = dec.converged && dec.iterations_used <= 500 && err <= 1e-4 && mismatches == 0;
  return {pass, fmt("seed 0: rel err %.2e, %d support mismatches, %d iterations; seeds 1-20 recovered %d/20", err,
                    mismatches, dec.iterations_used, recovered)};
}

Outcome svt_prox() {
  double worst = 0.0;
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const Index rows = std::uniform_int_distribution<Index>(2, 30)(rng);
    const Index cols = std::uniform_int_distribution<Index>(2, 30)(rng);
    const Eigen::MatrixXd m = oracle::gaussian(rows, cols, rng);
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
    const double tau = std::uniform_real_distribution<double>(0.0, 1.2)(rng) * sv(0);
    const Eigen::VectorXd got = Eigen::JacobiSVD<Eigen::MatrixXd>(svt(m, tau)).singularValues();
    const Eigen::VectorXd want = (sv.array() - tau).cwiseMax(0.0).matrix();
    worst = std::max(worst, (got - want).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-10, fmt("max singular value diff %.2e over 50 matrices", worst)};
}

Outcome storage_law() {
  const Index k = 300, c = 1000;
  MixtureSpec mix;
  mix.num_classes = 1;
  mix.per_class = 1;
  mix.dim = 2;
  mix.subspace_rank = 1;
  auto feature = gen_mixture(mix);
  feature.num_classes = static_cast<int>(c);
  LabelGenSpec ls;
  ls.num_augs = k;
  ls.planted_rank = 5;
  ls.noise = 0.05;
  const auto labels = gen_soft_labels(feature, ls);

  const Index planned = plan_rank_for_ratio(k, c, 10.0, 8);
  int violations = 0;
  std::ostringstream detail;
  detail << "planner rank " << planned << ";";
  for (auto method : {CompressionMethod::Rpca, CompressionMethod::Svd, CompressionMethod::Rsvd, CompressionMethod::Cur}) {
    detail << " " << to_string(method);
    for (int ratio : {10, 20, 30}) {
      CompressionOptions options;
      options.method = method;
      options.ratio = ratio;
      options.seed = 7;
      // Storage is fixed by the plan, not by how far the solver gets.
      options.rpca.max_iters = 1;
      const auto compressed = compress_labels(labels, options);
      const bool ok = compressed.stored_bytes * static_cast<std::uint64_t>(ratio) <= compressed.original_bytes &&
                      compressed.stored_bytes == compressed.account_bytes();
      if (!ok) ++violations;
      detail << " " << ratio << "x:" << compressed.stored_bytes;
    }
  }
  detail << " of " << k * c * 8 << " bytes";
  return {violations == 0 && planned == 23, detail.str()};
}

Outcome selection_quality() {
  std::vector<double> score_acc, random_acc;
  int wins = 0, losses = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    MixtureSpec mix;
    mix.num_classes = 10;
    mix.per_class = 600;
    mix.dim = 32;
    mix.seed = derive_seed(seed, "mixture");
    const auto [train, test] = split_holdout(gen_mixture(mix), 100);
    LabelGenSpec ls;
    ls.seed = derive_seed(seed, "labels");
    const auto labels = gen_soft_labels(train, ls);
    SelectionConfig config;
    config.ipc = 10;
    config.alpha = 5.0;
    config.beta = 1.0;
    config.seed = derive_seed(seed, "select");
    config.threads = 4;
    const auto result = select(train, labels, config);
    const double s = eval_nearest_mean(train.subset(result.selected_positions), test);
    const double r = eval_nearest_mean(train.subset(random_subset(train, 10, derive_seed(seed, "random"))), test);
    score_acc.push_back(s);
    random_acc.push_back(r);
    if (s > r) ++wins;
    if (s < r) ++losses;
  }
  const int n = wins + losses;
  const double p = n == 0 ? 1.0 : sign_test_p(wins, n);
  const bool pass = mean(score_acc) >= mean(random_acc) && p <= 0.05;
  return {pass, fmt("mean accuracy %.4f vs random %.4f, wins %d losses %d ties %d, sign test p %.4f", mean(score_acc),
                    mean(random_acc), wins, losses, 10 - n, p)};
}

Outcome compression_resilience() {
  int wins = 0;
  std::vector<double> err0, err1;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    MixtureSpec mix;
    mix.num_classes = 100;
    mix.per_class = 20;
    mix.dim = 32;
    mix.seed = derive_seed(seed, "mixture");
    const auto train = gen_mixture(mix);
    LabelGenSpec ls;
    ls.num_augs = 32;
    ls.planted_rank = 5;
    ls.rank_jitter = true;
    ls.noise = 0.05;
    ls.seed = derive_seed(seed, "labels");
    const auto labels = gen_soft_labels(train, ls);
    double err[2];
    for (int beta = 0; beta < 2; ++beta) {
      SelectionConfig config;
      config.ipc = 2;
      config.beta = beta;
      config.seed = derive_seed(seed, "select");
      config.threads = 4;
      const auto chosen = labels.subset(select(train, labels, config).selected_positions);
      CompressionOptions options;
      options.method = CompressionMethod::Svd;
      options.ratio = 10.0;
      err[beta] = mean(reconstruction_errors(chosen, decompress_labels(compress_labels(chosen, options))));
    }
    err0.push_back(err[0]);
    err1.push_back(err[1]);
    if (err[1] < err[0]) ++wins;
  }
  return {wins >= 8, fmt("beta=1 lower error in %d/10 seeds, mean error %.4f (beta=1) vs %.4f (beta=0)", wins, mean(err1),
                         mean(err0))};
}

Outcome method_agnosticism() {
  MixtureSpec mix;
  mix.num_classes = 200;
  mix.per_class = 1;
  mix.dim = 4;
  mix.subspace_rank = 1;
  mix.seed = derive_seed(10, "mixture");
  auto features = gen_mixture(mix);
  std::vector<Index> keep(20);
  for (Index i = 0; i < 20; ++i) keep[static_cast<std::size_t>(i)] = i;
  features = features.subset(keep);
  LabelGenSpec ls;
  ls.num_augs = 100;
  ls.planted_rank = 5;
  ls.noise = 0.05;
  ls.seed = derive_seed(10, "labels");
  const auto labels = gen_soft_labels(features, ls);

  std::map<std::string, double> errors;
  std::ostringstream detail;
  for (auto method : {CompressionMethod::Rpca, CompressionMethod::Svd, CompressionMethod::Rsvd, CompressionMethod::Cur}) {
    CompressionOptions options;
    options.method = method;
    options.ratio = 10.0;
    options.seed = derive_seed(10, "compress");
    options.threads = 4;
    const auto compressed = compress_labels(labels, options);
    const double e = mean(reconstruction_errors(labels, decompress_labels(compressed)));
    errors[to_string(method)] = e;
    detail << to_string(method) << " " << fmt("%.4g", e) << " (rank " << compressed.rank << ") ";
  }
  auto spread = [&](bool with_cur) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& [name, e] : errors) {
      if (!with_cur && name == "cur") continue;
      lo = std::min(lo, e);
      hi = std::max(hi, e);
    }
    return hi / lo;
  };
  const double ratio = spread(true);
  detail << fmt("max/min %.3g, without cur %.3g", ratio, spread(false));
  return {ratio <= 2.0, detail.str()};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SCORE_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), root).generic_string();
    if (entry.path().extension() == ".json") {
      auto j = read_json(entry.path());
      j.erase("timings_ms");
      files[rel] = canonical_json(j);
    } else {
      const auto bytes = read_file_bytes(entry.path());
      files[rel] = std::string(bytes.begin(), bytes.end());
    }
  }
  return files;
}

Outcome determinism() {
  const fs::path work = fs::temp_directory_path() / "score_acceptance_determinism";
  const std::string w = work.string();
  const std::vector<std::string> commands = {
      "synth --out " + w + "/data --classes 5 --per-class 40 --augs 12 --planted-rank 3 --rank-jitter --label-noise 0.1 "
      "--holdout 10 --seed 11",
      "select --data " + w + "/data --out " + w + "/art --ipc 4 --baseline random --trials 20 --seed 11",
      "compress --artifact " + w + "/art --method rpca --ratio 2 --seed 11",
      "decompress --artifact " + w + "/art --out " + w + "/rec --renormalize",
      "eval --artifact " + w + "/art --test " + w + "/data/test --out " + w + "/eval --trials 5 --ratios 2,3 "
      "--methods svd,rsvd,cur,rpca --csv " + w + "/eval/rows.csv --seed 11",
  };
  std::map<std::string, std::string> first;
  for (int pass = 0; pass < 2; ++pass) {
    fs::remove_all(work);
    fs::create_directories(work);
    for (const auto& c : commands)
      if (run_cli(c) != 0) return {false, "command failed: " + c.substr(0, c.find(' '))};
    if (pass == 0) first = snapshot(work);
  }
  const auto second = snapshot(work);
  fs::remove_all(work);
  int differing = 0;
  std::string names;
  for (const auto& [name, content] : first) {
    auto it = second.find(name);
    if (it == second.end() || it->second != content) {
      ++differing;
      names += " " + name;
    }
  }
  if (second.size() != first.size()) ++differing;
  return {differing == 0, fmt("%zu files over 5 commands, %d differ", first.size(), differing) + names};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "determinant-lemma gains", 1, determinant_lemma},
      {2, "submodularity", 5, submodularity},
      {3, "rank surrogate slope", 1, rank_surrogate},
      {4, "greedy near-optimality", 10, greedy_near_optimal},
      {5, "rpca planted recovery", 5, rpca_recovery},
      {6, "svt prox identity", 2, svt_prox},
      {7, "storage budget law", 1, storage_law},
      {8, "selection quality vs random", 60, selection_quality},
      {9, "compression resilience", 60, compression_resilience},
      {10, "method agnosticism", 30, method_agnosticism},
      {11, "cli determinism", 30, determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds < c.limit_s;
    const bool pass = out.pass && in_time;
    if (!pass) ++failed;
    std::cout << (pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << ": " << out.detail
              << fmt(" [%.2f s, limit %.0f s%s]", seconds, c.limit_s, in_time ? "" : ", over time") << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
