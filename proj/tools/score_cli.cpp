// score: synthesize data, select subsets, compress soft labels, evaluate.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "score/dataio.hpp"
#include "score/label_compress.hpp"
#include "score/selector.hpp"
#include "score/synthbench.hpp"

using namespace score;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kIo = 3, kData = 4, kInfeasible = 5 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidParams:
    case ErrorCode::InvalidSpec:
    case ErrorCode::RankOutOfRange:
      return kUsage;
    case ErrorCode::Io:
    case ErrorCode::BadMagic:
    case ErrorCode::BadVersion:
    case ErrorCode::TruncatedPayload:
    case ErrorCode::ChecksumMismatch:
    case ErrorCode::SchemaMismatch:
    case ErrorCode::MalformedFactors:
      return kIo;
    case ErrorCode::RatioInfeasible:
      return kInfeasible;
    default:
      return kData;
  }
}

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

unsigned default_threads() {
  if (const char* env = std::getenv("SCORE_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    throw UsageError("SCORE_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

Json base_report(const std::string& command, std::uint64_t seed) {
  Json r;
  r["schema"] = "score.report";
  r["schema_version"] = 1;
  r["command"] = command;
  r["seed"] = seed;
  r["tool_version"] = kToolVersion;
  r["warnings"] = Json::array();
  r["timings_ms"] = Json::object();
  return r;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + dir.string());
}

Json summary(const std::vector<double>& v) {
  if (v.empty()) return {{"count", 0}};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
  return {{"count", v.size()},
          {"mean", mean},
          {"std", sd},
          {"min", *std::min_element(v.begin(), v.end())},
          {"max", *std::max_element(v.begin(), v.end())}};
}

fs::path dataset_manifest_path(const fs::path& location) {
  return fs::is_directory(location) ? location / kDatasetManifestName : location;
}

// Positions of `ids` inside `set`, in the given order.
std::vector<Index> positions_of(const FeatureSet& set, const std::vector<SampleId>& ids) {
  std::unordered_map<SampleId, Index> where;
  for (Index i = 0; i < set.size(); ++i) where.emplace(set.sample_ids[static_cast<std::size_t>(i)], i);
  std::vector<Index> out;
  out.reserve(ids.size());
  for (auto id : ids) {
    const auto it = where.find(id);
    if (it == where.end()) fail(ErrorCode::SchemaMismatch, "id " + std::to_string(id) + " is not in the dataset");
    out.push_back(it->second);
  }
  return out;
}

double subset_rate(const FeatureSet& set, std::vector<Index> positions, const CodingRateParams& params) {
  std::sort(positions.begin(), positions.end());
  const Eigen::MatrixXd z = set.features(Eigen::all, positions);
  return coding_rate(z, params);
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  MixtureSpec mix;
  LabelGenSpec labels;
  int holdout = 0;
  std::uint64_t seed = 0;
  fs::path out;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  app.add_option("--classes", a.mix.num_classes, "number of classes")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--per-class", a.mix.per_class, "samples per class, held-out part included")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--dim", a.mix.dim, "feature dimension")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--subspace-rank", a.mix.subspace_rank, "per-class subspace rank")->capture_default_str();
  app.add_option("--separation", a.mix.separation, "norm of the class centers")->capture_default_str();
  app.add_option("--spread", a.mix.spread, "scale of in-subspace coefficients")->capture_default_str();
  app.add_option("--noise", a.mix.noise, "isotropic feature noise")->capture_default_str();
  app.add_option("--augs", a.labels.num_augs, "soft-label views per sample (K)")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--planted-rank", a.labels.planted_rank, "rank of each sample's label matrix")->capture_default_str();
  app.add_flag("--rank-jitter", a.labels.rank_jitter, "draw each sample's rank from [1, planted-rank]");
  app.add_option("--temperature", a.labels.temperature, "softmax temperature")->capture_default_str();
  app.add_option("--label-noise", a.labels.noise, "log-space label noise")->capture_default_str();
  app.add_option("--holdout", a.holdout, "samples per class moved to <out>/test")->check(CLI::NonNegativeNumber)->capture_default_str();
  app.add_option("--seed", a.seed, "global seed")->capture_default_str();
  app.add_option("--out", a.out, "output directory")->required();
}

int run_synth(const SynthArgs& a) {
  Stopwatch clock;
  if (a.labels.planted_rank < 1 || a.labels.planted_rank > std::min<Index>(a.labels.num_augs, a.mix.num_classes))
    throw UsageError("--planted-rank must lie in [1, min(--augs, --classes)]");
  if (a.mix.subspace_rank < 0 || a.mix.subspace_rank > a.mix.dim) throw UsageError("--subspace-rank must lie in [0, --dim]");
  if (a.holdout >= a.mix.per_class) throw UsageError("--holdout must be smaller than --per-class");

  auto mix = a.mix;
  mix.seed = derive_seed(a.seed, "mixture");
  auto spec = a.labels;
  spec.seed = derive_seed(a.seed, "labels");
  const auto all = gen_mixture(mix);
  const auto labels = gen_soft_labels(all, spec);
  Json report = base_report("synth", a.seed);
  report["timings_ms"]["generate"] = clock.lap();

  Json config;
  config["classes"] = mix.num_classes;
  config["per_class"] = mix.per_class;
  config["dim"] = mix.dim;
  config["subspace_rank"] = mix.subspace_rank;
  config["separation"] = mix.separation;
  config["spread"] = mix.spread;
  config["noise"] = mix.noise;
  config["augs"] = spec.num_augs;
  config["planted_rank"] = spec.planted_rank;
  config["rank_jitter"] = spec.rank_jitter;
  config["temperature"] = spec.temperature;
  config["label_noise"] = spec.noise;
  config["holdout"] = a.holdout;
  report["config"] = config;

  make_dir(a.out);
  const std::string provenance = "synth seed=" + std::to_string(a.seed);
  if (a.holdout > 0) {
    const auto [train, test] = split_holdout(all, a.holdout);
    const auto train_labels = labels.subset(positions_of(all, train.sample_ids));
    const auto test_labels = labels.subset(positions_of(all, test.sample_ids));
    save_dataset(a.out, train, train_labels, provenance + " split=train");
    save_dataset(a.out / "test", test, test_labels, provenance + " split=test");
    report["metrics"] = {{"train_samples", train.size()}, {"test_samples", test.size()}};
  } else {
    save_dataset(a.out, all, labels, provenance);
    report["metrics"] = {{"train_samples", all.size()}, {"test_samples", 0}};
  }
  report["timings_ms"]["write"] = clock.lap();
  write_canonical_json(report, a.out / "synth_report.json");
  std::cout << "wrote " << (a.out / kDatasetManifestName).string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- select

struct SelectArgs {
  fs::path data;
  fs::path out;
  int ipc = 0;
  double alpha = 5.0;
  double beta = 1.0;
  double epsilon_sq = 0.5;
  std::optional<double> gamma_fixed;
  Index batch = 256;
  std::string mode = "per-class";
  std::string baseline;
  int trials = 100;
  std::uint64_t seed = 0;
  std::optional<unsigned> threads;
};

void add_select(CLI::App& app, SelectArgs& a) {
  app.add_option("--data", a.data, "dataset directory or dataset.json")->required();
  app.add_option("--out", a.out, "artifact directory")->required();
  app.add_option("--ipc", a.ipc, "samples per class")->required()->check(CLI::PositiveNumber);
  app.add_option("--alpha", a.alpha, "weight of the class-conditional rate")->capture_default_str();
  app.add_option("--beta", a.beta, "weight of the label rate")->capture_default_str();
  app.add_option("--epsilon-sq", a.epsilon_sq, "distortion eps^2")->capture_default_str();
  app.add_option("--gamma-fixed", a.gamma_fixed, "pin gamma for the whole run instead of d/(n eps^2)");
  app.add_option("--batch", a.batch, "candidate batch size")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--mode", a.mode, "per-class or global-capped")
      ->check(CLI::IsMember({"per-class", "global-capped"}))
      ->capture_default_str();
  app.add_option("--baseline", a.baseline, "also score random subsets")->check(CLI::IsMember({"random"}));
  app.add_option("--trials", a.trials, "random baseline trials")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--seed", a.seed, "global seed")->capture_default_str();
  app.add_option("--threads", a.threads, "worker cap (default SCORE_THREADS or all cores)")->check(CLI::PositiveNumber);
}

int run_select(const SelectArgs& a) {
  Stopwatch clock;
  const fs::path manifest = dataset_manifest_path(a.data);
  const auto ds = load_dataset(manifest);
  Json report = base_report("select", a.seed);
  report["timings_ms"]["load"] = clock.lap();

  SelectionConfig config;
  config.ipc = a.ipc;
  config.alpha = a.alpha;
  config.beta = a.beta;
  config.params.epsilon_sq = a.epsilon_sq;
  if (a.gamma_fixed) {
    config.params.scaling = ScalingMode::Fixed;
    config.params.gamma_fixed = *a.gamma_fixed;
  }
  config.candidate_batch = a.batch;
  config.mode = a.mode == "per-class" ? SelectionMode::PerClass : SelectionMode::GlobalCapped;
  config.seed = derive_seed(a.seed, "select");
  config.threads = a.threads.value_or(default_threads());
  config.validate();

  const auto result = select(ds.features, ds.labels, config);
  report["timings_ms"]["select"] = clock.lap();

  const auto rates = precompute_label_rates(ds.labels, config.params);
  const double rate = subset_rate(ds.features, result.selected_positions, config.params);
  Json metrics;
  metrics["selected"] = result.selected_positions.size();
  metrics["full_coverage"] = static_cast<Index>(result.selected_positions.size()) == ds.features.size();
  metrics["rate_informative"] = rate;
  metrics["criterion"] =
      selection_objective(ds.features, rates, result.selected_positions, config.alpha, config.beta, config.params);
  double label_rate = 0.0;
  for (Index p : result.selected_positions) label_rate += rates[static_cast<std::size_t>(p)];
  metrics["mean_label_rate"] = label_rate / static_cast<double>(result.selected_positions.size());

  if (a.baseline == "random") {
    std::vector<double> baseline;
    const auto base_seed = derive_seed(a.seed, "baseline");
    for (int t = 0; t < a.trials; ++t)
      baseline.push_back(subset_rate(ds.features, random_subset(ds.features, a.ipc, base_seed + static_cast<std::uint64_t>(t)),
                                     config.params));
    metrics["random_rate_informative"] = summary(baseline);
    metrics["beats_random_mean"] = rate >= metrics["random_rate_informative"]["mean"].get<double>();
    report["timings_ms"]["baseline"] = clock.lap();
  }
  report["metrics"] = metrics;
  Json echo = selection_config_to_json(config);
  echo["threads"] = config.threads;
  echo["data"] = manifest.generic_string();
  report["config"] = echo;

  make_dir(a.out);
  CondensedArtifact artifact;
  artifact.dataset_manifest = fs::relative(fs::absolute(manifest), fs::absolute(a.out)).generic_string();
  artifact.dataset_checksum = checksum_file(manifest);
  artifact.selection = result;
  artifact.labels = ds.labels.subset(result.positions_by_class(ds.features));
  save_artifact(artifact, a.out);
  report["timings_ms"]["write"] = clock.lap();
  write_canonical_json(report, a.out / "select_report.json");
  std::cout << "selected " << result.selected_positions.size() << " samples into " << a.out.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- compress

struct CompressArgs {
  fs::path artifact;
  std::string method = "rpca";
  std::optional<double> ratio;
  std::optional<Index> rank;
  int bytes = 8;
  RpcaConfig rpca;
  std::uint64_t seed = 0;
  std::optional<unsigned> threads;
};

void add_compress(CLI::App& app, CompressArgs& a) {
  app.add_option("--artifact", a.artifact, "artifact directory (updated in place)")->required();
  app.add_option("--method", a.method, "rpca, svd, rsvd or cur")
      ->check(CLI::IsMember({"rpca", "svd", "rsvd", "cur"}))
      ->capture_default_str();
  auto* ratio = app.add_option("--ratio", a.ratio, "storage reduction factor");
  auto* rank = app.add_option("--rank", a.rank, "explicit rank")->check(CLI::PositiveNumber);
  ratio->excludes(rank);
  app.add_option("--bytes", a.bytes, "bytes per stored scalar")->check(CLI::IsMember({4, 8}))->capture_default_str();
  app.add_option("--rpca-tol", a.rpca.tol, "rpca relative residual tolerance")->capture_default_str();
  app.add_option("--rpca-max-iters", a.rpca.max_iters, "rpca iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--seed", a.seed, "global seed")->capture_default_str();
  app.add_option("--threads", a.threads, "worker cap (default SCORE_THREADS or all cores)")->check(CLI::PositiveNumber);
}

int run_compress(const CompressArgs& a) {
  if (!a.ratio && !a.rank) throw UsageError("exactly one of --ratio or --rank is required");
  if (a.ratio && !(*a.ratio > 1.0)) throw UsageError("--ratio must be greater than 1");
  Stopwatch clock;
  auto artifact = load_artifact(a.artifact);
  Json report = base_report("compress", a.seed);
  report["timings_ms"]["load"] = clock.lap();

  CompressionOptions options;
  options.method = parse_compression_method(a.method);
  options.ratio = a.ratio;
  options.rank = a.rank;
  options.bytes_per_scalar = a.bytes;
  options.rpca = a.rpca;
  options.rpca.validate();
  options.seed = derive_seed(a.seed, "compress");
  options.threads = a.threads.value_or(default_threads());
  const auto compressed = compress_labels(artifact.labels, options);
  report["timings_ms"]["compress"] = clock.lap();

  const auto errors = reconstruction_errors(artifact.labels, decompress_labels(compressed));
  Json config;
  config["method"] = a.method;
  if (a.ratio) config["ratio"] = *a.ratio;
  if (a.rank) config["rank"] = *a.rank;
  config["bytes_per_scalar"] = a.bytes;
  if (options.method == CompressionMethod::Rpca) config["rpca"] = {{"tol", a.rpca.tol}, {"max_iters", a.rpca.max_iters}};
  config["threads"] = options.threads;
  report["config"] = config;
  Json metrics;
  metrics["rank"] = compressed.rank;
  metrics["sparse_budget"] = compressed.sparse_budget;
  metrics["stored_bytes"] = compressed.stored_bytes;
  metrics["original_bytes"] = compressed.original_bytes;
  metrics["achieved_ratio"] = compressed.achieved_ratio();
  metrics["reconstruction_error"] = summary(errors);
  metrics["rpca_unconverged"] = compressed.rpca_unconverged;
  report["metrics"] = metrics;
  if (compressed.rpca_unconverged > 0)
    report["warnings"].push_back("rpca did not converge on " + std::to_string(compressed.rpca_unconverged) + " samples");

  artifact.compressed = compressed;
  save_artifact(artifact, a.artifact);
  report["timings_ms"]["write"] = clock.lap();
  write_canonical_json(report, a.artifact / "compress_report.json");
  for (const auto& w : report["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
  std::cout << a.method << " rank " << compressed.rank << ", ratio " << compressed.achieved_ratio() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- decompress

struct DecompressArgs {
  fs::path artifact;
  fs::path out;
  bool renormalize = false;
};

void add_decompress(CLI::App& app, DecompressArgs& a) {
  app.add_option("--artifact", a.artifact, "artifact directory with factors.bin")->required();
  app.add_option("--out", a.out, "output directory")->required();
  app.add_flag("--renormalize", a.renormalize, "clamp at zero and rescale rows to sum 1");
}

int run_decompress(const DecompressArgs& a) {
  Stopwatch clock;
  const auto artifact = load_artifact(a.artifact);
  if (!artifact.compressed) fail(ErrorCode::SchemaMismatch, "artifact has no factors.bin; run compress first");
  Json report = base_report("decompress", 0);
  report["timings_ms"]["load"] = clock.lap();
  const auto rebuilt = decompress_labels(*artifact.compressed, a.renormalize);
  report["timings_ms"]["decompress"] = clock.lap();
  report["config"] = {{"renormalize", a.renormalize}, {"method", to_string(artifact.compressed->method)}};
  report["metrics"] = {{"reconstruction_error", summary(reconstruction_errors(artifact.labels, rebuilt))},
                       {"samples", rebuilt.num_samples}};
  make_dir(a.out);
  save_tensor(to_tensor(rebuilt), a.out / "reconstructed.bin");
  report["timings_ms"]["write"] = clock.lap();
  write_canonical_json(report, a.out / "decompress_report.json");
  std::cout << "wrote " << (a.out / "reconstructed.bin").string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  fs::path artifact;
  fs::path test;
  fs::path out;
  int trials = 10;
  std::vector<double> ratios;
  std::vector<std::string> methods{"svd"};
  std::optional<fs::path> csv;
  std::uint64_t seed = 0;
  std::optional<unsigned> threads;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  app.add_option("--artifact", a.artifact, "artifact directory")->required();
  app.add_option("--test", a.test, "held-out dataset directory or dataset.json")->required();
  app.add_option("--out", a.out, "output directory")->required();
  app.add_option("--trials", a.trials, "random baseline trials")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--ratios", a.ratios, "label compression ratios to evaluate")->delimiter(',');
  app.add_option("--methods", a.methods, "compression methods for --ratios")
      ->delimiter(',')
      ->check(CLI::IsMember({"rpca", "svd", "rsvd", "cur"}))
      ->capture_default_str();
  app.add_option("--csv", a.csv, "also write a CSV table");
  app.add_option("--seed", a.seed, "global seed")->capture_default_str();
  app.add_option("--threads", a.threads, "worker cap (default SCORE_THREADS or all cores)")->check(CLI::PositiveNumber);
}

int run_eval(const EvalArgs& a) {
  for (double r : a.ratios)
    if (!(r > 1.0)) throw UsageError("--ratios entries must be greater than 1");
  Stopwatch clock;
  const auto artifact = load_artifact(a.artifact);
  const auto train = load_dataset(a.artifact / artifact.dataset_manifest);
  const auto test = load_dataset(dataset_manifest_path(a.test));
  Json report = base_report("eval", a.seed);
  report["timings_ms"]["load"] = clock.lap();

  const auto ids = flatten_ids(artifact.selection);
  const auto label_positions = positions_of(train.features, ids);
  auto sorted_positions = label_positions;
  std::sort(sorted_positions.begin(), sorted_positions.end());
  const FeatureSet condensed = train.features.subset(sorted_positions);

  std::vector<std::vector<std::string>> rows;
  auto add_row = [&](const std::string& name, const std::string& labels, double value) {
    rows.push_back({name, labels, std::to_string(value)});
  };

  Json metrics;
  const double full = eval_nearest_mean(train.features, test.features);
  const double score_acc = eval_nearest_mean(condensed, test.features);
  metrics["full_accuracy"] = full;
  metrics["condensed_accuracy"] = score_acc;
  add_row("full", "hard", full);
  add_row("condensed", "hard", score_acc);

  const int ipc = artifact.selection.config.ipc;
  std::vector<double> random_acc;
  const auto base_seed = derive_seed(a.seed, "baseline");
  for (int t = 0; t < a.trials; ++t) {
    auto pick = random_subset(train.features, ipc, base_seed + static_cast<std::uint64_t>(t));
    std::sort(pick.begin(), pick.end());
    random_acc.push_back(eval_nearest_mean(train.features.subset(pick), test.features));
  }
  metrics["random_accuracy"] = summary(random_acc);
  metrics["random_accuracy_trials"] = random_acc;
  add_row("random_mean", "hard", metrics["random_accuracy"]["mean"].get<double>());
  report["timings_ms"]["hard_labels"] = clock.lap();

  // Soft-label centroids use the artifact's label order (class by class, pick order).
  const FeatureSet in_label_order = train.features.subset(label_positions);
  const double soft = eval_soft_centroid(in_label_order, artifact.labels, test.features);
  metrics["soft_accuracy"] = soft;
  add_row("condensed", "soft", soft);

  Json compressed = Json::array();
  const unsigned threads = a.threads.value_or(default_threads());
  for (const auto& method : a.methods) {
    for (double ratio : a.ratios) {
      CompressionOptions options;
      options.method = parse_compression_method(method);
      options.ratio = ratio;
      options.seed = derive_seed(a.seed, "compress");
      options.threads = threads;
      const auto c = compress_labels(artifact.labels, options);
      const auto rebuilt = decompress_labels(c, true);
      const double acc = eval_soft_centroid(in_label_order, rebuilt, test.features);
      Json entry;
      entry["method"] = method;
      entry["ratio"] = ratio;
      entry["rank"] = c.rank;
      entry["achieved_ratio"] = c.achieved_ratio();
      entry["accuracy"] = acc;
      entry["reconstruction_error"] = summary(reconstruction_errors(artifact.labels, decompress_labels(c)));
      entry["rpca_unconverged"] = c.rpca_unconverged;
      if (c.rpca_unconverged > 0)
        report["warnings"].push_back(method + " at " + std::to_string(ratio) + "x: rpca did not converge on " +
                                     std::to_string(c.rpca_unconverged) + " samples");
      compressed.push_back(entry);
      add_row("condensed", method + "@" + std::to_string(ratio), acc);
    }
  }
  metrics["compressed"] = compressed;
  report["metrics"] = metrics;
  report["timings_ms"]["soft_labels"] = clock.lap();

  Json config;
  config["trials"] = a.trials;
  config["ratios"] = a.ratios;
  config["methods"] = a.methods;
  config["ipc"] = ipc;
  config["threads"] = threads;
  report["config"] = config;

  make_dir(a.out);
  write_canonical_json(report, a.out / "eval_report.json");
  if (a.csv) {
    std::ofstream csv(*a.csv, std::ios::trunc);
    if (!csv) fail(ErrorCode::Io, "cannot write " + a.csv->string());
    csv << "subset,labels,accuracy\n";
    for (const auto& row : rows) csv << row[0] << ',' << row[1] << ',' << row[2] << '\n';
  }
  for (const auto& w : report["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
  std::cout << "condensed " << score_acc << ", random " << metrics["random_accuracy"]["mean"].get<double>() << ", full "
            << full << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coding-rate subset selection and soft-label compression"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  SynthArgs synth;
  SelectArgs sel;
  CompressArgs comp;
  DecompressArgs decomp;
  EvalArgs ev;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset with soft labels");
  add_synth(*synth_cmd, synth);
  auto* select_cmd = app.add_subcommand("select", "greedy subset selection into an artifact");
  add_select(*select_cmd, sel);
  auto* compress_cmd = app.add_subcommand("compress", "compress an artifact's soft labels");
  add_compress(*compress_cmd, comp);
  auto* decompress_cmd = app.add_subcommand("decompress", "rebuild soft labels from factors.bin");
  add_decompress(*decompress_cmd, decomp);
  auto* eval_cmd = app.add_subcommand("eval", "nearest-mean accuracy of an artifact");
  add_eval(*eval_cmd, ev);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(synth);
    if (select_cmd->parsed()) return run_select(sel);
    if (compress_cmd->parsed()) return run_compress(comp);
    if (decompress_cmd->parsed()) return run_decompress(decomp);
    if (eval_cmd->parsed()) return run_eval(ev);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}
