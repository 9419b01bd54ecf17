#include "score/selector.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <random>
#include <thread>
#include <unordered_set>

namespace score {

namespace {

// 1/2 ln det(I + gamma G) for an accumulated Gram matrix.
double rate_of_gram(const Eigen::MatrixXd& gram, double gamma) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
  a.noalias() += gamma * gram;
  return 0.5 * detail::logdet_from_lower(detail::cholesky_lower(a));
}

// Uniform draw of `count` items from `pool` without replacement (partial Fisher-Yates).
std::vector<Index> draw_batch(const std::vector<Index>& pool, Index count, std::mt19937_64& rng) {
  if (static_cast<Index>(pool.size()) <= count) return pool;
  std::vector<Index> work = pool;
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), work.size() - 1);
    std::swap(work[static_cast<std::size_t>(i)], work[pick(rng)]);
  }
  work.resize(static_cast<std::size_t>(count));
  return work;
}

class GreedyRun {
 public:
  GreedyRun(const FeatureSet& features, const SelectionConfig& config, std::vector<double> label_rates)
      : features_(features),
        config_(config),
        label_rates_(std::move(label_rates)),
        class_counts_(static_cast<std::size_t>(features.num_classes), 0) {
    const Index d = features.dim();
    const double initial_gamma = config.params.gamma(d, 1);
    global_ = GramState<double>(d, initial_gamma, config.params.scaling);
    class_states_.assign(static_cast<std::size_t>(features.num_classes),
                         GramState<double>(d, initial_gamma, config.params.scaling));
  }

  /// Scores `batch`, inserts the winner and returns its position.
  Index pick(const std::vector<Index>& batch, double& best_score) {
    const Index d = features_.dim();
    const Index n_after = total_ + 1;
    const bool adaptive = config_.params.scaling == ScalingMode::Adaptive;
    if (adaptive) global_.refresh(config_.params.gamma(d, n_after));

    std::vector<ClassRoundTerm> terms(class_states_.size());
    std::vector<char> prepared(class_states_.size(), 0);
    for (Index p : batch) {
      const auto c = static_cast<std::size_t>(features_.labels[static_cast<std::size_t>(p)]);
      if (prepared[c]) continue;
      prepared[c] = 1;
      const Index nc = class_counts_[c];
      auto& state = class_states_[c];
      double rate_after = 0.0;
      double rate_before = 0.0;
      if (adaptive) {
        state.refresh(config_.params.gamma(d, nc + 1));
        rate_after = state.coding_rate();
        rate_before = nc == 0 ? 0.0 : rate_of_gram(state.gram(), config_.params.gamma(d, nc));
      } else {
        rate_after = rate_before = state.coding_rate();
      }
      const double denom = static_cast<double>(n_after);
      terms[c].weight = static_cast<double>(nc + 1) / denom;
      terms[c].offset = terms[c].weight * rate_after - (static_cast<double>(nc) / denom) * rate_before;
    }

    std::vector<double> scores(batch.size());
    auto score_range = [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const Index p = batch[i];
        const auto c = static_cast<std::size_t>(features_.labels[static_cast<std::size_t>(p)]);
        scores[i] = score_candidate(global_, class_states_[c], terms[c], features_.features.col(p),
                                    label_rates_[static_cast<std::size_t>(p)], config_.alpha, config_.beta);
      }
    };
    const std::size_t workers = std::min<std::size_t>(std::max(1u, config_.threads), batch.size() / 64 + 1);
    if (workers <= 1) {
      score_range(0, batch.size());
    } else {
      std::vector<std::exception_ptr> errors(workers);
      std::vector<std::thread> pool;
      const std::size_t chunk = (batch.size() + workers - 1) / workers;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            score_range(w * chunk, std::min(batch.size(), (w + 1) * chunk));
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& t : pool) t.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < batch.size(); ++i) {
      const SampleId id = features_.sample_ids[static_cast<std::size_t>(batch[i])];
      const SampleId best_id = features_.sample_ids[static_cast<std::size_t>(batch[best])];
      if (scores[i] > scores[best] || (scores[i] == scores[best] && id < best_id)) best = i;
    }

    const Index winner = batch[best];
    const auto c = static_cast<std::size_t>(features_.labels[static_cast<std::size_t>(winner)]);
    global_.insert(features_.features.col(winner));
    class_states_[c].insert(features_.features.col(winner));
    ++class_counts_[c];
    ++total_;
    best_score = scores[best];
    return winner;
  }

 private:
  const FeatureSet& features_;
  const SelectionConfig& config_;
  std::vector<double> label_rates_;
  GramState<double> global_;
  std::vector<GramState<double>> class_states_;
  std::vector<Index> class_counts_;
  Index total_ = 0;
};

}  // namespace

void FeatureSet::validate() const {
  if (num_classes < 1) fail(ErrorCode::InvalidArgument, "num_classes must be positive");
  const auto n = static_cast<std::size_t>(features.cols());
  if (labels.size() != n || sample_ids.size() != n)
    fail(ErrorCode::DimensionMismatch, "labels/sample_ids length differs from feature columns");
  if (!features.allFinite()) fail(ErrorCode::NonFinite, "features contain non-finite entries");
  for (int label : labels)
    if (label < 0 || label >= num_classes) fail(ErrorCode::LabelOutOfRange, "class label outside [0, num_classes)");
  std::unordered_set<SampleId> seen(sample_ids.begin(), sample_ids.end());
  if (seen.size() != sample_ids.size()) fail(ErrorCode::InvalidArgument, "sample ids are not unique");
}

std::vector<Index> FeatureSet::class_members(int c) const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == c) out.push_back(static_cast<Index>(i));
  return out;
}

FeatureSet FeatureSet::subset(std::span<const Index> positions) const {
  FeatureSet out;
  out.num_classes = num_classes;
  out.features.resize(features.rows(), static_cast<Index>(positions.size()));
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const Index p = positions[i];
    out.features.col(static_cast<Index>(i)) = features.col(p);
    out.labels.push_back(labels[static_cast<std::size_t>(p)]);
    out.sample_ids.push_back(sample_ids[static_cast<std::size_t>(p)]);
  }
  return out;
}

void SoftLabelStack::validate(double tol) const {
  if (num_samples < 0 || num_augs < 1 || num_classes < 1)
    fail(ErrorCode::InvalidArgument, "soft-label stack needs K >= 1 and C >= 1");
  if (static_cast<Index>(data.size()) != num_samples * num_augs * num_classes)
    fail(ErrorCode::DimensionMismatch, "soft-label payload length differs from n*K*C");
  for (double v : data)
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "soft labels contain non-finite entries");
  for (Index i = 0; i < num_samples; ++i) {
    const auto y = sample(i);
    if (y.minCoeff() < -tol) fail(ErrorCode::InvalidArgument, "soft-label entry is negative");
    const Eigen::VectorXd sums = y.rowwise().sum();
    if ((sums.array() - 1.0).abs().maxCoeff() > tol) fail(ErrorCode::InvalidArgument, "soft-label row does not sum to 1");
  }
}

SoftLabelStack SoftLabelStack::subset(std::span<const Index> positions) const {
  SoftLabelStack out(static_cast<Index>(positions.size()), num_augs, num_classes);
  for (std::size_t i = 0; i < positions.size(); ++i) out.sample(static_cast<Index>(i)) = sample(positions[i]);
  return out;
}

void SelectionConfig::validate() const {
  if (ipc < 1) fail(ErrorCode::InvalidParams, "ipc must be at least 1");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) fail(ErrorCode::InvalidParams, "alpha must be >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) fail(ErrorCode::InvalidParams, "beta must be >= 0");
  if (candidate_batch < 1) fail(ErrorCode::InvalidParams, "candidate_batch must be >= 1");
  params.validate();
}

std::vector<Index> SelectionResult::positions_by_class(const FeatureSet& features) const {
  std::vector<Index> out;
  for (int c = 0; c < features.num_classes; ++c)
    for (Index p : selected_positions)
      if (features.labels[static_cast<std::size_t>(p)] == c) out.push_back(p);
  return out;
}

std::vector<double> precompute_label_rates(const SoftLabelStack& stack, const CodingRateParams& params) {
  std::vector<double> rates(static_cast<std::size_t>(stack.num_samples));
  for (Index i = 0; i < stack.num_samples; ++i) rates[static_cast<std::size_t>(i)] = label_coding_rate(stack.sample(i), params);
  return rates;
}

double score_candidate(const GramState<double>& global, const GramState<double>& own_class,
                       const ClassRoundTerm& class_term, const Eigen::Ref<const Eigen::VectorXd>& feature,
                       double label_rate, double alpha, double beta) {
  const double informativeness = global.marginal_gain(feature);
  if (alpha == 0.0 && beta == 0.0) return informativeness;
  double discriminative = 0.0;
  if (alpha != 0.0) discriminative = class_term.offset + class_term.weight * own_class.marginal_gain(feature);
  return informativeness - alpha * discriminative - beta * label_rate;
}

double selection_objective(const FeatureSet& features, std::span<const double> label_rates,
                           std::span<const Index> positions, double alpha, double beta,
                           const CodingRateParams& params) {
  if (positions.empty()) return 0.0;
  const std::vector<Index> cols(positions.begin(), positions.end());
  const Eigen::MatrixXd z = features.features(Eigen::all, cols);
  double value = coding_rate(z, params);
  if (alpha != 0.0) {
    std::vector<int> labels;
    for (Index p : positions) labels.push_back(features.labels[static_cast<std::size_t>(p)]);
    value -= alpha * class_coding_rate(z, labels, features.num_classes, params);
  }
  if (beta != 0.0) {
    double label_total = 0.0;
    for (Index p : positions) label_total += label_rates[static_cast<std::size_t>(p)];
    value -= beta * label_total;
  }
  return value;
}

SelectionResult select(const FeatureSet& features, const SoftLabelStack& stack, const SelectionConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  features.validate();
  stack.validate();
  if (stack.num_samples != features.size())
    fail(ErrorCode::DimensionMismatch, "soft-label stack is not aligned with the feature set");

  const auto num_classes = static_cast<std::size_t>(features.num_classes);
  std::vector<std::vector<Index>> pools(num_classes);
  for (int c = 0; c < features.num_classes; ++c) {
    pools[static_cast<std::size_t>(c)] = features.class_members(c);
    if (static_cast<int>(pools[static_cast<std::size_t>(c)].size()) < config.ipc)
      fail(ErrorCode::InsufficientSamples, "class " + std::to_string(c) + " has fewer than ipc samples");
  }

  SelectionResult result;
  result.config = config;
  result.selected_ids.assign(num_classes, {});

  GreedyRun run(features, config, precompute_label_rates(stack, config.params));
  std::mt19937_64 rng(config.seed);

  auto commit = [&](Index winner, double score) {
    const auto c = static_cast<std::size_t>(features.labels[static_cast<std::size_t>(winner)]);
    auto& pool = pools[c];
    pool.erase(std::find(pool.begin(), pool.end(), winner));
    result.selected_ids[c].push_back(features.sample_ids[static_cast<std::size_t>(winner)]);
    result.selected_positions.push_back(winner);
    result.per_round_scores.push_back(score);
  };

  if (config.mode == SelectionMode::PerClass) {
    // Classes take turns so every pick sees the whole selected set in R_I
    // and the own-class weight n_c / n stays near 1 / C.
    for (int round = 0; round < config.ipc; ++round) {
      for (std::size_t c = 0; c < num_classes; ++c) {
        const auto batch = draw_batch(pools[c], config.candidate_batch, rng);
        double score = 0.0;
        const Index winner = run.pick(batch, score);
        commit(winner, score);
      }
    }
  } else {
    const auto budget = static_cast<std::size_t>(config.ipc) * num_classes;
    while (result.selected_positions.size() < budget) {
      std::vector<Index> eligible;
      for (std::size_t c = 0; c < num_classes; ++c)
        if (static_cast<int>(result.selected_ids[c].size()) < config.ipc)
          eligible.insert(eligible.end(), pools[c].begin(), pools[c].end());
      std::sort(eligible.begin(), eligible.end());
      const auto batch = draw_batch(eligible, config.candidate_batch, rng);
      double score = 0.0;
      const Index winner = run.pick(batch, score);
      commit(winner, score);
    }
  }

  result.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<Index> random_subset(const FeatureSet& features, int ipc, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Index> out;
  for (int c = 0; c < features.num_classes; ++c) {
    const auto members = features.class_members(c);
    if (static_cast<int>(members.size()) < ipc)
      fail(ErrorCode::InsufficientSamples, "class " + std::to_string(c) + " has fewer than ipc samples");
    const auto picked = draw_batch(members, ipc, rng);
    out.insert(out.end(), picked.begin(), picked.end());
  }
  return out;
}

}  // namespace score
