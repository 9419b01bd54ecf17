#include "score/synthbench.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <string_view>

#include "score/coding_rate.hpp"

namespace score {

namespace {

Eigen::MatrixXd gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::ArrayXd shifted = (logits.array() - logits.maxCoeff()).exp();
  return (shifted / shifted.sum()).matrix();
}

std::mt19937_64 sample_rng(std::uint64_t seed, Index sample) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(sample), static_cast<std::uint32_t>(static_cast<std::uint64_t>(sample) >> 32)};
  return std::mt19937_64(seq);
}

Index draw_rank(const LabelGenSpec& spec, std::mt19937_64& rng) {
  if (!spec.rank_jitter) return spec.planted_rank;
  std::uniform_int_distribution<Index> pick(1, spec.planted_rank);
  return pick(rng);
}

Eigen::MatrixXd class_means(const FeatureSet& train) {
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(train.dim(), train.num_classes);
  std::vector<Index> counts(static_cast<std::size_t>(train.num_classes), 0);
  for (Index i = 0; i < train.size(); ++i) {
    const int c = train.labels[static_cast<std::size_t>(i)];
    means.col(c) += train.features.col(i);
    ++counts[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < train.num_classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) fail(ErrorCode::MissingClass, "class " + std::to_string(c) + " absent from training set");
    means.col(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }
  return means;
}

double nearest_centroid_accuracy(const Eigen::MatrixXd& centroids, const FeatureSet& test) {
  if (test.size() == 0) return 0.0;
  if (centroids.rows() != test.dim()) fail(ErrorCode::DimensionMismatch, "train and test feature dims differ");
  if (test.num_classes > centroids.cols())
    fail(ErrorCode::DimensionMismatch, "test set has " + std::to_string(test.num_classes) + " classes, training has " +
                                           std::to_string(centroids.cols()));
  Index correct = 0;
  for (Index i = 0; i < test.size(); ++i) {
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < centroids.cols(); ++c) {
      const double dist = (centroids.col(c) - test.features.col(i)).squaredNorm();
      if (dist < best_dist) {
        best_dist = dist;
        best = static_cast<int>(c);
      }
    }
    if (best == test.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

// Calls visit(combination) for every k-subset of `items`, lexicographic order.
template <typename Visit>
void for_each_combination(const std::vector<Index>& items, int k, Visit&& visit) {
  const int n = static_cast<int>(items.size());
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::vector<Index> combo(static_cast<std::size_t>(k));
  while (true) {
    for (int i = 0; i < k; ++i) combo[static_cast<std::size_t>(i)] = items[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    visit(combo);
    int i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

}  // namespace

void MixtureSpec::validate() const {
  if (num_classes < 1 || per_class < 1 || dim < 1) fail(ErrorCode::InvalidSpec, "mixture counts must be >= 1");
  if (subspace_rank < 0 || subspace_rank > dim) fail(ErrorCode::InvalidSpec, "subspace_rank must lie in [0, dim]");
  if (!(separation >= 0.0) || !(spread >= 0.0) || !(noise >= 0.0)) fail(ErrorCode::InvalidSpec, "scales must be >= 0");
}

FeatureSet gen_mixture(const MixtureSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  FeatureSet out;
  out.num_classes = spec.num_classes;
  const Index n = static_cast<Index>(spec.num_classes) * spec.per_class;
  out.features.resize(spec.dim, n);
  Index col = 0;
  for (int c = 0; c < spec.num_classes; ++c) {
    Eigen::VectorXd center = gaussian(spec.dim, 1, rng).col(0);
    center *= spec.separation / center.norm();
    Eigen::MatrixXd basis(spec.dim, spec.subspace_rank);
    if (spec.subspace_rank > 0) {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(spec.dim, spec.subspace_rank, rng));
      basis = qr.householderQ() * Eigen::MatrixXd::Identity(spec.dim, spec.subspace_rank);
    }
    for (int i = 0; i < spec.per_class; ++i, ++col) {
      Eigen::VectorXd x = center;
      if (spec.subspace_rank > 0) x += basis * (spec.spread * gaussian(spec.subspace_rank, 1, rng).col(0));
      if (spec.noise > 0.0) x += spec.noise * gaussian(spec.dim, 1, rng).col(0);
      out.features.col(col) = x;
      out.labels.push_back(c);
      out.sample_ids.push_back(static_cast<SampleId>(col));
    }
  }
  return out;
}

std::pair<FeatureSet, FeatureSet> split_holdout(const FeatureSet& set, int test_per_class) {
  std::vector<Index> train, test;
  for (int c = 0; c < set.num_classes; ++c) {
    const auto members = set.class_members(c);
    if (static_cast<int>(members.size()) <= test_per_class)
      fail(ErrorCode::InvalidSpec, "held-out split leaves class " + std::to_string(c) + " empty");
    const auto cut = members.size() - static_cast<std::size_t>(test_per_class);
    train.insert(train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(cut));
    test.insert(test.end(), members.begin() + static_cast<std::ptrdiff_t>(cut), members.end());
  }
  return {set.subset(train), set.subset(test)};
}

void LabelGenSpec::validate(Index num_classes) const {
  if (num_augs < 1) fail(ErrorCode::InvalidSpec, "num_augs must be >= 1");
  if (!(temperature > 0.0)) fail(ErrorCode::InvalidSpec, "temperature must be positive");
  if (planted_rank < 1 || planted_rank > std::min(num_augs, num_classes))
    fail(ErrorCode::InvalidSpec, "planted_rank must lie in [1, min(K, C)]");
  if (!(noise >= 0.0) || !(mode_scale >= 0.0) || !(mode_jitter >= 0.0) || !std::isfinite(class_bias))
    fail(ErrorCode::InvalidSpec, "noise, mode_scale and mode_jitter must be >= 0");
  if (!(view_mix >= 0.0 && view_mix <= 1.0)) fail(ErrorCode::InvalidSpec, "view_mix must lie in [0, 1]");
}

std::vector<Index> planted_ranks(const FeatureSet& features, const LabelGenSpec& spec) {
  spec.validate(features.num_classes);
  std::vector<Index> ranks;
  for (Index i = 0; i < features.size(); ++i) {
    auto rng = sample_rng(spec.seed, i);
    ranks.push_back(draw_rank(spec, rng));
  }
  return ranks;
}

SoftLabelStack gen_soft_labels(const FeatureSet& features, const LabelGenSpec& spec) {
  features.validate();
  const Index classes = features.num_classes;
  spec.validate(classes);
  SoftLabelStack out(features.size(), spec.num_augs, classes);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  for (Index i = 0; i < features.size(); ++i) {
    auto rng = sample_rng(spec.seed, i);
    const Index rank = draw_rank(spec, rng);
    // Prototype 0 peaks on the true class, the others on distinct confusions.
    const int truth = features.labels[static_cast<std::size_t>(i)];
    std::vector<Index> peaks{truth};
    for (Index c = 0; c < classes; ++c)
      if (c != truth) peaks.push_back(c);
    std::shuffle(peaks.begin() + 1, peaks.end(), rng);
    Eigen::MatrixXd logits = spec.mode_jitter * gaussian(rank, classes, rng);
    for (Index m = 0; m < rank; ++m) logits(m, peaks[static_cast<std::size_t>(m)]) += 1.0;
    logits *= spec.mode_scale;
    logits.col(truth).array() += spec.class_bias;
    Eigen::MatrixXd protos(rank, classes);
    for (Index m = 0; m < rank; ++m) protos.row(m) = softmax(logits.row(m).transpose() / spec.temperature).transpose();

    auto y = out.sample(i);
    Eigen::VectorXd w(rank);
    for (Index k = 0; k < spec.num_augs; ++k) {
      for (Index m = 0; m < rank; ++m) w(m) = expo(rng);
      w *= spec.view_mix / w.sum();
      w(k % rank) += 1.0 - spec.view_mix;
      Eigen::VectorXd row = protos.transpose() * w;
      if (spec.noise > 0.0) {
        Eigen::VectorXd perturbed = row.array().log().matrix();
        for (Index c = 0; c < classes; ++c) perturbed(c) += spec.noise * normal(rng);
        row = softmax(perturbed);
      }
      y.row(k) = row.transpose();
    }
  }
  return out;
}

BruteForceResult brute_force_select(const FeatureSet& features, const SoftLabelStack& stack,
                                    const SelectionConfig& config) {
  config.validate();
  features.validate();
  if (features.size() > 16 || config.ipc > 4)
    fail(ErrorCode::InstanceTooLarge, "exhaustive search is capped at n <= 16 and ipc <= 4");
  if (stack.num_samples != features.size()) fail(ErrorCode::DimensionMismatch, "labels are not aligned with features");
  const auto rates = precompute_label_rates(stack, config.params);

  std::vector<std::vector<std::vector<Index>>> per_class;
  for (int c = 0; c < features.num_classes; ++c) {
    const auto members = features.class_members(c);
    if (static_cast<int>(members.size()) < config.ipc)
      fail(ErrorCode::InsufficientSamples, "class " + std::to_string(c) + " has fewer than ipc samples");
    std::vector<std::vector<Index>> options;
    for_each_combination(members, config.ipc, [&](const std::vector<Index>& combo) { options.push_back(combo); });
    per_class.push_back(std::move(options));
  }

  BruteForceResult best;
  best.value = -std::numeric_limits<double>::infinity();
  std::vector<SampleId> best_ids;
  std::vector<std::size_t> choice(per_class.size(), 0);
  while (true) {
    std::vector<Index> positions;
    for (std::size_t c = 0; c < per_class.size(); ++c)
      positions.insert(positions.end(), per_class[c][choice[c]].begin(), per_class[c][choice[c]].end());
    std::sort(positions.begin(), positions.end());
    const double value = selection_objective(features, rates, positions, config.alpha, config.beta, config.params);
    ++best.subsets_evaluated;
    std::vector<SampleId> ids;
    for (Index p : positions) ids.push_back(features.sample_ids[static_cast<std::size_t>(p)]);
    std::sort(ids.begin(), ids.end());
    if (value > best.value || (value == best.value && ids < best_ids)) {
      best.value = value;
      best.positions = positions;
      best_ids = ids;
    }
    std::size_t c = 0;
    while (c < choice.size() && ++choice[c] == per_class[c].size()) choice[c++] = 0;
    if (c == choice.size()) break;
  }
  return best;
}

double eval_nearest_mean(const FeatureSet& train, const FeatureSet& test) {
  return nearest_centroid_accuracy(class_means(train), test);
}

double eval_soft_centroid(const FeatureSet& train, const SoftLabelStack& train_labels, const FeatureSet& test) {
  if (train_labels.num_samples != train.size() || train_labels.num_classes != train.num_classes)
    fail(ErrorCode::DimensionMismatch, "soft labels are not aligned with the training set");
  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(train.dim(), train.num_classes);
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(train.num_classes);
  for (Index i = 0; i < train.size(); ++i) {
    const Eigen::VectorXd w = train_labels.sample(i).colwise().mean().transpose().cwiseMax(0.0);
    centroids += train.features.col(i) * w.transpose();
    mass += w;
  }
  for (Index c = 0; c < train.num_classes; ++c) {
    if (!(mass(c) > 0.0)) fail(ErrorCode::MissingClass, "class " + std::to_string(c) + " carries no label mass");
    centroids.col(c) /= mass(c);
  }
  return nearest_centroid_accuracy(centroids, test);
}

PlantedRpca planted_rpca_instance(Index rows, Index cols, Index rank, double sparse_fraction, double spike_scale,
                                  std::uint64_t seed) {
  if (rows < 1 || cols < 1 || rank < 1 || rank > std::min(rows, cols)) fail(ErrorCode::InvalidSpec, "rank must lie in [1, min(rows, cols)]");
  if (!(sparse_fraction >= 0.0 && sparse_fraction <= 0.2)) fail(ErrorCode::InvalidSpec, "sparse_fraction must lie in [0, 0.2]");
  if (!(spike_scale >= 0.0)) fail(ErrorCode::InvalidSpec, "spike_scale must be >= 0");
  std::mt19937_64 rng(seed);
  PlantedRpca out;
  out.low_rank = gaussian(rows, rank, rng) * gaussian(cols, rank, rng).transpose();
  const double sigma1 = Eigen::BDCSVD<Eigen::MatrixXd>(out.low_rank).singularValues()(0);
  out.sparse = Eigen::MatrixXd::Zero(rows, cols);
  const auto total = static_cast<std::size_t>(rows * cols);
  const auto spikes = static_cast<std::size_t>(std::llround(sparse_fraction * static_cast<double>(total)));
  std::vector<std::size_t> cells(total);
  for (std::size_t i = 0; i < total; ++i) cells[i] = i;
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < spikes; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, total - 1);
    std::swap(cells[i], cells[pick(rng)]);
    const auto r = static_cast<Index>(cells[i] / static_cast<std::size_t>(cols));
    const auto c = static_cast<Index>(cells[i] % static_cast<std::size_t>(cols));
    out.sparse(r, c) = (coin(rng) ? 1.0 : -1.0) * spike_scale * sigma1;
  }
  out.observed = out.low_rank + out.sparse;
  return out;
}

double stable_rank(const Eigen::MatrixXd& m) {
  const double s1 = Eigen::BDCSVD<Eigen::MatrixXd>(m).singularValues()(0);
  return s1 > 0.0 ? m.squaredNorm() / (s1 * s1) : 0.0;
}

std::uint64_t derive_seed(std::uint64_t seed, const char* stage) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* p = stage; *p; ++p) {
    h ^= static_cast<std::uint8_t>(*p);
    h *= 0x100000001b3ULL;
  }
  return h ^ seed;
}

}  // namespace score
