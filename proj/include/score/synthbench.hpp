#ifndef SCORE_SYNTHBENCH_HPP
#define SCORE_SYNTHBENCH_HPP

/**
 * @file synthbench.hpp
 * @brief Seeded generators with planted structure, exhaustive oracles and
 *        desk-scale evaluation metrics.
 */

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "score/selector.hpp"

namespace score {

/// Class j draws center_j + U_j g + noise, U_j a seeded orthonormal d x subspace_rank basis.
struct MixtureSpec {
  int num_classes = 10;
  int per_class = 500;
  Index dim = 32;
  Index subspace_rank = 4;
  double separation = 2.0;  // norm of each class center
  double spread = 1.5;      // scale of the in-subspace coefficients g
  double noise = 0.5;       // isotropic noise standard deviation
  std::uint64_t seed = 0;

  void validate() const;
};

FeatureSet gen_mixture(const MixtureSpec& spec);

/// Moves the last `test_per_class` samples of every class into the second set.
std::pair<FeatureSet, FeatureSet> split_holdout(const FeatureSet& set, int test_per_class);

/**
 * Soft labels. Sample i gets r prototype distributions
 *
 *     p_m = softmax((class_bias e_{y_i} + mode_scale b_m) / temperature)
 *
 * with b_m = e_{peak_m} + mode_jitter N(0, I), peak_0 = y_i and the other
 * peaks distinct seeded classes. View k mixes them with weights
 * w_k = (1 - view_mix) e_{k mod r} + view_mix d_k, d_k a seeded point of the
 * simplex, and is perturbed in log space:
 *
 *     y_k = softmax(log(sum_m w_km p_m) + noise N(0, I)).
 *
 * At noise = 0 every Y_i = W P has rank at most r; with rank_jitter, r is
 * drawn uniformly from [1, planted_rank] per sample.
 */
struct LabelGenSpec {
  Index num_augs = 16;
  double temperature = 1.0;
  Index planted_rank = 2;
  bool rank_jitter = false;
  double noise = 0.0;
  double class_bias = 2.0;
  double mode_scale = 8.0;
  double view_mix = 0.1;
  double mode_jitter = 0.1;  // std of the Gaussian part of b_m
  std::uint64_t seed = 0;

  void validate(Index num_classes) const;
};

SoftLabelStack gen_soft_labels(const FeatureSet& features, const LabelGenSpec& spec);

/// Planted ranks actually used per sample (matches gen_soft_labels for the same spec).
std::vector<Index> planted_ranks(const FeatureSet& features, const LabelGenSpec& spec);

struct BruteForceResult {
  std::vector<Index> positions;  // sorted ascending
  double value = 0.0;
  std::uint64_t subsets_evaluated = 0;
};

/// Exhaustive maximizer of the full criterion over all ipc-per-class subsets (n <= 16, ipc <= 4).
BruteForceResult brute_force_select(const FeatureSet& features, const SoftLabelStack& stack,
                                    const SelectionConfig& config);

/// Nearest class mean; ties go to the lowest class id.
double eval_nearest_mean(const FeatureSet& train, const FeatureSet& test);

/// Nearest centroid where class j's centroid weights sample i by its mean soft-label mass on j.
double eval_soft_centroid(const FeatureSet& train, const SoftLabelStack& train_labels, const FeatureSet& test);

struct PlantedRpca {
  Eigen::MatrixXd observed;   // M = L0 + S0
  Eigen::MatrixXd low_rank;   // L0
  Eigen::MatrixXd sparse;     // S0
};

PlantedRpca planted_rpca_instance(Index rows, Index cols, Index rank, double sparse_fraction, double spike_scale,
                                  std::uint64_t seed);

/// ||M||_F^2 / sigma_1^2.
double stable_rank(const Eigen::MatrixXd& m);

/// Stage seed derived as FNV-1a(stage) xor seed.
std::uint64_t derive_seed(std::uint64_t seed, const char* stage);

}  // namespace score

#endif  // SCORE_SYNTHBENCH_HPP
