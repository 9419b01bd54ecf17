#ifndef SCORE_SELECTOR_HPP
#define SCORE_SELECTOR_HPP

/**
 * @file selector.hpp
 * @brief Greedy subset selection under R_I - alpha R_D - beta R_C.
 */

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "score/coding_rate.hpp"

namespace score {

using SampleId = std::uint64_t;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Feature columns with per-column class labels and ids.
struct FeatureSet {
  Eigen::MatrixXd features;  // d x n
  std::vector<int> labels;
  std::vector<SampleId> sample_ids;
  int num_classes = 0;

  Index dim() const { return features.rows(); }
  Index size() const { return features.cols(); }

  void validate() const;
  /// Positions of every sample of class `c`, ascending.
  std::vector<Index> class_members(int c) const;
  FeatureSet subset(std::span<const Index> positions) const;
};

/// Per-sample K x C soft-label matrices, sample-major, each K x C block row-major.
struct SoftLabelStack {
  Index num_samples = 0;
  Index num_augs = 0;
  Index num_classes = 0;
  std::vector<double> data;

  SoftLabelStack() = default;
  SoftLabelStack(Index n, Index k, Index c) : num_samples(n), num_augs(k), num_classes(c), data(n * k * c, 0.0) {}

  Eigen::Map<const RowMajorMatrix> sample(Index i) const {
    return {data.data() + i * num_augs * num_classes, num_augs, num_classes};
  }
  Eigen::Map<RowMajorMatrix> sample(Index i) {
    return {data.data() + i * num_augs * num_classes, num_augs, num_classes};
  }

  /// Shape and simplex checks (rows non-negative, summing to 1 within `tol`).
  void validate(double tol = 1e-6) const;
  SoftLabelStack subset(std::span<const Index> positions) const;
};

enum class SelectionMode { PerClass, GlobalCapped };

struct SelectionConfig {
  int ipc = 10;
  double alpha = 5.0;
  double beta = 1.0;
  CodingRateParams params{};
  Index candidate_batch = 256;
  SelectionMode mode = SelectionMode::PerClass;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
};

struct SelectionResult {
  std::vector<std::vector<SampleId>> selected_ids;  // grouped per class, in pick order
  std::vector<Index> selected_positions;           // all picks, in pick order
  std::vector<double> per_round_scores;
  SelectionConfig config;
  double elapsed_ms = 0.0;

  /// Selected positions grouped per class, flattened class by class.
  std::vector<Index> positions_by_class(const FeatureSet& features) const;
};

/// R_C of every sample, computed once.
std::vector<double> precompute_label_rates(const SoftLabelStack& stack, const CodingRateParams& params);

/**
 * Own-class contribution to R_D for one round. With n' = |X'| + 1 and
 * n'_c = n_c + 1 the post-insertion counts,
 *
 *     weight = n'_c / n'
 *     offset = weight R(Z_c; gamma(n'_c)) - (n_c / n') R(Z_c; gamma(n_c))
 *
 * so that R_D(X' + x) = sum_j (n_j / n') R(Z_j; gamma(n_j)) + offset + weight * gain_c(x).
 */
struct ClassRoundTerm {
  double weight = 1.0;
  double offset = 0.0;
};

/// Delta R_I - alpha Delta R_D - beta R_C(Y) for one candidate. Both states must be refreshed.
double score_candidate(const GramState<double>& global, const GramState<double>& own_class,
                       const ClassRoundTerm& class_term, const Eigen::Ref<const Eigen::VectorXd>& feature,
                       double label_rate, double alpha, double beta);

/// Full criterion of a set: R_I(Z_S) - alpha R_D(Z_S) - beta sum_{i in S} R_C(Y_i).
double selection_objective(const FeatureSet& features, std::span<const double> label_rates,
                           std::span<const Index> positions, double alpha, double beta,
                           const CodingRateParams& params);

SelectionResult select(const FeatureSet& features, const SoftLabelStack& stack, const SelectionConfig& config);

/// Uniformly random ipc-per-class subset, for baselines.
std::vector<Index> random_subset(const FeatureSet& features, int ipc, std::uint64_t seed);

}  // namespace score

#endif  // SCORE_SELECTOR_HPP
