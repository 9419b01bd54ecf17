#ifndef SCORE_CODING_RATE_HPP
#define SCORE_CODING_RATE_HPP

/**
 * @file coding_rate.hpp
 * @brief Log-det coding-rate kernels and the incremental Gram/Cholesky state
 *        used to score candidates in O(d^2).
 *
 * All logarithms are natural. The coding rate of a d x n feature matrix Z is
 *
 *     R(Z) = 1/2 ln det(I_d + gamma Z Z^T),   gamma = d / (n eps^2)
 *
 * in adaptive scaling, or a pinned gamma in fixed scaling.
 */

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "score/error.hpp"

namespace score {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

enum class ScalingMode { Adaptive, Fixed };

struct CodingRateParams {
  double epsilon_sq = 0.5;
  ScalingMode scaling = ScalingMode::Adaptive;
  double gamma_fixed = 1.0;

  void validate() const {
    if (!(epsilon_sq > 0.0) || !std::isfinite(epsilon_sq))
      fail(ErrorCode::InvalidParams, "epsilon_sq must be positive and finite");
    if (scaling == ScalingMode::Fixed && (!(gamma_fixed > 0.0) || !std::isfinite(gamma_fixed)))
      fail(ErrorCode::InvalidParams, "gamma_fixed must be positive and finite");
  }

  /// Scale applied to Z Z^T for a dim x count matrix.
  double gamma(Index dim, Index count) const {
    validate();
    if (scaling == ScalingMode::Fixed) return gamma_fixed;
    if (count <= 0) fail(ErrorCode::InvalidArgument, "adaptive gamma needs a positive sample count");
    return static_cast<double>(dim) / (static_cast<double>(count) * epsilon_sq);
  }
};

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) fail(ErrorCode::NonFinite, what);
}

template <typename Scalar>
Scalar logdet_from_lower(const Matrix<Scalar>& lower) {
  Scalar acc(0);
  for (Index i = 0; i < lower.rows(); ++i) acc += std::log(lower(i, i));
  return Scalar(2) * acc;
}

template <typename Scalar>
Matrix<Scalar> cholesky_lower(const Matrix<Scalar>& a) {
  Eigen::LLT<Matrix<Scalar>, Eigen::Lower> llt(a);
  if (llt.info() != Eigen::Success) fail(ErrorCode::NotPositiveDefinite, "non-positive pivot in Cholesky factorization");
  Matrix<Scalar> lower = llt.matrixL();
  for (Index i = 0; i < lower.rows(); ++i)
    if (!(lower(i, i) > Scalar(0))) fail(ErrorCode::NotPositiveDefinite, "non-positive pivot in Cholesky factorization");
  return lower;
}

}  // namespace detail

/// ln det(a) for symmetric positive-definite a, via Cholesky.
template <typename Derived>
typename Derived::Scalar logdet_psd(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() != a.cols()) fail(ErrorCode::DimensionMismatch, "logdet_psd requires a square matrix");
  detail::require_finite(a, "logdet_psd input has non-finite entries");
  const Matrix<Scalar> m = a;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10))
    fail(ErrorCode::InvalidArgument, "logdet_psd requires a symmetric matrix");
  return detail::logdet_from_lower(detail::cholesky_lower(m));
}

/**
 * ln det(I + gamma Z Z^T), factoring whichever Gram side is smaller
 * (det(I_d + g Z Z^T) = det(I_n + g Z^T Z)). A matrix with zero columns or
 * rows yields 0.
 */
template <typename Derived>
typename Derived::Scalar logdet_identity_plus(const Eigen::MatrixBase<Derived>& z,
                                              typename Derived::Scalar gamma) {
  using Scalar = typename Derived::Scalar;
  if (z.rows() == 0 || z.cols() == 0) return Scalar(0);
  Matrix<Scalar> a;
  if (z.cols() < z.rows()) {
    a = Matrix<Scalar>::Identity(z.cols(), z.cols());
    a.template selfadjointView<Eigen::Lower>().rankUpdate(z.transpose(), gamma);
  } else {
    a = Matrix<Scalar>::Identity(z.rows(), z.rows());
    a.template selfadjointView<Eigen::Lower>().rankUpdate(z, gamma);
  }
  return detail::logdet_from_lower(detail::cholesky_lower(a));
}

/// 1/2 ln det(I + gamma Z Z^T) with gamma taken from `params` for this Z's shape.
template <typename Derived>
typename Derived::Scalar coding_rate(const Eigen::MatrixBase<Derived>& z, const CodingRateParams& params) {
  using Scalar = typename Derived::Scalar;
  params.validate();
  detail::require_finite(z, "coding_rate input has non-finite entries");
  if (z.cols() == 0) return Scalar(0);
  const auto gamma = static_cast<Scalar>(params.gamma(z.rows(), z.cols()));
  return Scalar(0.5) * logdet_identity_plus(z, gamma);
}

/**
 * Class-conditional coding rate
 *
 *     sum_j (n_j / 2n) ln det(I + d / (n_j eps^2) Z_j Z_j^T)
 *
 * where Z_j holds the columns labelled j. Empty classes contribute 0.
 */
template <typename Derived>
typename Derived::Scalar class_coding_rate(const Eigen::MatrixBase<Derived>& z, std::span<const int> labels,
                                           int num_classes, const CodingRateParams& params) {
  using Scalar = typename Derived::Scalar;
  params.validate();
  if (z.cols() == 0) fail(ErrorCode::InvalidArgument, "class_coding_rate needs at least one sample");
  if (static_cast<Index>(labels.size()) != z.cols())
    fail(ErrorCode::DimensionMismatch, "label count differs from column count");
  detail::require_finite(z, "class_coding_rate input has non-finite entries");

  std::vector<std::vector<Index>> members(static_cast<std::size_t>(num_classes));
  for (Index i = 0; i < z.cols(); ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= num_classes) fail(ErrorCode::LabelOutOfRange, "class label outside [0, num_classes)");
    members[static_cast<std::size_t>(label)].push_back(i);
  }

  const auto n = static_cast<Scalar>(z.cols());
  Scalar total(0);
  for (const auto& cols : members) {
    if (cols.empty()) continue;
    const Matrix<Scalar> zj = z(Eigen::all, cols);
    total += (static_cast<Scalar>(cols.size()) / n) * coding_rate(zj, params);
  }
  return total;
}

/**
 * Coding rate of one sample's K x C soft-label matrix, evaluated on Y^T
 * (C-dimensional vectors, K of them): 1/2 ln det(I_C + C / (K eps^2) Y^T Y).
 */
template <typename Derived>
typename Derived::Scalar label_coding_rate(const Eigen::MatrixBase<Derived>& y, const CodingRateParams& params) {
  detail::require_finite(y, "label_coding_rate input has non-finite entries");
  return coding_rate(y.transpose(), params);
}

/// In-place rank-one update of a lower Cholesky factor: L L^T + v v^T.
template <typename Derived, typename VecDerived>
void cholesky_rank_one_update(Eigen::MatrixBase<Derived>& lower, const Eigen::MatrixBase<VecDerived>& v) {
  using Scalar = typename Derived::Scalar;
  const Index n = lower.rows();
  if (lower.cols() != n || v.size() != n) fail(ErrorCode::DimensionMismatch, "cholesky update shape mismatch");
  Vector<Scalar> w = v;
  for (Index k = 0; k < n; ++k) {
    const Scalar lkk = lower(k, k);
    const Scalar r = std::hypot(lkk, w(k));
    const Scalar c = r / lkk;
    const Scalar s = w(k) / lkk;
    lower(k, k) = r;
    const Index tail = n - k - 1;
    if (tail > 0) {
      lower.col(k).tail(tail) = (lower.col(k).tail(tail) + s * w.tail(tail)) / c;
      w.tail(tail) = c * w.tail(tail) - s * lower.col(k).tail(tail);
    }
  }
}

/**
 * Running Gram matrix G = Z_S Z_S^T of a selected set together with the
 * lower Cholesky factor of I + gamma G for the current round's gamma.
 *
 * In fixed scaling each insert is folded into the factor by a rank-one
 * update. In adaptive scaling inserts leave the factor stale until the next
 * refresh(), since gamma moves with the set size. Scoring is const and may
 * run concurrently; insert/refresh need exclusive access.
 */
template <typename Scalar = double>
class GramState {
 public:
  using MatrixType = Matrix<Scalar>;
  using VectorType = Vector<Scalar>;

  GramState() = default;

  GramState(Index dim, Scalar gamma, ScalingMode mode = ScalingMode::Adaptive)
      : gram_(MatrixType::Zero(dim, dim)),
        chol_(MatrixType::Identity(dim, dim)),
        round_gamma_(gamma),
        mode_(mode) {
    if (dim < 1) fail(ErrorCode::InvalidArgument, "GramState dimension must be positive");
    if (!(gamma > Scalar(0)) || !std::isfinite(gamma)) fail(ErrorCode::InvalidParams, "gamma must be positive");
  }

  Index dim() const { return gram_.rows(); }
  Index count() const { return count_; }
  const MatrixType& gram() const { return gram_; }
  const MatrixType& chol() const { return chol_; }
  Scalar round_gamma() const { return round_gamma_; }
  ScalingMode mode() const { return mode_; }
  bool stale() const { return stale_; }

  template <typename VecDerived>
  void insert(const Eigen::MatrixBase<VecDerived>& z) {
    check_vector(z);
    gram_.noalias() += z * z.transpose();
    ++count_;
    if (mode_ == ScalingMode::Fixed && !stale_) {
      cholesky_rank_one_update(chol_, std::sqrt(round_gamma_) * z);
    } else {
      stale_ = true;
    }
  }

  /// Refactor I + gamma G. O(d^3).
  void refresh(Scalar gamma) {
    if (!(gamma > Scalar(0)) || !std::isfinite(gamma)) fail(ErrorCode::InvalidParams, "gamma must be positive");
    MatrixType a = MatrixType::Identity(dim(), dim());
    a.noalias() += gamma * gram_;
    chol_ = detail::cholesky_lower(a);
    round_gamma_ = gamma;
    stale_ = false;
  }

  /// 1/2 ln(1 + gamma z^T (I + gamma G)^{-1} z): the coding-rate increase from adding z.
  template <typename VecDerived>
  Scalar marginal_gain(const Eigen::MatrixBase<VecDerived>& z) const {
    check_vector(z);
    if (stale_) fail(ErrorCode::StaleFactorization, "factorization is stale; call refresh() first");
    const VectorType w = chol_.template triangularView<Eigen::Lower>().solve(std::sqrt(round_gamma_) * z);
    return Scalar(0.5) * std::log1p(w.squaredNorm());
  }

  /// 1/2 ln det(I + gamma G) at the current round gamma.
  Scalar coding_rate() const {
    if (stale_) fail(ErrorCode::StaleFactorization, "factorization is stale; call refresh() first");
    return Scalar(0.5) * detail::logdet_from_lower(chol_);
  }

 private:
  template <typename VecDerived>
  void check_vector(const Eigen::MatrixBase<VecDerived>& z) const {
    if (z.cols() != 1 || z.rows() != dim()) fail(ErrorCode::DimensionMismatch, "vector length differs from state dim");
    detail::require_finite(z, "vector has non-finite entries");
  }

  MatrixType gram_;
  MatrixType chol_;
  Scalar round_gamma_{1};
  Index count_{0};
  ScalingMode mode_{ScalingMode::Adaptive};
  bool stale_{false};
};

}  // namespace score

#endif  // SCORE_CODING_RATE_HPP
