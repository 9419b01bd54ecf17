#ifndef SCORE_LABEL_COMPRESS_HPP
#define SCORE_LABEL_COMPRESS_HPP

/**
 * @file label_compress.hpp
 * @brief Low-rank soft-label compression (RPCA/PCP, SVD, randomized SVD, CUR)
 *        under explicit byte budgets.
 *
 * Storage accounting, per sample, with b = bytes_per_scalar:
 *
 *   SVD / RSVD : r (K + C + 1) b          (U_r, sigma_r, V_r)
 *   CUR        : (K c + c q + q C) b      (column block, core, row block)
 *   RPCA       : r (K + C + 1) b + t (b + 8)
 *                (truncated factors of L plus t sparse triplets, each a
 *                 value and two u32 indices)
 *
 * Headers and shape fields of the container are not counted.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "score/error.hpp"
#include "score/selector.hpp"

namespace score {

/// Elementwise soft threshold sign(x) max(|x| - tau, 0).
template <typename Derived>
Matrix<typename Derived::Scalar> shrink(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  if (!(tau >= Scalar(0))) fail(ErrorCode::InvalidArgument, "shrink threshold must be >= 0");
  if (!m.allFinite()) fail(ErrorCode::NonFinite, "shrink input has non-finite entries");
  return m.unaryExpr([tau](Scalar x) {
    const Scalar mag = std::abs(x) - tau;
    return mag > Scalar(0) ? std::copysign(mag, x) : Scalar(0);
  });
}

/// Singular value thresholding: the prox of tau ||.||_* at m.
template <typename Derived>
Matrix<typename Derived::Scalar> svt(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  if (!(tau >= Scalar(0))) fail(ErrorCode::InvalidArgument, "svt threshold must be >= 0");
  if (!m.allFinite()) fail(ErrorCode::NonFinite, "svt input has non-finite entries");
  if (m.size() == 0) return Matrix<Scalar>(m.rows(), m.cols());
  Eigen::BDCSVD<Matrix<Scalar>> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) fail(ErrorCode::SvdFailure, "SVD did not converge");
  const Vector<Scalar> shrunk = (svd.singularValues().array() - tau).max(Scalar(0)).matrix();
  Index keep = 0;
  while (keep < shrunk.size() && shrunk(keep) > Scalar(0)) ++keep;
  if (keep == 0) return Matrix<Scalar>::Zero(m.rows(), m.cols());
  return svd.matrixU().leftCols(keep) * shrunk.head(keep).asDiagonal() * svd.matrixV().leftCols(keep).transpose();
}

struct RpcaConfig {
  std::optional<double> lambda;  // default 1 / sqrt(max(rows, cols))
  double tol = 1e-7;
  int max_iters = 500;
  std::optional<double> mu0;  // default 1.25 / sigma_1(M)
  double rho = 1.5;

  void validate() const;
};

struct SparseEntry {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  double value = 0.0;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Thin factors with m ~= left * diag(sigma) * right; right is r x cols.
struct LowRankFactors {
  Eigen::MatrixXd left;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd right;

  Eigen::MatrixXd reconstruct() const { return left * sigma.asDiagonal() * right; }
};

struct RpcaDecomposition {
  Eigen::MatrixXd low_rank;
  LowRankFactors factors;  // thin SVD of low_rank from the last SVT step, zero singular values included
  std::vector<SparseEntry> sparse;
  int iterations_used = 0;
  double final_residual = 0.0;
  bool converged = false;

  Eigen::MatrixXd sparse_dense() const;
};

struct CurFactors {
  Eigen::MatrixXd columns;  // rows x c
  Eigen::MatrixXd core;     // c x q
  Eigen::MatrixXd rows;     // q x cols
  std::vector<Index> column_indices;
  std::vector<Index> row_indices;

  Eigen::MatrixXd reconstruct() const { return columns * core * rows; }
};

enum class CurSampling { Leverage, Uniform };

/**
 * Principal Component Pursuit by inexact augmented Lagrangian:
 * L <- SVT(M - S + Lambda/mu, 1/mu), S <- shrink(M - L + Lambda/mu, lambda/mu),
 * Lambda <- Lambda + mu (M - L - S), mu <- min(rho mu, 1e7 mu0).
 *
 * A run that exhausts max_iters is returned with converged = false.
 */
RpcaDecomposition rpca_pcp(const Eigen::MatrixXd& m, const RpcaConfig& config = {});

LowRankFactors svd_truncate(const Eigen::MatrixXd& m, Index rank);

LowRankFactors randomized_svd(const Eigen::MatrixXd& m, Index rank, Index oversample = 8, Index power_iters = 2,
                              std::uint64_t seed = 0);

CurFactors cur_decompose(const Eigen::MatrixXd& m, Index num_cols, Index num_rows, std::uint64_t seed,
                         CurSampling sampling = CurSampling::Leverage);

/// Moore-Penrose pseudoinverse with the usual relative cutoff.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m);

/// Largest r >= 1 with r (K + C + 1) b ratio <= K C b.
Index plan_rank_for_ratio(Index num_augs, Index num_classes, double ratio, int bytes_per_scalar = 8);

/// Largest k >= 1 with k (K + C + k) b ratio <= K C b (k columns and k rows).
Index plan_cur_size_for_ratio(Index num_augs, Index num_classes, double ratio, int bytes_per_scalar = 8);

enum class CompressionMethod { Rpca, Svd, Rsvd, Cur };

const char* to_string(CompressionMethod method);
CompressionMethod parse_compression_method(const std::string& name);

/// One sample's factors: left * (diag(sigma) or core) * right + sparse.
struct SampleFactors {
  Eigen::MatrixXd left;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd core;
  Eigen::MatrixXd right;
  std::vector<SparseEntry> sparse;

  bool dense_core() const { return core.size() > 0; }
  std::uint64_t scalar_count() const;
  Eigen::MatrixXd reconstruct(Index rows, Index cols) const;
};

struct CompressionOptions {
  CompressionMethod method = CompressionMethod::Rpca;
  std::optional<double> ratio;
  std::optional<Index> rank;
  int bytes_per_scalar = 8;
  RpcaConfig rpca{};
  double rpca_lowrank_share = 0.8;
  Index oversample = 8;
  Index power_iters = 2;
  CurSampling cur_sampling = CurSampling::Leverage;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct CompressedLabels {
  CompressionMethod method = CompressionMethod::Svd;
  Index num_samples = 0;
  Index num_augs = 0;
  Index num_classes = 0;
  int bytes_per_scalar = 8;
  std::vector<SampleFactors> samples;
  Index rank = 0;              // r for SVD-family and RPCA, k for CUR
  Index sparse_budget = 0;     // RPCA triplets allowed per sample (0 when unbounded)
  double requested_ratio = 0;  // 0 when an explicit rank was given
  int rpca_unconverged = 0;
  std::uint64_t stored_bytes = 0;
  std::uint64_t original_bytes = 0;

  double achieved_ratio() const {
    return stored_bytes == 0 ? 0.0 : static_cast<double>(original_bytes) / static_cast<double>(stored_bytes);
  }
  /// stored_bytes from the factor element counts (see file comment).
  std::uint64_t account_bytes() const;
};

CompressedLabels compress_labels(const SoftLabelStack& stack, const CompressionOptions& options);

/// Rebuilds every K x C matrix; with `renormalize`, rows are clamped at 0 and rescaled to sum 1.
SoftLabelStack decompress_labels(const CompressedLabels& labels, bool renormalize = false);

/// Per-sample ||Y_hat - Y||_F / ||Y||_F.
std::vector<double> reconstruction_errors(const SoftLabelStack& original, const SoftLabelStack& reconstructed);

}  // namespace score

#endif  // SCORE_LABEL_COMPRESS_HPP
