#include "score/label_compress.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <thread>
#include <tuple>

namespace score {

namespace {

Eigen::BDCSVD<Eigen::MatrixXd> thin_svd(const Eigen::MatrixXd& m) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) fail(ErrorCode::SvdFailure, "SVD did not converge");
  return svd;
}

// Singular value thresholding from a precomputed SVD of the input scaled by `scale`.
LowRankFactors shrink_svd(const Eigen::BDCSVD<Eigen::MatrixXd>& svd, double scale, double tau) {
  return {svd.matrixU(), (scale * svd.singularValues().array() - tau).max(0.0).matrix(), svd.matrixV().transpose()};
}

Eigen::MatrixXd active_part(const LowRankFactors& f) {
  Index keep = 0;
  while (keep < f.sigma.size() && f.sigma(keep) > 0.0) ++keep;
  if (keep == 0) return Eigen::MatrixXd::Zero(f.left.rows(), f.right.cols());
  return f.left.leftCols(keep) * f.sigma.head(keep).asDiagonal() * f.right.topRows(keep);
}

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

Eigen::MatrixXd gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

// Weighted draw of `count` distinct indices; falls back to uniform once the weights are exhausted.
std::vector<Index> weighted_without_replacement(std::vector<double> weights, Index count, std::mt19937_64& rng) {
  std::vector<Index> chosen;
  std::vector<char> taken(weights.size(), 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index draw = 0; draw < count; ++draw) {
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i)
      if (!taken[i]) total += weights[i];
    std::size_t pick = weights.size();
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < weights.size(); ++i) {
        if (taken[i] || weights[i] <= 0.0) continue;
        acc += weights[i];
        pick = i;
        if (acc > target) break;
      }
    } else {
      std::vector<std::size_t> open;
      for (std::size_t i = 0; i < weights.size(); ++i)
        if (!taken[i]) open.push_back(i);
      std::uniform_int_distribution<std::size_t> uni(0, open.size() - 1);
      pick = open[uni(rng)];
    }
    taken[pick] = 1;
    chosen.push_back(static_cast<Index>(pick));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

bool fits_budget(std::uint64_t bytes, double ratio, std::uint64_t original) {
  return static_cast<long double>(bytes) * static_cast<long double>(ratio) <= static_cast<long double>(original);
}

void require_ratio(double ratio) {
  if (!(ratio > 1.0) || !std::isfinite(ratio)) fail(ErrorCode::InvalidArgument, "compression ratio must be > 1");
}

std::vector<SparseEntry> nonzero_entries(const Eigen::MatrixXd& s) {
  std::vector<SparseEntry> out;
  for (Index i = 0; i < s.rows(); ++i)
    for (Index j = 0; j < s.cols(); ++j)
      if (s(i, j) != 0.0) out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), s(i, j)});
  return out;
}

}  // namespace

void RpcaConfig::validate() const {
  if (lambda && !(*lambda > 0.0)) fail(ErrorCode::InvalidParams, "rpca lambda must be positive");
  if (!(tol > 0.0)) fail(ErrorCode::InvalidParams, "rpca tol must be positive");
  if (max_iters < 1) fail(ErrorCode::InvalidParams, "rpca max_iters must be >= 1");
  if (mu0 && !(*mu0 > 0.0)) fail(ErrorCode::InvalidParams, "rpca mu0 must be positive");
  if (!(rho > 1.0)) fail(ErrorCode::InvalidParams, "rpca rho must exceed 1");
}

Eigen::MatrixXd RpcaDecomposition::sparse_dense() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(low_rank.rows(), low_rank.cols());
  for (const auto& e : sparse) out(e.row, e.col) = e.value;
  return out;
}

RpcaDecomposition rpca_pcp(const Eigen::MatrixXd& m, const RpcaConfig& config) {
  config.validate();
  if (m.size() == 0) fail(ErrorCode::InvalidArgument, "rpca input is empty");
  if (!m.allFinite()) fail(ErrorCode::NonFinite, "rpca input has non-finite entries");

  RpcaDecomposition out;
  const double norm_m = m.norm();
  if (norm_m == 0.0) {
    out.low_rank = Eigen::MatrixXd::Zero(m.rows(), m.cols());
    out.iterations_used = 1;
    out.converged = true;
    return out;
  }

  const double lambda = config.lambda.value_or(1.0 / std::sqrt(static_cast<double>(std::max(m.rows(), m.cols()))));
  const auto svd_m = thin_svd(m);
  const double spectral = svd_m.singularValues()(0);
  double mu = config.mu0.value_or(1.25 / spectral);
  const double mu_max = mu * 1e7;

  const double dual_scale = std::max(spectral, m.cwiseAbs().maxCoeff() / lambda);
  Eigen::MatrixXd dual = m / dual_scale;
  Eigen::MatrixXd low = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  Eigen::MatrixXd sparse = Eigen::MatrixXd::Zero(m.rows(), m.cols());

  for (int it = 1; it <= config.max_iters; ++it) {
    // With S = 0 and Y = M / s, the first SVT input is a positive multiple of M.
    out.factors = it == 1 ? shrink_svd(svd_m, 1.0 + 1.0 / (mu * dual_scale), 1.0 / mu)
                          : shrink_svd(thin_svd(m - sparse + dual / mu), 1.0, 1.0 / mu);
    low = active_part(out.factors);
    sparse = shrink(m - low + dual / mu, lambda / mu);
    const Eigen::MatrixXd residual = m - low - sparse;
    dual += mu * residual;
    mu = std::min(config.rho * mu, mu_max);
    out.iterations_used = it;
    out.final_residual = residual.norm() / norm_m;
    if (out.final_residual <= config.tol) {
      out.converged = true;
      break;
    }
  }
  out.low_rank = std::move(low);
  out.sparse = nonzero_entries(sparse);
  return out;
}

LowRankFactors svd_truncate(const Eigen::MatrixXd& m, Index rank) {
  if (rank < 1 || rank > std::min(m.rows(), m.cols()))
    fail(ErrorCode::RankOutOfRange, "rank must lie in [1, min(rows, cols)]");
  if (!m.allFinite()) fail(ErrorCode::NonFinite, "svd input has non-finite entries");
  const auto svd = thin_svd(m);
  return {svd.matrixU().leftCols(rank), svd.singularValues().head(rank), svd.matrixV().leftCols(rank).transpose()};
}

LowRankFactors randomized_svd(const Eigen::MatrixXd& m, Index rank, Index oversample, Index power_iters,
                              std::uint64_t seed) {
  if (rank < 1 || oversample < 0 || rank + oversample > std::min(m.rows(), m.cols()))
    fail(ErrorCode::RankOutOfRange, "rank + oversample must not exceed min(rows, cols)");
  if (!m.allFinite()) fail(ErrorCode::NonFinite, "rsvd input has non-finite entries");
  std::mt19937_64 rng(seed);
  const Index width = rank + oversample;
  Eigen::MatrixXd q = orthonormal_basis(m * gaussian_matrix(m.cols(), width, rng));
  for (Index it = 0; it < power_iters; ++it) {
    const Eigen::MatrixXd w = orthonormal_basis(m.transpose() * q);
    q = orthonormal_basis(m * w);
  }
  const Eigen::MatrixXd small = q.transpose() * m;
  const auto svd = thin_svd(small);
  return {q * svd.matrixU().leftCols(rank), svd.singularValues().head(rank),
          svd.matrixV().leftCols(rank).transpose()};
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return Eigen::MatrixXd(m.cols(), m.rows());
  const auto svd = thin_svd(m);
  const auto& s = svd.singularValues();
  const double cutoff =
      static_cast<double>(std::max(m.rows(), m.cols())) * std::numeric_limits<double>::epsilon() * s(0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

CurFactors cur_decompose(const Eigen::MatrixXd& m, Index num_cols, Index num_rows, std::uint64_t seed,
                         CurSampling sampling) {
  if (num_cols < 1 || num_cols > m.cols() || num_rows < 1 || num_rows > m.rows())
    fail(ErrorCode::RankOutOfRange, "CUR column/row counts out of range");
  if (!m.allFinite()) fail(ErrorCode::NonFinite, "CUR input has non-finite entries");
  std::mt19937_64 rng(seed);

  std::vector<double> col_weights(static_cast<std::size_t>(m.cols()), 1.0);
  std::vector<double> row_weights(static_cast<std::size_t>(m.rows()), 1.0);
  if (sampling == CurSampling::Leverage) {
    const auto svd = thin_svd(m);
    const Index k = std::min({num_cols, num_rows, svd.singularValues().size()});
    for (Index j = 0; j < m.cols(); ++j)
      col_weights[static_cast<std::size_t>(j)] = svd.matrixV().row(j).head(k).squaredNorm() / static_cast<double>(k);
    for (Index i = 0; i < m.rows(); ++i)
      row_weights[static_cast<std::size_t>(i)] = svd.matrixU().row(i).head(k).squaredNorm() / static_cast<double>(k);
  }

  CurFactors out;
  out.column_indices = weighted_without_replacement(std::move(col_weights), num_cols, rng);
  out.row_indices = weighted_without_replacement(std::move(row_weights), num_rows, rng);
  out.columns = m(Eigen::all, out.column_indices);
  out.rows = m(out.row_indices, Eigen::all);
  out.core = pseudo_inverse(out.columns) * m * pseudo_inverse(out.rows);
  return out;
}

Index plan_rank_for_ratio(Index num_augs, Index num_classes, double ratio, int bytes_per_scalar) {
  require_ratio(ratio);
  const auto b = static_cast<std::uint64_t>(bytes_per_scalar);
  const auto original = static_cast<std::uint64_t>(num_augs * num_classes) * b;
  const auto per_rank = static_cast<std::uint64_t>(num_augs + num_classes + 1) * b;
  auto r = static_cast<std::uint64_t>(std::floor(static_cast<double>(original) / (ratio * static_cast<double>(per_rank))));
  while (fits_budget((r + 1) * per_rank, ratio, original)) ++r;
  while (r > 0 && !fits_budget(r * per_rank, ratio, original)) --r;
  if (r < 1)
    fail(ErrorCode::RatioInfeasible, "no rank >= 1 fits " + std::to_string(num_augs) + "x" +
                                         std::to_string(num_classes) + " labels at ratio " + std::to_string(ratio));
  return static_cast<Index>(r);
}

Index plan_cur_size_for_ratio(Index num_augs, Index num_classes, double ratio, int bytes_per_scalar) {
  require_ratio(ratio);
  const auto b = static_cast<std::uint64_t>(bytes_per_scalar);
  const auto original = static_cast<std::uint64_t>(num_augs * num_classes) * b;
  auto cost = [&](std::uint64_t k) { return k * static_cast<std::uint64_t>(num_augs + num_classes) * b + k * k * b; };
  std::uint64_t k = 0;
  const auto cap = static_cast<std::uint64_t>(std::min(num_augs, num_classes));
  while (k < cap && fits_budget(cost(k + 1), ratio, original)) ++k;
  if (k < 1) fail(ErrorCode::RatioInfeasible, "no CUR size >= 1 fits the requested ratio");
  return static_cast<Index>(k);
}

const char* to_string(CompressionMethod method) {
  switch (method) {
    case CompressionMethod::Rpca: return "rpca";
    case CompressionMethod::Svd: return "svd";
    case CompressionMethod::Rsvd: return "rsvd";
    case CompressionMethod::Cur: return "cur";
  }
  return "unknown";
}

CompressionMethod parse_compression_method(const std::string& name) {
  if (name == "rpca") return CompressionMethod::Rpca;
  if (name == "svd") return CompressionMethod::Svd;
  if (name == "rsvd") return CompressionMethod::Rsvd;
  if (name == "cur") return CompressionMethod::Cur;
  fail(ErrorCode::InvalidArgument, "unknown compression method '" + name + "'");
}

std::uint64_t SampleFactors::scalar_count() const {
  return static_cast<std::uint64_t>(left.size() + (dense_core() ? core.size() : sigma.size()) + right.size());
}

Eigen::MatrixXd SampleFactors::reconstruct(Index rows, Index cols) const {
  Eigen::MatrixXd out;
  if (left.cols() == 0 && right.rows() == 0) {
    out = Eigen::MatrixXd::Zero(rows, cols);
  } else if (dense_core()) {
    if (left.rows() != rows || right.cols() != cols || core.rows() != left.cols() || core.cols() != right.rows())
      fail(ErrorCode::MalformedFactors, "CUR factor shapes are inconsistent");
    out = left * core * right;
  } else {
    if (left.rows() != rows || right.cols() != cols || sigma.size() != left.cols() || sigma.size() != right.rows())
      fail(ErrorCode::MalformedFactors, "low-rank factor shapes are inconsistent");
    out = left * sigma.asDiagonal() * right;
  }
  for (const auto& e : sparse) {
    if (e.row >= rows || e.col >= cols) fail(ErrorCode::MalformedFactors, "sparse triplet outside the label matrix");
    out(e.row, e.col) += e.value;
  }
  return out;
}

std::uint64_t CompressedLabels::account_bytes() const {
  const auto b = static_cast<std::uint64_t>(bytes_per_scalar);
  std::uint64_t total = 0;
  for (const auto& s : samples) total += s.scalar_count() * b + s.sparse.size() * (b + 8);
  return total;
}

CompressedLabels compress_labels(const SoftLabelStack& stack, const CompressionOptions& options) {
  stack.validate();
  if (options.bytes_per_scalar != 4 && options.bytes_per_scalar != 8)
    fail(ErrorCode::InvalidArgument, "bytes_per_scalar must be 4 or 8");
  if (options.ratio.has_value() == options.rank.has_value())
    fail(ErrorCode::InvalidArgument, "exactly one of ratio or rank must be given");
  if (!(options.rpca_lowrank_share > 0.0 && options.rpca_lowrank_share <= 1.0))
    fail(ErrorCode::InvalidParams, "rpca low-rank share must lie in (0, 1]");
  options.rpca.validate();

  const Index k_augs = stack.num_augs;
  const Index c_classes = stack.num_classes;
  const Index full = std::min(k_augs, c_classes);
  const auto b = static_cast<std::uint64_t>(options.bytes_per_scalar);
  const auto per_sample_original = static_cast<std::uint64_t>(k_augs * c_classes) * b;
  const auto per_rank = static_cast<std::uint64_t>(k_augs + c_classes + 1) * b;

  CompressedLabels out;
  out.method = options.method;
  out.num_samples = stack.num_samples;
  out.num_augs = k_augs;
  out.num_classes = c_classes;
  out.bytes_per_scalar = options.bytes_per_scalar;
  out.original_bytes = per_sample_original * static_cast<std::uint64_t>(stack.num_samples);

  if (options.rank) {
    if (*options.rank < 1 || *options.rank > full) fail(ErrorCode::RankOutOfRange, "rank must lie in [1, min(K, C)]");
    out.rank = *options.rank;
  } else {
    const double ratio = *options.ratio;
    out.requested_ratio = ratio;
    switch (options.method) {
      case CompressionMethod::Svd:
      case CompressionMethod::Rsvd:
        out.rank = plan_rank_for_ratio(k_augs, c_classes, ratio, options.bytes_per_scalar);
        break;
      case CompressionMethod::Cur:
        out.rank = plan_cur_size_for_ratio(k_augs, c_classes, ratio, options.bytes_per_scalar);
        break;
      case CompressionMethod::Rpca: {
        const Index whole = plan_rank_for_ratio(k_augs, c_classes, ratio, options.bytes_per_scalar);
        const auto share_budget =
            options.rpca_lowrank_share * static_cast<double>(per_sample_original) / ratio;
        auto r = static_cast<Index>(std::floor(share_budget / static_cast<double>(per_rank)));
        out.rank = std::clamp<Index>(r, 1, whole);
        std::uint64_t t = 0;
        const auto lowrank_bytes = static_cast<std::uint64_t>(out.rank) * per_rank;
        while (fits_budget(lowrank_bytes + (t + 1) * (b + 8), ratio, per_sample_original)) ++t;
        out.sparse_budget = static_cast<Index>(t);
        break;
      }
    }
  }

  out.samples.resize(static_cast<std::size_t>(stack.num_samples));
  std::vector<char> unconverged(out.samples.size(), 0);
  auto compress_one = [&](Index i) {
    const Eigen::MatrixXd y = stack.sample(i);
    const std::uint64_t sample_seed = options.seed ^ static_cast<std::uint64_t>(i);
    SampleFactors f;
    switch (options.method) {
      case CompressionMethod::Svd: {
        auto lr = svd_truncate(y, out.rank);
        f.left = std::move(lr.left);
        f.sigma = std::move(lr.sigma);
        f.right = std::move(lr.right);
        break;
      }
      case CompressionMethod::Rsvd: {
        const Index oversample = std::min(options.oversample, full - out.rank);
        auto lr = randomized_svd(y, out.rank, oversample, options.power_iters, sample_seed);
        f.left = std::move(lr.left);
        f.sigma = std::move(lr.sigma);
        f.right = std::move(lr.right);
        break;
      }
      case CompressionMethod::Cur: {
        auto cur = cur_decompose(y, out.rank, out.rank, sample_seed, options.cur_sampling);
        f.left = std::move(cur.columns);
        f.core = std::move(cur.core);
        f.right = std::move(cur.rows);
        break;
      }
      case CompressionMethod::Rpca: {
        const auto dec = rpca_pcp(y, options.rpca);
        if (!dec.converged) unconverged[static_cast<std::size_t>(i)] = 1;
        auto lr = dec.factors.sigma.size() >= out.rank
                      ? LowRankFactors{dec.factors.left.leftCols(out.rank), dec.factors.sigma.head(out.rank),
                                       dec.factors.right.topRows(out.rank)}
                      : svd_truncate(dec.low_rank, out.rank);
        f.left = std::move(lr.left);
        f.sigma = std::move(lr.sigma);
        f.right = std::move(lr.right);
        f.sparse = dec.sparse;
        if (options.ratio && static_cast<Index>(f.sparse.size()) > out.sparse_budget) {
          std::stable_sort(f.sparse.begin(), f.sparse.end(), [](const SparseEntry& a, const SparseEntry& c) {
            return std::abs(a.value) > std::abs(c.value);
          });
          f.sparse.resize(static_cast<std::size_t>(out.sparse_budget));
        }
        std::sort(f.sparse.begin(), f.sparse.end(), [](const SparseEntry& a, const SparseEntry& c) {
          return std::tie(a.row, a.col) < std::tie(c.row, c.col);
        });
        break;
      }
    }
    if (options.bytes_per_scalar == 4) {
      f.left = f.left.cast<float>().cast<double>();
      f.sigma = f.sigma.cast<float>().cast<double>();
      f.core = f.core.cast<float>().cast<double>();
      f.right = f.right.cast<float>().cast<double>();
      for (auto& e : f.sparse) e.value = static_cast<double>(static_cast<float>(e.value));
    }
    out.samples[static_cast<std::size_t>(i)] = std::move(f);
  };

  const unsigned workers =
      static_cast<unsigned>(std::min<Index>(std::max(1u, options.threads), std::max<Index>(1, stack.num_samples)));
  if (workers <= 1) {
    for (Index i = 0; i < stack.num_samples; ++i) compress_one(i);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (Index i = w; i < stack.num_samples; i += workers) compress_one(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  out.rpca_unconverged = static_cast<int>(std::count(unconverged.begin(), unconverged.end(), 1));
  out.stored_bytes = out.account_bytes();
  return out;
}

SoftLabelStack decompress_labels(const CompressedLabels& labels, bool renormalize) {
  if (static_cast<Index>(labels.samples.size()) != labels.num_samples)
    fail(ErrorCode::MalformedFactors, "sample count differs from factor count");
  SoftLabelStack out(labels.num_samples, labels.num_augs, labels.num_classes);
  for (Index i = 0; i < labels.num_samples; ++i) {
    Eigen::MatrixXd y = labels.samples[static_cast<std::size_t>(i)].reconstruct(labels.num_augs, labels.num_classes);
    if (renormalize) {
      y = y.cwiseMax(0.0);
      for (Index r = 0; r < y.rows(); ++r) {
        const double sum = y.row(r).sum();
        if (sum > 0.0)
          y.row(r) /= sum;
        else
          y.row(r).setConstant(1.0 / static_cast<double>(y.cols()));
      }
    }
    out.sample(i) = y;
  }
  return out;
}

std::vector<double> reconstruction_errors(const SoftLabelStack& original, const SoftLabelStack& reconstructed) {
  if (original.num_samples != reconstructed.num_samples || original.num_augs != reconstructed.num_augs ||
      original.num_classes != reconstructed.num_classes)
    fail(ErrorCode::DimensionMismatch, "stacks differ in shape");
  std::vector<double> errors(static_cast<std::size_t>(original.num_samples));
  for (Index i = 0; i < original.num_samples; ++i) {
    const double denom = original.sample(i).norm();
    const double diff = (original.sample(i) - reconstructed.sample(i)).norm();
    errors[static_cast<std::size_t>(i)] = denom > 0.0 ? diff / denom : diff;
  }
  return errors;
}

}  // namespace score
