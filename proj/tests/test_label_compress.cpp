#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "score/label_compress.hpp"
#include "score/synthbench.hpp"

using namespace score;

namespace {

Eigen::MatrixXd low_rank(Index rows, Index cols, Index rank, std::mt19937_64& rng) {
  return oracle::gaussian(rows, rank, rng) * oracle::gaussian(rank, cols, rng);
}

double rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / b.norm(); }

SoftLabelStack planted_labels(Index n, Index k, Index c, Index rank, double noise, std::uint64_t seed) {
  MixtureSpec mix;
  mix.num_classes = static_cast<int>(c);
  mix.per_class = static_cast<int>((n + c - 1) / c);
  mix.dim = 4;
  mix.subspace_rank = 1;
  mix.seed = seed;
  auto features = gen_mixture(mix);
  std::vector<Index> keep;
  for (Index i = 0; i < n; ++i) keep.push_back(i);
  features = features.subset(keep);
  LabelGenSpec spec;
  spec.num_augs = k;
  spec.planted_rank = rank;
  spec.noise = noise;
  spec.seed = seed;
  return gen_soft_labels(features, spec);
}

double mean(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

}  // namespace

TEST(Shrink, Cases) {
  Eigen::Matrix2d m;
  m << 3, -1, 0.5, -4;
  EXPECT_EQ(shrink(m, 0.0), m);
  EXPECT_TRUE(shrink(m, 4.0).isZero(0.0));
  Eigen::Matrix2d expected;
  expected << 2, 0, 0, -3;
  EXPECT_EQ(shrink(m, 1.0), expected);
  EXPECT_THROW(shrink(m, -1.0), Error);
}

TEST(Svt, Cases) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd m = oracle::gaussian(6, 4, rng);
  EXPECT_LE(rel(svt(m, 0.0), m), 1e-10);
  const double smax = Eigen::BDCSVD<Eigen::MatrixXd>(m).singularValues()(0);
  EXPECT_TRUE(svt(m, smax).isZero(0.0));
  const Eigen::Matrix2d d = Eigen::Vector2d(3.0, 1.0).asDiagonal();
  const Eigen::Matrix2d expected = Eigen::Vector2d(1.0, 0.0).asDiagonal();
  EXPECT_LE((svt(d, 2.0) - expected).norm(), 1e-12);
}

TEST(Svt, ProxShrinksSingularValues) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> tau_dist(0.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd m = oracle::gaussian(7, 5, rng);
    const double tau = tau_dist(rng);
    const Eigen::VectorXd sigma = Eigen::BDCSVD<Eigen::MatrixXd>(m).singularValues();
    const Eigen::VectorXd expected = (sigma.array() - tau).max(0.0).matrix();
    const Eigen::VectorXd got = Eigen::BDCSVD<Eigen::MatrixXd>(svt(m, tau)).singularValues();
    EXPECT_LE((got - expected).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Rpca, CleanRankOne) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd m = low_rank(20, 12, 1, rng);
  const auto dec = rpca_pcp(m);
  EXPECT_TRUE(dec.converged);
  EXPECT_LE(rel(dec.low_rank, m), 1e-6);
  EXPECT_LE(dec.sparse_dense().norm() / m.norm(), 1e-6);
}

TEST(Rpca, ZeroInput) {
  const auto dec = rpca_pcp(Eigen::MatrixXd::Zero(5, 4));
  EXPECT_TRUE(dec.low_rank.isZero(0.0));
  EXPECT_TRUE(dec.sparse.empty());
  EXPECT_EQ(dec.iterations_used, 1);
  EXPECT_TRUE(dec.converged);
}

TEST(Rpca, PlantedRecovery) {
  const auto inst = planted_rpca_instance(60, 40, 3, 0.05, 1.0, 0);
  const auto dec = rpca_pcp(inst.observed);
  EXPECT_TRUE(dec.converged);
  EXPECT_LE(dec.iterations_used, 500);
  EXPECT_LE(rel(dec.low_rank, inst.low_rank), 1e-4);
  EXPECT_LE((inst.observed - dec.low_rank - dec.sparse_dense()).norm() / inst.observed.norm(), 1e-7);
  // Support: entries carrying more than 1e-3 of the spike magnitude.
  const double cut = 1e-3 * inst.sparse.cwiseAbs().maxCoeff();
  const Eigen::MatrixXd s = dec.sparse_dense();
  int mismatches = 0;
  for (Index i = 0; i < s.rows(); ++i)
    for (Index j = 0; j < s.cols(); ++j)
      if ((std::abs(s(i, j)) > cut) != (inst.sparse(i, j) != 0.0)) ++mismatches;
  EXPECT_EQ(mismatches, 0);
}

TEST(Rpca, ReportsNonConvergence) {
  const auto inst = planted_rpca_instance(30, 20, 2, 0.05, 1.0, 7);
  RpcaConfig config;
  config.max_iters = 3;
  const auto dec = rpca_pcp(inst.observed, config);
  EXPECT_FALSE(dec.converged);
  EXPECT_EQ(dec.iterations_used, 3);
  EXPECT_GT(dec.final_residual, config.tol);
}

TEST(Rpca, InvalidConfig) {
  RpcaConfig config;
  config.rho = 1.0;
  EXPECT_THROW(rpca_pcp(Eigen::MatrixXd::Ones(3, 3), config), Error);
  config = {};
  config.lambda = -1.0;
  EXPECT_THROW(rpca_pcp(Eigen::MatrixXd::Ones(3, 3), config), Error);
}

TEST(SvdTruncate, ExactRankAndEckartYoung) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd m = low_rank(15, 10, 3, rng);
  EXPECT_LE(rel(svd_truncate(m, 3).reconstruct(), m), 1e-9);

  const Eigen::MatrixXd g = oracle::gaussian(12, 9, rng);
  Eigen::JacobiSVD<Eigen::MatrixXd> full(g);
  const Eigen::VectorXd s = full.singularValues();
  for (Index r = 1; r <= 9; ++r) {
    const double tail = std::sqrt(s.tail(9 - r).squaredNorm());
    EXPECT_NEAR((svd_truncate(g, r).reconstruct() - g).norm(), tail, 1e-9);
  }
  EXPECT_LE(rel(svd_truncate(g, 9).reconstruct(), g), 1e-12);
}

TEST(SvdTruncate, RankOutOfRange) {
  try {
    svd_truncate(Eigen::MatrixXd::Ones(3, 4), 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankOutOfRange);
  }
  EXPECT_THROW(svd_truncate(Eigen::MatrixXd::Ones(3, 4), 0), Error);
}

TEST(RandomizedSvd, ExactRankDecayAndDeterminism) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd exact = low_rank(50, 40, 4, rng);
  EXPECT_LE(rel(randomized_svd(exact, 4, 8, 2, 1).reconstruct(), exact), 1e-8);

  // Decaying spectrum 0.7^i through random orthogonal factors.
  Eigen::HouseholderQR<Eigen::MatrixXd> qu(oracle::gaussian(50, 40, rng)), qv(oracle::gaussian(40, 40, rng));
  const Eigen::MatrixXd u = qu.householderQ() * Eigen::MatrixXd::Identity(50, 40);
  const Eigen::MatrixXd v = qv.householderQ();
  Eigen::VectorXd sigma(40);
  for (Index i = 0; i < 40; ++i) sigma(i) = std::pow(0.7, static_cast<double>(i));
  const Eigen::MatrixXd m = u * sigma.asDiagonal() * v.transpose();
  for (Index r : {2, 5, 10}) {
    const double det_err = (svd_truncate(m, r).reconstruct() - m).norm();
    const double rnd_err = (randomized_svd(m, r, 8, 2, 9).reconstruct() - m).norm();
    EXPECT_LE(rnd_err, 1.5 * det_err) << "rank " << r;
  }
  const auto a = randomized_svd(m, 5, 8, 2, 11);
  const auto b = randomized_svd(m, 5, 8, 2, 11);
  EXPECT_EQ(a.left, b.left);
  EXPECT_EQ(a.sigma, b.sigma);
  EXPECT_EQ(a.right, b.right);
  EXPECT_THROW(randomized_svd(m, 35, 8, 2, 0), Error);
}

TEST(Cur, FullSquareIsExact) {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd m = oracle::random_spd(8, rng);
  const auto cur = cur_decompose(m, 8, 8, 3);
  EXPECT_LE((cur.reconstruct() - m).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Cur, PlantedRankThree) {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd m = low_rank(60, 40, 3, rng);
  const auto cur = cur_decompose(m, 6, 6, 21);
  EXPECT_LE(rel(cur.reconstruct(), m), 1e-6);
  EXPECT_EQ(std::set<Index>(cur.column_indices.begin(), cur.column_indices.end()).size(), 6u);
  const auto again = cur_decompose(m, 6, 6, 21);
  EXPECT_EQ(cur.column_indices, again.column_indices);
  EXPECT_EQ(cur.row_indices, again.row_indices);
  const auto uniform = cur_decompose(m, 6, 6, 21, CurSampling::Uniform);
  EXPECT_LE(rel(uniform.reconstruct(), m), 1e-6);
  EXPECT_THROW(cur_decompose(m, 41, 6, 0), Error);
}

TEST(Planner, Arithmetic) {
  EXPECT_EQ(plan_rank_for_ratio(300, 1000, 10.0), 23);
  EXPECT_EQ(plan_rank_for_ratio(300, 1000, 20.0), 11);
  EXPECT_EQ(plan_rank_for_ratio(300, 1000, 30.0), 7);
  try {
    plan_rank_for_ratio(4, 4, 30.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RatioInfeasible);
  }
  for (double ratio : {2.0, 3.7, 10.0, 25.0}) {
    const Index r = plan_rank_for_ratio(64, 100, ratio, 4);
    const long double original = 64.0L * 100 * 4;
    EXPECT_LE(static_cast<long double>(r) * 165 * 4 * ratio, original);
    EXPECT_GT(static_cast<long double>(r + 1) * 165 * 4 * ratio, original);
    const Index k = plan_cur_size_for_ratio(64, 100, ratio, 4);
    EXPECT_LE((static_cast<long double>(k) * 164 + static_cast<long double>(k) * k) * 4 * ratio, original);
  }
  EXPECT_THROW(plan_rank_for_ratio(10, 10, 1.0), Error);
}

TEST(CompressLabels, ExactRankRoundTrip) {
  const auto stack = planted_labels(12, 10, 8, 3, 0.0, 1);
  CompressionOptions options;
  options.method = CompressionMethod::Svd;
  options.rank = 3;
  const auto c = compress_labels(stack, options);
  for (double e : reconstruction_errors(stack, decompress_labels(c))) EXPECT_LE(e, 1e-8);
}

TEST(CompressLabels, FullRankRoundTripEveryMethod) {
  const auto stack = planted_labels(6, 8, 10, 4, 0.5, 2);
  for (auto method : {CompressionMethod::Svd, CompressionMethod::Rsvd, CompressionMethod::Cur, CompressionMethod::Rpca}) {
    CompressionOptions options;
    options.method = method;
    options.rank = 8;
    options.rpca.tol = 1e-12;
    const auto c = compress_labels(stack, options);
    for (double e : reconstruction_errors(stack, decompress_labels(c))) EXPECT_LE(e, 1e-8) << to_string(method);
  }
}

TEST(CompressLabels, PlantedNearRankFiveSvd) {
  const auto stack = planted_labels(20, 100, 200, 5, 0.05, 3);
  CompressionOptions options;
  options.method = CompressionMethod::Svd;
  options.ratio = 10.0;
  const auto c = compress_labels(stack, options);
  EXPECT_LE(mean(reconstruction_errors(stack, decompress_labels(c))), 0.05);
}

TEST(CompressLabels, BudgetLawAndAccounting) {
  const auto stack = planted_labels(3, 30, 50, 3, 0.5, 4);
  for (int b : {4, 8}) {
    for (double ratio : {2.0, 5.0, 10.0}) {
      for (auto method : {CompressionMethod::Svd, CompressionMethod::Rsvd, CompressionMethod::Cur, CompressionMethod::Rpca}) {
        CompressionOptions options;
        options.method = method;
        options.ratio = ratio;
        options.bytes_per_scalar = b;
        const auto c = compress_labels(stack, options);
        EXPECT_EQ(c.original_bytes, 3u * 30 * 50 * static_cast<unsigned>(b));
        EXPECT_LE(static_cast<long double>(c.stored_bytes) * ratio, static_cast<long double>(c.original_bytes));
        EXPECT_GE(c.achieved_ratio(), ratio);
        std::uint64_t expected = 0;
        for (const auto& s : c.samples) {
          const auto core = s.dense_core() ? s.core.size() : s.sigma.size();
          expected += static_cast<std::uint64_t>(s.left.size() + core + s.right.size()) * static_cast<unsigned>(b) +
                      s.sparse.size() * (static_cast<unsigned>(b) + 8);
        }
        EXPECT_EQ(c.stored_bytes, expected);
      }
    }
  }
}

TEST(CompressLabels, RpcaConsistentWithDirectDecomposition) {
  const auto stack = planted_labels(4, 24, 30, 2, 0.2, 5);
  CompressionOptions options;
  options.method = CompressionMethod::Rpca;
  options.rank = 24;
  const auto c = compress_labels(stack, options);
  const auto rebuilt = decompress_labels(c);
  for (Index i = 0; i < stack.num_samples; ++i) {
    const auto dec = rpca_pcp(stack.sample(i));
    const Eigen::MatrixXd direct = dec.low_rank + dec.sparse_dense();
    EXPECT_LE((direct - rebuilt.sample(i)).norm(), 1e-9);
    const double err = (rebuilt.sample(i) - stack.sample(i)).norm() / stack.sample(i).norm();
    EXPECT_NEAR(err, dec.final_residual, 1e-9);
  }
}

TEST(CompressLabels, Renormalize) {
  const auto stack = planted_labels(5, 20, 30, 4, 0.8, 6);
  CompressionOptions options;
  options.method = CompressionMethod::Svd;
  options.rank = 1;
  const auto out = decompress_labels(compress_labels(stack, options), true);
  for (Index i = 0; i < out.num_samples; ++i) {
    EXPECT_GE(out.sample(i).minCoeff(), 0.0);
    EXPECT_LE((out.sample(i).rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-9);
  }
}

TEST(CompressLabels, Deterministic) {
  const auto stack = planted_labels(6, 16, 20, 3, 0.4, 7);
  for (auto method : {CompressionMethod::Rsvd, CompressionMethod::Cur, CompressionMethod::Rpca}) {
    CompressionOptions options;
    options.method = method;
    options.ratio = 4.0;
    options.seed = 19;
    const auto a = compress_labels(stack, options);
    options.threads = 3;
    const auto b = compress_labels(stack, options);
    ASSERT_EQ(a.samples.size(), b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
      EXPECT_EQ(a.samples[i].left, b.samples[i].left);
      EXPECT_EQ(a.samples[i].right, b.samples[i].right);
      EXPECT_EQ(a.samples[i].sparse, b.samples[i].sparse);
    }
  }
}

TEST(CompressLabels, Errors) {
  const auto stack = planted_labels(2, 4, 4, 2, 0.0, 8);
  CompressionOptions options;
  options.method = CompressionMethod::Svd;
  options.ratio = 30.0;
  try {
    compress_labels(stack, options);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RatioInfeasible);
  }
  options.rank = 2;
  EXPECT_THROW(compress_labels(stack, options), Error);
  options.ratio.reset();
  options.rank = 5;
  EXPECT_THROW(compress_labels(stack, options), Error);
}

TEST(DecompressLabels, MalformedFactors) {
  CompressedLabels c;
  c.num_samples = 1;
  c.num_augs = 3;
  c.num_classes = 4;
  SampleFactors f;
  f.left = Eigen::MatrixXd::Ones(3, 2);
  f.sigma = Eigen::VectorXd::Ones(1);
  f.right = Eigen::MatrixXd::Ones(2, 4);
  c.samples.push_back(f);
  try {
    decompress_labels(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedFactors);
  }
  c.samples.clear();
  EXPECT_THROW(decompress_labels(c), Error);
}

TEST(CompressionMethodNames, RoundTrip) {
  for (auto method : {CompressionMethod::Rpca, CompressionMethod::Svd, CompressionMethod::Rsvd, CompressionMethod::Cur})
    EXPECT_EQ(parse_compression_method(to_string(method)), method);
  EXPECT_THROW(parse_compression_method("qr"), Error);
}
