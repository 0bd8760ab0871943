#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

#include "support.hpp"

namespace hcm {
namespace {

AttributedNetwork sbm(std::uint64_t seed, SyntheticSpec spec = {}) {
  Rng rng(seed);
  return sbm_generate(spec, rng);
}

TEST(InjectStructural, CliquesAreCompleteAndDisjoint) {
  auto net = sbm(1);
  net.node_count = 100;
  net.attributes = Matrix(100, 3);
  net.edges.clear();
  Rng rng(4);
  InjectionConfig cfg{5, 2, 10};
  const auto anomalies = inject_structural(net, cfg, rng);
  ASSERT_EQ(anomalies.size(), 10u);
  EXPECT_EQ(std::set<NodeId>(anomalies.begin(), anomalies.end()).size(), 10u);
  const auto adj = net.adjacency();
  // With no prior edges each anomaly has exactly its s - 1 clique mates.
  for (NodeId v : anomalies) {
    EXPECT_EQ(adj.degree(v), 4u);
    for (NodeId u : adj.neighbors(v)) EXPECT_TRUE(std::binary_search(anomalies.begin(), anomalies.end(), u));
  }
  EXPECT_EQ(net.edges.size(), 2u * 10u);
  std::size_t flagged = 0;
  for (auto f : *net.anomaly_flags) flagged += f;
  EXPECT_EQ(flagged, 10u);
}

TEST(InjectStructural, SmallestClique) {
  AttributedNetwork net;
  net.node_count = 4;
  net.attributes = Matrix(4, 1);
  Rng rng(1);
  const auto a = inject_structural(net, {2, 1, 1}, rng);
  EXPECT_EQ(a.size(), 2u);
  EXPECT_EQ(net.edges.size(), 1u);
  // Again on a graph where that edge already exists: no duplicate.
  net.edges = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  inject_structural(net, {2, 1, 1}, rng);
  EXPECT_EQ(net.edges.size(), 6u);
}

TEST(InjectStructural, EdgeGrowthBoundAndCompleteness) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto net = sbm(seed);
    const auto m0 = net.edges.size();
    Rng rng(seed + 100);
    InjectionConfig cfg{15, 10, 50};
    const auto anomalies = inject_structural(net, cfg, rng);
    EXPECT_EQ(anomalies.size(), 150u);
    EXPECT_LE(net.edges.size() - m0, 10u * 15u * 14u / 2u);
    EXPECT_NO_THROW(net.validate());
  }
}

TEST(InjectStructural, TooManyNodes) {
  AttributedNetwork net;
  net.node_count = 9;
  net.attributes = Matrix(9, 1);
  Rng rng(1);
  EXPECT_THROW(inject_structural(net, {5, 2, 1}, rng), InputError);
}

TEST(InjectAttribute, FarthestAgainstLinearScan) {
  for (auto role : {AttributeRole::mark_farthest, AttributeRole::mark_candidate}) {
    auto net = sbm(3);
    auto replay = net.attributes;
    Rng rng(8);
    InjectionConfig cfg{5, 6, 50, role};
    const auto result = inject_attribute(net, cfg, rng);
    ASSERT_EQ(result.swaps.size(), 30u);
    std::set<NodeId> candidates;
    for (const auto& sw : result.swaps) {
      candidates.insert(sw.candidate);
      ASSERT_EQ(sw.sampled.size(), 50u);
      ASSERT_EQ(std::set<NodeId>(sw.sampled.begin(), sw.sampled.end()).size(), 50u);
      NodeId best = 0;
      double best_d = -1.0;
      for (NodeId v : sw.sampled) {
        ASSERT_NE(v, sw.candidate);
        double d = 0.0;
        for (std::size_t c = 0; c < replay.cols(); ++c)
          d += (replay(sw.candidate, c) - replay(v, c)) * (replay(sw.candidate, c) - replay(v, c));
        if (d > best_d || (d == best_d && v < best)) {
          best_d = d;
          best = v;
        }
      }
      ASSERT_EQ(sw.farthest, best);
      const NodeId src = role == AttributeRole::mark_farthest ? sw.candidate : sw.farthest;
      const NodeId dst = role == AttributeRole::mark_farthest ? sw.farthest : sw.candidate;
      for (std::size_t c = 0; c < replay.cols(); ++c) replay(dst, c) = replay(src, c);
    }
    EXPECT_EQ(candidates.size(), 30u);
    EXPECT_EQ(replay, net.attributes);
    std::size_t flagged = 0;
    for (auto f : *net.anomaly_flags) flagged += f;
    EXPECT_EQ(flagged, result.anomalies.size());
    EXPECT_LE(result.anomalies.size(), 30u);
  }
}

TEST(InjectAttribute, CopySemantics) {
  auto net = sbm(5);
  const auto before = net.attributes;
  Rng rng(2);
  const auto result = inject_attribute(net, {5, 1, 20}, rng);
  // The last swap's destination holds the candidate's row as it was at that time.
  const auto& last = result.swaps.back();
  for (std::size_t c = 0; c < before.cols(); ++c)
    EXPECT_EQ(net.attributes(last.farthest, c), net.attributes(last.candidate, c));
}

TEST(InjectAttribute, SinglePoolMemberIsChosen) {
  auto net = sbm(6);
  Rng rng(3);
  const auto result = inject_attribute(net, {5, 2, 1}, rng);
  for (const auto& sw : result.swaps) {
    ASSERT_EQ(sw.sampled.size(), 1u);
    EXPECT_EQ(sw.farthest, sw.sampled[0]);
  }
}

TEST(InjectAttribute, PoolMustBeSmallerThanGraph) {
  AttributedNetwork net;
  net.node_count = 10;
  net.attributes = Matrix(10, 2);
  Rng rng(1);
  EXPECT_THROW(inject_attribute(net, {2, 1, 10}, rng), InputError);
}

TEST(Sbm, DeterministicLimits) {
  SyntheticSpec full{4, 5, 1.0, 0.0, 3, 2.0};
  const auto net = sbm(1, full);
  EXPECT_EQ(net.edges.size(), 4u * 10u);
  for (const Edge& e : net.edges) EXPECT_EQ(sbm_block(full, e.u), sbm_block(full, e.v));
  SyntheticSpec empty{4, 5, 0.0, 0.0, 3, 2.0};
  EXPECT_TRUE(sbm(1, empty).edges.empty());
}

TEST(Sbm, IntraBlockDensityWithinBinomialBounds) {
  SyntheticSpec spec;
  const double pairs_in = spec.block_count * (spec.nodes_per_block * (spec.nodes_per_block - 1) / 2.0);
  const double pairs_out = spec.node_count() * (spec.node_count() - 1) / 2.0 - pairs_in;
  double in_total = 0.0, out_total = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto net = sbm(seed, spec);
    for (const Edge& e : net.edges) (sbm_block(spec, e.u) == sbm_block(spec, e.v) ? in_total : out_total) += 1;
  }
  const double n_in = 20 * pairs_in, n_out = 20 * pairs_out;
  EXPECT_NEAR(in_total / n_in, spec.p_in, 3 * std::sqrt(spec.p_in * (1 - spec.p_in) / n_in));
  EXPECT_NEAR(out_total / n_out, spec.p_out, 3 * std::sqrt(spec.p_out * (1 - spec.p_out) / n_out));
}

TEST(Sbm, AttributesCenterOnBlockMeans) {
  SyntheticSpec spec;
  const auto net = sbm(9, spec);
  for (std::size_t b = 0; b < spec.block_count; ++b) {
    double hot = 0.0;
    for (std::size_t i = 0; i < spec.nodes_per_block; ++i) hot += net.attributes(b * spec.nodes_per_block + i, b);
    hot /= static_cast<double>(spec.nodes_per_block);
    EXPECT_NEAR(hot, spec.mean_separation, 3.0 / std::sqrt(static_cast<double>(spec.nodes_per_block)));
  }
}

TEST(Sbm, RejectsInvertedProbabilities) {
  Rng rng(1);
  EXPECT_THROW(sbm_generate(SyntheticSpec{2, 3, 0.1, 0.5, 2, 1.0}, rng), InputError);
}

// Eigen's self-adjoint solver on the sample covariance, values descending.
Eigen::VectorXd oracle_variances(const Matrix& x) {
  Eigen::MatrixXd m(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) m(r, c) = x(r, c);
  const Eigen::MatrixXd centered = m.rowwise() - m.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  return es.eigenvalues().reverse();
}

TEST(Pca, CapturedVarianceMatchesEigenOracle) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = testing::random_matrix(30, 10, rng, -3, 3);
    const auto oracle = oracle_variances(x);
    for (std::size_t k : {1u, 3u, 10u}) {
      const auto fit = pca_fit(x, k);
      double got = 0.0, want = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        got += fit.explained_variance[i];
        want += oracle(static_cast<Eigen::Index>(i));
        EXPECT_NEAR(fit.explained_variance[i], oracle(static_cast<Eigen::Index>(i)), 1e-8);
      }
      EXPECT_NEAR(got, want, 1e-8);
    }
  }
}

TEST(Pca, SubspaceIterationMatchesEigenOracle) {
  Rng rng(12);
  PcaOptions iterative;
  iterative.direct_limit = 0;
  for (int trial = 0; trial < 5; ++trial) {
    // Decaying column scales give a clear spectral gap.
    Matrix x = testing::random_matrix(40, 12, rng);
    for (std::size_t r = 0; r < 40; ++r)
      for (std::size_t c = 0; c < 12; ++c) x(r, c) *= std::pow(0.7, static_cast<double>(c));
    const auto oracle = oracle_variances(x);
    const auto fit = pca_fit(x, 4, iterative);
    for (std::size_t i = 0; i < 4; ++i)
      EXPECT_NEAR(fit.explained_variance[i], oracle(static_cast<Eigen::Index>(i)), 1e-8);
    const auto direct = pca_fit(x, 4);
    EXPECT_LT(max_abs_diff(fit.projected, direct.projected), 1e-6);
  }
}

TEST(Pca, ProjectedCoordinatesAreUncorrelated) {
  Rng rng(3);
  const Matrix x = testing::random_matrix(30, 10, rng);
  const auto fit = pca_fit(x, 5);
  const Matrix cov = matmul_tn(fit.projected, fit.projected);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      if (i == j) EXPECT_NEAR(cov(i, j) / 29.0, fit.explained_variance[i], 1e-8);
      else EXPECT_NEAR(cov(i, j) / 29.0, 0.0, 1e-8);
    }
}

TEST(Pca, SignConvention) {
  Rng rng(4);
  const auto fit = pca_fit(testing::random_matrix(30, 8, rng), 4);
  for (std::size_t j = 0; j < 4; ++j) {
    double best = 0.0;
    for (std::size_t r = 0; r < 8; ++r)
      if (std::abs(fit.components(r, j)) > std::abs(best)) best = fit.components(r, j);
    EXPECT_GT(best, 0.0);
  }
}

TEST(Pca, ExactSubspaceReconstruction) {
  Rng rng(5);
  // 25 points in a 3-dimensional affine subspace of R^8.
  const Matrix coeffs = testing::random_matrix(25, 3, rng);
  const Matrix basis = testing::random_matrix(3, 8, rng);
  Matrix x = matmul(coeffs, basis);
  for (std::size_t r = 0; r < 25; ++r)
    for (std::size_t c = 0; c < 8; ++c) x(r, c) += static_cast<double>(c);
  const auto fit = pca_fit(x, 3);
  Matrix rec = matmul_nt(fit.projected, fit.components);
  for (std::size_t r = 0; r < 25; ++r)
    for (std::size_t c = 0; c < 8; ++c) rec(r, c) += fit.column_means[c];
  EXPECT_LT(max_abs_diff(rec, x), 1e-8);
}

TEST(Pca, IdenticalRowsProjectToZero) {
  Matrix x(10, 4);
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t c = 0; c < 4; ++c) x(r, c) = static_cast<double>(c) + 0.5;
  const Matrix projected = pca_reduce(x, 2);
  for (double v : projected.values()) EXPECT_EQ(v, 0.0);
}

TEST(Pca, TargetDimRange) {
  const Matrix x(5, 3);
  EXPECT_THROW(pca_reduce(x, 0), InputError);
  EXPECT_THROW(pca_reduce(x, 4), InputError);
  EXPECT_THROW(pca_reduce(Matrix(2, 6), 3), InputError);
}

TEST(SymmetricEigen, MatchesEigen) {
  Rng rng(6);
  Matrix a = testing::random_matrix(9, 9, rng);
  a = matmul_tn(a, a);
  const auto mine = symmetric_eigen(a);
  Eigen::MatrixXd m(9, 9);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) m(i, j) = a(i, j);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().reverse();
  for (int i = 0; i < 9; ++i) EXPECT_NEAR(mine.values[i], ev(i), 1e-10);
}

TEST(RocAuc, Examples) {
  EXPECT_EQ(roc_auc(std::vector<double>{0.9, 0.1}, std::vector<std::uint8_t>{1, 0}), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.2, 0.8, 0.8}, std::vector<std::uint8_t>{0, 1, 0}), 0.75);
}

TEST(RocAuc, MatchesBruteForceExactly) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.index(199);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    // Coarse grid on odd trials to force plenty of ties.
    for (auto& v : s) v = trial % 2 ? static_cast<double>(rng.index(5)) : rng.normal();
    for (auto& v : y) v = rng.bernoulli(0.3);
    y[0] = 1;
    y[1] = 0;
    EXPECT_EQ(roc_auc(s, y), testing::brute_force_auc(s, y)) << "trial " << trial;
  }
}

TEST(RocAuc, ComplementAndMonotoneInvariance) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 50;
    std::vector<double> s(n), neg(n), warped(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = rng.normal();
      neg[i] = -s[i];
      warped[i] = std::exp(3.0 * s[i]) + 7.0;
      y[i] = i % 3 == 0;
    }
    EXPECT_NEAR(roc_auc(s, y) + roc_auc(neg, y), 1.0, 1e-15);
    EXPECT_EQ(roc_auc(s, y), roc_auc(warped, y));
  }
}

TEST(RocAuc, Errors) {
  EXPECT_THROW(roc_auc(std::vector<double>{1, 2}, std::vector<std::uint8_t>{1, 1}), InputError);
  EXPECT_THROW(roc_auc(std::vector<double>{1, 2}, std::vector<std::uint8_t>{1}), InputError);
  EXPECT_THROW(roc_auc(std::vector<double>{NAN, 2}, std::vector<std::uint8_t>{1, 0}), InputError);
}

}  // namespace
}  // namespace hcm
