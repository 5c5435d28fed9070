#include <gtest/gtest.h>

#include "rnl/renyi.hpp"

using namespace rnl;

namespace {

Matrix diag(const std::vector<double>& v) {
  RealVector d(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) d(i) = v[i];
  return d.cast<Complex>().asDiagonal();
}

OptimizerConfig quick() {
  OptimizerConfig c;
  c.restarts = 1;
  return c;
}

LabeledOperator two_qubit(const Matrix& m) { return LabeledOperator(m, {{"B", 2}, {"A", 2}}); }

// Arimoto conditional entropy of p(b, a) stored row-major with b outer.
double arimoto(const std::vector<double>& p, int db, int da, double alpha) {
  double s = 0;
  for (int b = 0; b < db; ++b) {
    double inner = 0;
    for (int a = 0; a < da; ++a) inner += std::pow(p[b * da + a], alpha);
    s += std::pow(inner, 1.0 / alpha);
  }
  return alpha / (1 - alpha) * std::log2(s);
}

double entropy_oracle(const Matrix& m) {
  Eigen::ComplexEigenSolver<Matrix> es(m);
  double s = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    double l = es.eigenvalues()(i).real();
    if (l > 1e-15) s -= l * std::log(l) / std::log(2.0);
  }
  return s;
}

ClassicalQuantumState random_cq(int nx, int de, int da, Rng& rng) {
  auto w = classical_distribution(nx, rng);
  std::vector<CqOutcome> os;
  for (int x = 0; x < nx; ++x)
    os.push_back({std::to_string(x), w[x], LabeledOperator(ginibre_state_matrix(de * da, rng), {{"E", de}, {"A", da}})});
  return ClassicalQuantumState("E", "A", os);
}

}  // namespace

TEST(Divergence, SelfDivergenceIsZero) {
  Rng rng(1);
  Matrix rho = ginibre_state_matrix(3, rng);
  for (double a : {1.1, 2.0, 5.0}) EXPECT_NEAR(sandwiched_divergence(rho, rho, a), 0.0, 1e-12);
}

TEST(Divergence, CommutingPairIsClassical) {
  std::vector<double> p{0.5, 0.3, 0.2}, q{0.2, 0.2, 0.6};
  for (double a : {1.5, 2.0, 3.0}) {
    double s = 0;
    for (int i = 0; i < 3; ++i) s += std::pow(p[i], a) * std::pow(q[i], 1 - a);
    EXPECT_NEAR(sandwiched_divergence(diag(p), diag(q), a), std::log2(s) / (a - 1), 1e-12);
  }
}

TEST(Divergence, PureAgainstMaximallyMixed) {
  for (double a : {1.01, 2.0, 7.0}) EXPECT_NEAR(sandwiched_divergence(diag({1, 0}), diag({0.5, 0.5}), a), 1.0, 1e-12);
}

TEST(Divergence, SupportMismatchIsInfinite) {
  EXPECT_TRUE(std::isinf(sandwiched_divergence(diag({0.5, 0.5}), diag({1, 0}), 2.0)));
  EXPECT_THROW(sandwiched_divergence(diag({1, 0}), diag({1, 0}), 1.0), Error);
}

TEST(Divergence, DataProcessing) {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    Matrix rho = ginibre_state_matrix(2, rng), sigma = ginibre_state_matrix(2, rng);
    auto phi = haar_stinespring_channel({{"Q", 2}}, {{"S", 2}}, 2, rng);
    for (double a : {1.5, 2.0}) {
      double before = sandwiched_divergence(rho, sigma, a);
      double after = sandwiched_divergence(phi.apply(rho), phi.apply(sigma), a);
      EXPECT_LE(after, before + 1e-6);
    }
  }
}

TEST(CondRenyi, ProductState) {
  Rng rng(3);
  Matrix s = ginibre_state_matrix(2, rng), t = ginibre_state_matrix(2, rng);
  for (double a : {1.5, 2.0}) {
    auto r = cond_renyi_up(two_qubit(kron(s, t)), {"B"}, a, quick());
    double expect = std::log2(t.cwiseAbs().size() ? std::pow(schatten_norm(t, a), a) : 0) / (1 - a);
    EXPECT_NEAR(r.value, expect, 1e-7);
    EXPECT_NEAR(r.norm_path_value, expect, 1e-7);
  }
}

TEST(CondRenyi, UniformClassical) {
  for (double a : {1.5, 2.0, 3.0}) {
    auto r = cond_renyi_up(two_qubit(diag({0.25, 0.25, 0.25, 0.25})), {"B"}, a, quick());
    EXPECT_NEAR(r.value, 1.0, 1e-8);
  }
}

TEST(CondRenyi, ArimotoOnRandomClassicalStates) {
  Rng rng(4);
  for (int t = 0; t < 10; ++t) {
    auto p = classical_distribution(6, rng);
    for (double a : {1.5, 3.0}) {
      auto r = cond_renyi_up(LabeledOperator(diag(p), {{"B", 3}, {"A", 2}}), {"B"}, a, quick());
      EXPECT_NEAR(r.value, arimoto(p, 3, 2, a), 1e-8);
      EXPECT_NEAR(r.norm_path_value, arimoto(p, 3, 2, a), 1e-8);
    }
  }
}

TEST(CondRenyi, NormPathAgreesWithSigmaPath) {
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    Matrix rho = ginibre_state_matrix(4, rng);
    for (double a : {1.5, 2.0}) {
      auto r = cond_renyi_up(two_qubit(rho), {"B"}, a, quick());
      EXPECT_LT(r.path_gap, 1e-5);
      EXPECT_GE(r.value, -1.0 - 1e-9);
      EXPECT_LE(r.value, 1.0 + 1e-9);
    }
  }
}

TEST(CondRenyi, MonotoneInAlphaAndLimit) {
  Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    Matrix rho = ginibre_state_matrix(4, rng);
    double prev = kInf;
    for (double a : {1.1, 1.5, 2.0, 3.0}) {
      double h = cond_entropy_norm(two_qubit(rho), {"B"}, a, quick()).value;
      EXPECT_LE(h, prev + 1e-4);
      prev = h;
    }
    double h1 = cond_entropy_norm(two_qubit(rho), {"B"}, 1.001, quick()).value;
    EXPECT_NEAR(h1, von_neumann_conditional(two_qubit(rho), {"B"}), 5e-2);
  }
}

TEST(CondRenyi, MaximallyMixed) {
  auto r = cond_renyi_up(DensityOperator(two_qubit(Matrix::Identity(4, 4) / 4.0)), 2.0, quick());
  EXPECT_NEAR(r.value, 1.0, 1e-9);
  EXPECT_LT((r.sigma - 0.5 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(CondRenyi, ConditioningLabelsMayFollow) {
  Rng rng(7);
  Matrix rho = ginibre_state_matrix(4, rng);
  LabeledOperator ab(rho, {{"A", 2}, {"B", 2}});
  double direct = cond_entropy_norm(permute(ab, {"B", "A"}), {"B"}, 2.0, quick()).value;
  EXPECT_NEAR(cond_entropy_norm(ab, {"B"}, 2.0, quick()).value, direct, 1e-10);
}

TEST(VonNeumann, ProductState) {
  Rng rng(8);
  Matrix s = ginibre_state_matrix(2, rng), t = ginibre_state_matrix(3, rng);
  EXPECT_NEAR(von_neumann_conditional(LabeledOperator(kron(s, t), {{"A", 2}, {"B", 3}}), {"B"}), entropy_oracle(s), 1e-10);
}

TEST(VonNeumann, BellStateIsMinusOne) {
  Vector v = Vector::Zero(4);
  v(0) = v(3) = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(von_neumann_conditional(two_qubit(v * v.adjoint()), {"B"}), -1.0, 1e-12);
}

TEST(VonNeumann, RandomStateAgainstOracle) {
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    Matrix rho = ginibre_state_matrix(4, rng);
    LabeledOperator x = two_qubit(rho);
    double expect = entropy_oracle(rho) - entropy_oracle(partial_trace(x, {"A"}).matrix());
    EXPECT_NEAR(von_neumann_conditional(x, {"B"}), expect, 1e-10);
  }
}

TEST(FWeighted, ZeroWeightsRecoverConditionalEntropy) {
  Rng rng(10);
  auto st = random_cq(3, 2, 2, rng);
  WeightFunction f({{"0", 0.0}, {"1", 0.0}, {"2", 0.0}});
  for (double a : {1.5, 2.0}) {
    double fw = f_weighted_entropy(st, f, a, quick()).value;
    double direct = cond_entropy_norm(st.assemble(), {"X", "E"}, a, quick()).value;
    EXPECT_NEAR(fw, direct, 1e-6);
  }
}

TEST(FWeighted, SingleOutcomeConstantPullsOut) {
  Rng rng(11);
  LabeledOperator block(ginibre_state_matrix(4, rng), {{"E", 2}, {"A", 2}});
  ClassicalQuantumState st("E", "A", {{"x0", 1.0, block}});
  double c = 0.7;
  double fw = f_weighted_entropy(st, WeightFunction({{"x0", c}}), 2.0, quick()).value;
  EXPECT_NEAR(fw, cond_entropy_norm(block, {"E"}, 2.0, quick()).value - c, 1e-9);
}

TEST(FWeighted, ClassicalBlocksMatchNestedSums) {
  Rng rng(12);
  std::vector<CqOutcome> os;
  std::map<std::string, double> table;
  std::vector<std::vector<double>> ps;
  auto w = classical_distribution(3, rng);
  for (int x = 0; x < 3; ++x) {
    ps.push_back(classical_distribution(4, rng));
    os.push_back({std::to_string(x), w[x], LabeledOperator(diag(ps.back()), {{"E", 2}, {"A", 2}})});
    table[std::to_string(x)] = 0.3 * x - 0.2;
  }
  ClassicalQuantumState st("E", "A", os);
  for (double a : {1.5, 2.0, 3.0}) {
    double s = 0;
    for (int x = 0; x < 3; ++x) {
      double inner = 0;
      for (int e = 0; e < 2; ++e) inner += std::pow(std::pow(ps[x][2 * e], a) + std::pow(ps[x][2 * e + 1], a), 1 / a);
      s += std::exp2((a - 1) / a * table[std::to_string(x)]) * w[x] * inner;
    }
    EXPECT_NEAR(f_weighted_entropy(st, WeightFunction(table), a, quick()).value, a / (1 - a) * std::log2(s), 1e-8);
  }
}

TEST(EtaZero, Examples) {
  EXPECT_EQ(eta_zero(WeightFunction({{"a", 0.0}, {"b", 0.0}}), 2), 5.0);
  EXPECT_EQ(eta_zero(WeightFunction({{"a", 0.0}, {"b", 1.0}}), 2), 7.0);
  WeightFunction f({{"a", -0.3}, {"b", 1.2}});
  WeightFunction g({{"a", -0.3 + 0.5}, {"b", 1.2 + 0.5}});
  double base = eta_zero(f, 3);
  double shifted = eta_zero(g, 3);
  EXPECT_NEAR(shifted, 3 * (std::exp2(1.2) * std::exp2(0.5) + std::exp2(0.3) * std::exp2(-0.5)) + 1, 1e-12);
  EXPECT_NEAR(base, 3 * (std::exp2(1.2) + std::exp2(0.3)) + 1, 1e-12);
}

TEST(Continuity, SandwichOnRandomStates) {
  Rng rng(13);
  for (int t = 0; t < 10; ++t) {
    auto st = random_cq(3, 2, 2, rng);
    std::map<std::string, double> table;
    for (int x = 0; x < 3; ++x) table[std::to_string(x)] = 0.5 * uniform01(rng) - 0.25;
    WeightFunction f(table);
    double le = std::log2(eta_zero(f, 2));
    double alpha = 1.0 + 0.5 / le;
    auto b = continuity_bound(st, f, alpha);
    ASSERT_TRUE(b.alpha_ok);
    double h = f_weighted_entropy(st, f, alpha, quick()).value;
    EXPECT_LE(b.lower, h + 1e-9);
    EXPECT_LE(h, b.upper + 1e-9);
  }
}

TEST(CqState, RejectsBadWeights) {
  LabeledOperator block(Matrix::Identity(4, 4) / 4.0, {{"E", 2}, {"A", 2}});
  EXPECT_THROW(ClassicalQuantumState("E", "A", {{"0", 0.5, block}}), InvariantError);
  EXPECT_THROW(ClassicalQuantumState("E", "A", {{"0", 0.5, block}, {"0", 0.5, block}}), LabelError);
}
