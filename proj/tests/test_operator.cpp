#include <gtest/gtest.h>

#include "rnl/random.hpp"

using namespace rnl;

namespace {

Matrix diag(std::initializer_list<double> v) {
  RealVector d(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) d(i++) = x;
  return d.cast<Complex>().asDiagonal();
}

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

Matrix bell_projector() {
  Vector v = Vector::Zero(4);
  v(0) = v(3) = 1.0 / std::sqrt(2.0);
  return v * v.adjoint();
}

}  // namespace

TEST(Tensor, IdentityTimesIdentity) {
  auto r = tensor(identity({{"A", 2}}), identity({{"B", 3}}));
  EXPECT_EQ(r.factors(), (Factors{{"A", 2}, {"B", 3}}));
  EXPECT_LT(max_abs(r.matrix() - Matrix::Identity(6, 6)), 1e-15);
}

TEST(Tensor, DiagonalKronecker) {
  auto r = tensor(LabeledOperator(diag({1, 2}), {{"A", 2}}), LabeledOperator(diag({3, 4}), {{"B", 2}}));
  EXPECT_LT(max_abs(r.matrix() - diag({3, 4, 6, 8})), 1e-15);
}

TEST(Tensor, MatchesIndexByIndexProduct) {
  Rng rng(11);
  Matrix a = ginibre_matrix(2, 2, rng), b = ginibre_matrix(2, 2, rng);
  auto r = tensor(LabeledOperator(a, {{"A", 2}}), LabeledOperator(b, {{"B", 2}}));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) EXPECT_LT(std::abs(r.matrix()(2 * i + k, 2 * j + l) - a(i, j) * b(k, l)), 1e-14);
}

TEST(Tensor, LabelCollisionRejected) {
  EXPECT_THROW(tensor(identity({{"A", 2}}), identity({{"A", 2}})), LabelError);
}

TEST(Tensor, Associative) {
  Rng rng(3);
  LabeledOperator a(ginibre_matrix(2, 2, rng), {{"A", 2}}), b(ginibre_matrix(3, 3, rng), {{"B", 3}}),
      c(ginibre_matrix(2, 2, rng), {{"C", 2}});
  EXPECT_LT(max_abs(tensor(tensor(a, b), c).matrix() - tensor(a, tensor(b, c)).matrix()), 1e-14);
}

TEST(PartialTrace, ProductSplits) {
  Rng rng(5);
  auto rho = ginibre_state({{"A", 2}}, rng);
  LabeledOperator sigma(2.5 * ginibre_state_matrix(3, rng), {{"B", 3}});
  auto r = partial_trace(tensor(rho.op(), sigma), {"B"});
  EXPECT_LT(max_abs(r.matrix() - 2.5 * rho.matrix()), 1e-13);
}

TEST(PartialTrace, BellStateIsMaximallyMixed) {
  auto r = partial_trace(LabeledOperator(bell_projector(), {{"A", 2}, {"B", 2}}), {"B"});
  EXPECT_LT(max_abs(r.matrix() - 0.5 * Matrix::Identity(2, 2)), 1e-15);
  auto l = partial_trace(LabeledOperator(bell_projector(), {{"A", 2}, {"B", 2}}), {"A"});
  EXPECT_EQ(l.factors(), (Factors{{"B", 2}}));
}

TEST(PartialTrace, MatchesDoubleSumOracle) {
  Rng rng(9);
  Matrix x = ginibre_matrix(6, 6, rng);
  LabeledOperator op(x, {{"A", 2}, {"B", 3}});
  auto ra = partial_trace(op, {"B"});
  auto rb = partial_trace(op, {"A"});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      Complex s = 0;
      for (int k = 0; k < 3; ++k) s += x(3 * i + k, 3 * j + k);
      EXPECT_LT(std::abs(ra.matrix()(i, j) - s), 1e-13);
    }
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l) {
      Complex s = 0;
      for (int i = 0; i < 2; ++i) s += x(3 * i + k, 3 * i + l);
      EXPECT_LT(std::abs(rb.matrix()(k, l) - s), 1e-13);
    }
  EXPECT_LT(std::abs(ra.trace() - op.trace()), 1e-12);
}

TEST(PartialTrace, UnknownLabel) {
  EXPECT_THROW(partial_trace(identity({{"A", 2}}), {"Z"}), LabelError);
}

TEST(PartialTrace, KeepsRemainingOrder) {
  Rng rng(2);
  LabeledOperator a(ginibre_matrix(2, 2, rng), {{"A", 2}}), b(ginibre_matrix(3, 3, rng), {{"B", 3}}),
      c(ginibre_matrix(2, 2, rng), {{"C", 2}});
  auto r = partial_trace(tensor(tensor(a, b), c), {"B"});
  EXPECT_EQ(r.labels(), (std::vector<std::string>{"A", "C"}));
  EXPECT_LT(max_abs(r.matrix() - b.trace() * kron(a.matrix(), c.matrix())), 1e-12);
}

TEST(Permute, SwapsFactors) {
  Rng rng(4);
  LabeledOperator a(ginibre_matrix(2, 2, rng), {{"A", 2}}), b(ginibre_matrix(3, 3, rng), {{"B", 3}});
  auto p = permute(tensor(a, b), {"B", "A"});
  EXPECT_LT(max_abs(p.matrix() - tensor(b, a).matrix()), 1e-14);
}

TEST(Purify, PureInput) {
  Matrix z = diag({1, 0});
  auto p = purify(DensityOperator(LabeledOperator(z, {{"Q", 2}})));
  Matrix e = Matrix::Zero(4, 4);
  e(0, 0) = 1;
  EXPECT_LT(max_abs(p.matrix() - e), 1e-12);
  EXPECT_EQ(p.labels(), (std::vector<std::string>{"~Q", "Q"}));
}

TEST(Purify, MaximallyMixedGivesBellState) {
  auto p = purify(DensityOperator(LabeledOperator(0.5 * Matrix::Identity(2, 2), {{"Q", 2}})));
  EXPECT_LT(max_abs(p.matrix() - bell_projector()), 1e-12);
}

TEST(Purify, RoundTrip) {
  Rng rng(17);
  for (int t = 0; t < 20; ++t) {
    auto rho = ginibre_state({{"Q", 2}}, rng);
    auto back = partial_trace(purify(rho), {"~Q"});
    EXPECT_LT(max_abs(back.matrix() - rho.matrix()), 1e-10);
  }
}

TEST(FracPower, Identity) {
  auto r = frac_power(identity({{"A", 3}}), -0.7);
  EXPECT_LT(max_abs(r.matrix() - Matrix::Identity(3, 3)), 1e-14);
}

TEST(FracPower, SquareRoot) {
  auto r = frac_power(LabeledOperator(diag({4, 9}), {{"A", 2}}), 0.5);
  EXPECT_LT(max_abs(r.matrix() - diag({2, 3})), 1e-14);
}

TEST(FracPower, PseudoInverseOnKernel) {
  auto r = frac_power(LabeledOperator(diag({2, 0}), {{"A", 2}}), -1.0);
  EXPECT_LT(max_abs(r.matrix() - diag({0.5, 0})), 1e-14);
}

TEST(FracPower, RejectsNegative) {
  EXPECT_THROW(frac_power(LabeledOperator(diag({1, -1}), {{"A", 2}}), 0.5), InvariantError);
}

TEST(FracPower, InverseRestrictedToSupport) {
  Rng rng(8);
  for (double t : {0.3, -0.5, 2.0}) {
    Matrix h = ginibre_state_matrix(3, rng, 2);
    LabeledOperator op(h, {{"A", 3}});
    Matrix prod = frac_power(frac_power(op, t), 1.0 / t).matrix();
    Matrix proj = support_projector(h);
    EXPECT_LT(max_abs(proj * prod * proj - proj * h * proj), 1e-9);
    Matrix pp = frac_power(op, t).matrix() * frac_power(op, -t).matrix();
    EXPECT_LT(max_abs(pp - proj), 1e-9);
  }
}

TEST(Channel, IdentityLeavesOperatorUnchanged) {
  Rng rng(1);
  LabeledOperator x(ginibre_matrix(2, 2, rng), {{"Q", 2}});
  auto r = apply_channel(identity_channel({{"Q", 2}}), x);
  EXPECT_LT(max_abs(r.matrix() - x.matrix()), 1e-15);
}

TEST(Channel, FullyDepolarizing) {
  Rng rng(1);
  auto rho = ginibre_state({{"Q", 2}}, rng);
  auto r = apply_channel(depolarizing_channel(2, 1.0), rho.op());
  EXPECT_LT(max_abs(r.matrix() - 0.5 * Matrix::Identity(2, 2)), 1e-14);
  EXPECT_EQ(r.labels(), (std::vector<std::string>{"S"}));
}

TEST(Channel, MatchesExplicitKrausLoops) {
  Rng rng(21);
  auto phi = haar_stinespring_channel({{"Q", 2}}, {{"R", 2}, {"S", 3}}, 3, rng);
  Matrix x = ginibre_matrix(4, 4, rng);
  auto out = apply_channel(phi, LabeledOperator(x, {{"E", 2}, {"Q", 2}}));
  EXPECT_EQ(out.labels(), (std::vector<std::string>{"E", "R", "S"}));
  int dout = 6;
  for (int e1 = 0; e1 < 2; ++e1)
    for (int e2 = 0; e2 < 2; ++e2)
      for (int i = 0; i < dout; ++i)
        for (int j = 0; j < dout; ++j) {
          Complex s = 0;
          for (const auto& k : phi.kraus())
            for (int a = 0; a < 2; ++a)
              for (int b = 0; b < 2; ++b) s += k(i, a) * x(2 * e1 + a, 2 * e2 + b) * std::conj(k(j, b));
          EXPECT_LT(std::abs(out.matrix()(e1 * dout + i, e2 * dout + j) - s), 1e-12);
        }
}

TEST(Channel, TracePreservedOnRandomInputs) {
  Rng rng(33);
  auto phi = haar_stinespring_channel({{"Q", 2}}, {{"S", 2}}, 2, rng);
  for (int t = 0; t < 100; ++t) {
    auto rho = ginibre_state({{"E", 2}, {"Q", 2}}, rng);
    auto r = apply_channel(phi, rho.op());
    EXPECT_LT(std::abs(r.trace() - 1.0), 1e-10);
  }
}

TEST(Channel, DimensionMismatch) {
  EXPECT_THROW(apply_channel(identity_channel({{"Q", 3}}), identity({{"Q", 2}})), DimensionError);
}

TEST(Channel, RejectsNonTracePreservingKraus) {
  EXPECT_THROW(KrausChannel({0.5 * Matrix::Identity(2, 2)}, {{"Q", 2}}, {{"S", 2}}, true), InvariantError);
  EXPECT_NO_THROW(KrausChannel({0.5 * Matrix::Identity(2, 2)}, {{"Q", 2}}, {{"S", 2}}, false));
}

TEST(Channel, ComposeAndTensor) {
  Rng rng(6);
  auto a = haar_stinespring_channel({{"Q", 2}}, {{"M", 2}}, 2, rng);
  auto b = haar_stinespring_channel({{"M", 2}}, {{"S", 2}}, 2, rng);
  auto rho = ginibre_state({{"Q", 2}}, rng);
  auto direct = apply_channel(b, apply_channel(a, rho.op()));
  auto composed = apply_channel(compose(b, a), rho.op());
  EXPECT_LT(max_abs(direct.matrix() - composed.matrix()), 1e-12);
  auto c = haar_stinespring_channel({{"P", 2}}, {{"T", 2}}, 2, rng);
  auto sigma = ginibre_state({{"Q", 2}, {"P", 2}}, rng);
  auto seq = apply_channel(c, apply_channel(a, sigma.op()));
  auto par = apply_channel(tensor(a, c), sigma.op());
  EXPECT_LT(max_abs(seq.matrix() - par.matrix()), 1e-12);
}

TEST(Random, Deterministic) {
  RandomSpec spec{42, RandomKind::ginibre_state, {{"A", 3}}};
  auto a = std::get<DensityOperator>(sample(spec));
  auto b = std::get<DensityOperator>(sample(spec));
  EXPECT_EQ(max_abs(a.matrix() - b.matrix()), 0.0);
  RandomSpec cs{42, RandomKind::haar_stinespring_channel, {{"Q", 2}}, {{"S", 2}}, 3};
  auto c1 = std::get<KrausChannel>(sample(cs));
  auto c2 = std::get<KrausChannel>(sample(cs));
  for (std::size_t i = 0; i < c1.kraus().size(); ++i) EXPECT_EQ(max_abs(c1.kraus()[i] - c2.kraus()[i]), 0.0);
  RandomSpec ds{42, RandomKind::classical_distribution};
  ds.n = 5;
  EXPECT_EQ(std::get<std::vector<double>>(sample(ds)), std::get<std::vector<double>>(sample(ds)));
}

TEST(Random, GinibreStateIsValid) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto rho = std::get<DensityOperator>(sample({seed, RandomKind::ginibre_state, {{"A", 4}}}));
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho.matrix());
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
    EXPECT_NEAR(rho.matrix().trace().real(), 1.0, 1e-12);
  }
}

TEST(Random, StinespringIsTracePreserving) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto phi = std::get<KrausChannel>(sample({seed, RandomKind::haar_stinespring_channel, {{"Q", 3}}, {{"S", 2}}, 4}));
    Matrix s = Matrix::Zero(3, 3);
    for (const auto& k : phi.kraus()) s += k.adjoint() * k;
    EXPECT_LT(max_abs(s - Matrix::Identity(3, 3)), 1e-10);
  }
}

TEST(Density, RejectsInvalid) {
  EXPECT_THROW(DensityOperator(LabeledOperator(Matrix::Identity(2, 2), {{"A", 2}})), InvariantError);
  EXPECT_THROW(DensityOperator(LabeledOperator(diag({1.5, -0.5}), {{"A", 2}})), InvariantError);
  EXPECT_THROW(LabeledOperator(Matrix::Identity(3, 3), {{"A", 2}}), DimensionError);
}
