#include <gtest/gtest.h>

#include <chrono>

#include "rnl/channel_norms.hpp"

using namespace rnl;

namespace {

OptimizerConfig quick(std::uint64_t seed = 0) {
  OptimizerConfig c;
  c.restarts = 2;
  c.seed = seed;
  return c;
}

KrausChannel random_channel(Rng& rng, int dr, int ds, int env = 2) {
  Factors out;
  if (dr > 1) out.push_back({"R", dr});
  out.push_back({"S", ds});
  return haar_stinespring_channel({{"Q", 2}}, out, env, rng);
}

std::vector<std::string> cond_of(const KrausChannel& phi) {
  return find_label(phi.out_factors(), "R") >= 0 ? std::vector<std::string>{"R"} : std::vector<std::string>{};
}

// H↑_α(S|R) of Φ(|ψ⟩⟨ψ|) by the σ path.
double output_entropy(const KrausChannel& phi, const Vector& psi, double alpha) {
  Matrix rho = phi.apply(psi * psi.adjoint());
  LabeledOperator out(rho, phi.out_factors());
  if (find_label(phi.out_factors(), "R") < 0) {
    // Unconditional Rényi entropy from the spectrum.
    Eigen::SelfAdjointEigenSolver<Matrix> es(herm(rho));
    double s = 0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) s += std::pow(std::max(es.eigenvalues()(i), 0.0), alpha);
    return std::log2(s) / (1 - alpha);
  }
  OptimizerConfig c;
  c.restarts = 1;
  return cond_renyi_up(out, {"R"}, alpha, c).value;
}

// H↑_α(S|R Q̃) at the purification of ρ_Q.
double purified_entropy(const KrausChannel& phi, const Matrix& rho, double alpha) {
  LabeledOperator in(rho, phi.in_factors());
  LabeledOperator pur = purify(DensityOperator(in));
  Factors tf{{"~Q", phi.in_dim()}};
  KrausChannel big = tensor(identity_channel(tf), phi);
  LabeledOperator out = apply_channel(big, pur);
  std::vector<std::string> cond{"~Q"};
  if (find_label(phi.out_factors(), "R") >= 0) cond.push_back("R");
  OptimizerConfig c;
  c.restarts = 1;
  return cond_renyi_up(out, cond, alpha, c).value;
}

Vector bloch_vector(double theta, double phi) {
  Vector v(2);
  v << std::cos(theta / 2), std::polar(std::sin(theta / 2), phi);
  return v;
}

KrausChannel measure_and_announce() {
  std::vector<Matrix> ks;
  for (int i = 0; i < 2; ++i) {
    Matrix k = Matrix::Zero(2, 2);
    k(i, i) = 1.0;
    ks.push_back(k);
  }
  return KrausChannel(ks, {{"Q", 2}}, {{"R", 2}, {"S", 1}});
}

KrausChannel pinching(int d) {
  std::vector<Matrix> ks;
  for (int i = 0; i < d; ++i) {
    Matrix k = Matrix::Zero(d, d);
    k(i, i) = 1.0;
    ks.push_back(k);
  }
  return KrausChannel(ks, {{"Q", d}}, {{"P", d}});
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

TEST(MinOutputEntropy, FullyDepolarizing) {
  for (double a : {1.5, 2.0, 3.0}) {
    auto r = min_output_entropy(depolarizing_channel(2, 1.0), {}, a, quick());
    EXPECT_NEAR(r.log_value, 1.0, 1e-7);
  }
}

TEST(MinOutputEntropy, Identity) {
  auto r = min_output_entropy(identity_channel({{"S", 2}}), {}, 2.0, quick());
  EXPECT_NEAR(r.log_value, 0.0, 1e-7);
}

TEST(MinOutputEntropy, RandomChannelAgainstSphereGrid) {
  Rng rng(21);
  const double pi = std::acos(-1.0);
  const double step = 0.05;
  for (int trial = 0; trial < 1; ++trial) {
    KrausChannel phi = random_channel(rng, 2, 2);
    double alpha = 2.0;
    auto r = min_output_entropy(phi, {"R"}, alpha, quick(trial));
    // Pure inputs suffice; sweep the sphere at arc spacing ≈ step.
    double grid = kInf;
    for (double th = 0; th <= pi + 1e-12; th += step) {
      int nphi = std::max(1, static_cast<int>(std::ceil(2 * pi * std::sin(th) / step)));
      for (int k = 0; k < nphi; ++k) grid = std::min(grid, output_entropy(phi, bloch_vector(th, 2 * pi * k / nphi), alpha));
    }
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.log_value, grid + 1e-6);
    EXPECT_GE(r.log_value, grid - 5e-3);
    // The witness value is reproduced by the σ path.
    Eigen::SelfAdjointEigenSolver<Matrix> es(r.witness.matrix());
    EXPECT_NEAR(output_entropy(phi, es.eigenvectors().col(1), alpha), r.log_value, 1e-5);
  }
}

TEST(CbNorm, FullyDepolarizing) {
  for (double a : {1.5, 2.0}) {
    auto r = cb_norm_1_to_1p(depolarizing_channel(2, 1.0), {}, a, quick());
    EXPECT_NEAR(r.log_value, 1.0, 1e-6);
  }
}

TEST(CbNorm, MeasureAndAnnounce) {
  auto r = cb_norm_1_to_1p(measure_and_announce(), {"R"}, 2.0, quick());
  EXPECT_NEAR(r.log_value, 0.0, 1e-9);
}

TEST(CbNorm, IdentityAgainstSpectrumGrid) {
  KrausChannel id = identity_channel({{"Q", 2}});
  KrausChannel phi(id.kraus(), {{"Q", 2}}, {{"S", 2}});
  for (double a : {1.5, 2.0, 3.0}) {
    auto r = cb_norm_1_to_1p(phi, {}, a, quick());
    double grid = kInf;
    for (double l = 0.0; l <= 0.5 + 1e-12; l += 0.05) {
      Matrix rho = Matrix::Zero(2, 2);
      rho(0, 0) = 1 - l;
      rho(1, 1) = l;
      grid = std::min(grid, purified_entropy(phi, rho, a));
    }
    EXPECT_NEAR(grid, -1.0, 1e-6);
    EXPECT_NEAR(r.log_value, -1.0, 1e-6);
    EXPECT_LE(r.log_value, grid + 1e-6);
  }
}

TEST(CbNorm, WitnessValueMatchesSigmaPath) {
  Rng rng(4);
  KrausChannel phi = random_channel(rng, 2, 2);
  auto r = cb_norm_1_to_1p(phi, {"R"}, 2.0, quick());
  EXPECT_NEAR(purified_entropy(phi, r.witness.matrix(), 2.0), r.log_value, 1e-5);
}

TEST(CbNorm, NotAboveMinOutputEntropy) {
  Rng rng(5);
  auto t0 = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 50; ++trial) {
    int dr = 1 + trial % 2;
    KrausChannel phi = random_channel(rng, dr, 2);
    double a = (trial % 3 == 0) ? 1.5 : (trial % 3 == 1 ? 2.0 : 3.0);
    auto moe = min_output_entropy(phi, cond_of(phi), a, quick(trial));
    auto cb = cb_norm_1_to_1p(phi, cond_of(phi), a, quick(trial));
    EXPECT_GE(moe.log_value - cb.log_value, -1e-4) << "trial " << trial;
  }
  RecordProperty("seconds", std::to_string(seconds_since(t0)));
}

TEST(CbNorm, UnitaryInputInvariance) {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    KrausChannel phi = random_channel(rng, 2, 2);
    Matrix u = haar_unitary(2, rng);
    KrausChannel rot({u}, {{"Q", 2}}, {{"Q", 2}});
    KrausChannel composed = compose(phi, rot);
    auto a = cb_norm_1_to_1p(phi, {"R"}, 2.0, quick(trial));
    auto b = cb_norm_1_to_1p(composed, {"R"}, 2.0, quick(trial + 100));
    EXPECT_NEAR(a.log_value, b.log_value, 1e-5);
  }
}

TEST(CbNorm, PolishNeverRaisesTheValueAndSettlesAcrossSeeds) {
  Rng rng(9);
  for (int trial = 0; trial < 4; ++trial) {
    KrausChannel phi = random_channel(rng, 2, 2);
    auto raw = quick(trial);
    raw.polish = 0;
    auto a = cb_norm_1_to_1p(phi, {"R"}, 3.0, raw);
    auto b = cb_norm_1_to_1p(phi, {"R"}, 3.0, quick(trial));
    auto c = cb_norm_1_to_1p(phi, {"R"}, 3.0, quick(trial + 50));
    EXPECT_LE(b.log_value, a.log_value + 1e-12);
    EXPECT_NEAR(b.log_value, c.log_value, 1e-5) << "trial " << trial;
    EXPECT_NEAR(purified_entropy(phi, b.witness.matrix(), 3.0), b.log_value, 1e-5);
  }
}

TEST(CbNorm, ProductOfChannelsIsFast) {
  Rng rng(8);
  KrausChannel p1 = random_channel(rng, 2, 2);
  KrausChannel p2 = haar_stinespring_channel({{"Q2", 2}}, {{"R2", 2}, {"S2", 2}}, 2, rng);
  KrausChannel prod = permute_outputs(tensor(p1, p2), {"R", "R2", "S", "S2"});
  auto t0 = std::chrono::steady_clock::now();
  auto r = cb_norm_1_to_1p(prod, {"R", "R2"}, 2.0, quick());
  double secs = seconds_since(t0);
  auto a = cb_norm_1_to_1p(p1, {"R"}, 2.0, quick());
  auto b = cb_norm_1_to_1p(p2, {"R2"}, 2.0, quick());
  EXPECT_LE(r.log_value, a.log_value + b.log_value + 1e-3);
  EXPECT_GE(r.log_value, a.log_value + b.log_value - 1e-3);
  RecordProperty("seconds", std::to_string(secs));
}

TEST(RestrictedCb, TrivialConstraintEqualsCb) {
  Rng rng(9);
  KrausChannel phi = random_channel(rng, 2, 2);
  auto c = cb_norm_1_to_1p(phi, {"R"}, 2.0, quick());
  auto r = restricted_cb_norm(phi, {"R"}, 2.0, LinearConstraint::trivial(phi.in_factors()), quick());
  EXPECT_NEAR(r.log_value, c.log_value, 1e-6);
  EXPECT_LT(r.constraint_violation, 1e-8);
}

TEST(RestrictedCb, SingletonConstraint) {
  Rng rng(10);
  KrausChannel phi = random_channel(rng, 2, 2);
  LinearConstraint pin(identity_channel({{"Q", 2}}), LabeledOperator(Matrix::Identity(2, 2) / 2.0, {{"Q", 2}}));
  auto r = restricted_cb_norm(phi, {"R"}, 2.0, pin, quick());
  EXPECT_LT(r.constraint_violation, 1e-8);
  EXPECT_NEAR(r.log_value, purified_entropy(phi, Matrix::Identity(2, 2) / 2.0, 2.0), 1e-5);
}

TEST(RestrictedCb, PinchedConstraintIsSatisfied) {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    KrausChannel phi = random_channel(rng, 2, 2);
    Matrix tau = Matrix::Zero(2, 2);
    double p = 0.2 + 0.1 * trial;
    tau(0, 0) = p;
    tau(1, 1) = 1 - p;
    LinearConstraint c(pinching(2), LabeledOperator(tau, {{"P", 2}}));
    auto r = restricted_cb_norm(phi, {"R"}, 2.0, c, quick(trial));
    auto free = cb_norm_1_to_1p(phi, {"R"}, 2.0, quick(trial));
    EXPECT_LT(r.constraint_violation, 1e-8);
    EXPECT_GE(r.log_value, free.log_value - 1e-6);
    EXPECT_NEAR(purified_entropy(phi, r.witness.matrix(), 2.0), r.log_value, 1e-5);
  }
}

TEST(RestrictedCb, InfeasibleConstraintThrows) {
  // Replacement channel onto |0⟩ cannot reach |1⟩⟨1|.
  std::vector<Matrix> ks;
  for (int i = 0; i < 2; ++i) {
    Matrix k = Matrix::Zero(2, 2);
    k(0, i) = 1.0;
    ks.push_back(k);
  }
  Matrix tau = Matrix::Zero(2, 2);
  tau(1, 1) = 1.0;
  LinearConstraint c(KrausChannel(ks, {{"Q", 2}}, {{"P", 2}}), LabeledOperator(tau, {{"P", 2}}));
  Rng rng(12);
  KrausChannel phi = random_channel(rng, 2, 2);
  EXPECT_THROW(restricted_cb_norm(phi, {"R"}, 2.0, c, quick()), InfeasibleError);
}

TEST(LinearConstraint, RejectsBadTargets) {
  Matrix tau = Matrix::Identity(2, 2);
  EXPECT_THROW(LinearConstraint(identity_channel({{"Q", 2}}), LabeledOperator(tau, {{"Q", 2}})), InvariantError);
  EXPECT_THROW(LinearConstraint(identity_channel({{"Q", 2}}), LabeledOperator(Matrix::Identity(3, 3) / 3.0, {{"Q", 3}})),
               DimensionError);
}

TEST(DualCertificate, ScaledIdentityIsFeasible) {
  Rng rng(13);
  KrausChannel phi = random_channel(rng, 2, 2);
  double alpha = 2.0;
  auto cb = cb_norm_1_to_1p(phi, {"R"}, alpha, quick());
  double norm = std::exp2(cb.log_value * (1 - alpha) / alpha);
  auto triv = LinearConstraint::trivial(phi.in_factors());
  Matrix sigma = Matrix::Identity(1, 1) * (norm + 1.0);
  auto d = dual_certificate_check(phi, {"R"}, alpha, triv, sigma, 30, 1);
  EXPECT_TRUE(d.feasible);
  EXPECT_NEAR(d.objective, norm + 1.0, 1e-12);
  EXPECT_LT(d.worst_gap, 0.0);
  // The optimum itself is tight on the witness.
  auto tight = dual_certificate_check(phi, {"R"}, alpha, triv, Matrix::Identity(1, 1) * norm, 30, 2,
                                      {cb.witness.matrix()});
  EXPECT_TRUE(tight.feasible);
  EXPECT_NEAR(tight.worst_gap, 0.0, 1e-6);
}

TEST(DualCertificate, ZeroIsInfeasible) {
  Rng rng(14);
  KrausChannel phi = random_channel(rng, 2, 2);
  auto d = dual_certificate_check(phi, {"R"}, 2.0, LinearConstraint::trivial(phi.in_factors()),
                                  Matrix::Zero(1, 1), 5, 3);
  EXPECT_FALSE(d.feasible);
  EXPECT_GT(d.worst_gap, 0.1);
}

TEST(DualCertificate, TensorOfFeasibleCertificates) {
  Rng rng(15);
  double alpha = 2.0;
  KrausChannel p1 = random_channel(rng, 2, 2);
  KrausChannel p2 = haar_stinespring_channel({{"Q2", 2}}, {{"R2", 2}, {"S2", 2}}, 2, rng);
  LinearConstraint c1(pinching(2), LabeledOperator(Matrix::Identity(2, 2) / 2.0, {{"P", 2}}));
  KrausChannel pin2(pinching(2).kraus(), {{"Q2", 2}}, {{"P2", 2}});
  LinearConstraint c2(pin2, LabeledOperator(Matrix::Identity(2, 2) / 2.0, {{"P2", 2}}));
  auto n1 = std::exp2(cb_norm_1_to_1p(p1, {"R"}, alpha, quick()).log_value * (1 - alpha) / alpha) + 1.0;
  auto n2 = std::exp2(cb_norm_1_to_1p(p2, {"R2"}, alpha, quick()).log_value * (1 - alpha) / alpha) + 1.0;
  Matrix s1 = Matrix::Identity(2, 2) * n1, s2 = Matrix::Identity(2, 2) * n2;
  ASSERT_TRUE(dual_certificate_check(p1, {"R"}, alpha, c1, s1, 10, 4).feasible);
  ASSERT_TRUE(dual_certificate_check(p2, {"R2"}, alpha, c2, s2, 10, 5).feasible);
  KrausChannel prod = permute_outputs(tensor(p1, p2), {"R", "R2", "S", "S2"});
  LinearConstraint cp(tensor(c1.n_map, c2.n_map), tensor(c1.tau, c2.tau));
  // Sampled inputs include entangled states (random rank) and products.
  std::vector<Matrix> extra;
  for (int k = 0; k < 5; ++k) extra.push_back(kron(ginibre_state_matrix(2, rng, 1), ginibre_state_matrix(2, rng)));
  auto d = dual_certificate_check(prod, {"R", "R2"}, alpha, cp, kron(s1, s2), 15, 6, extra);
  EXPECT_TRUE(d.feasible);
  EXPECT_NEAR(d.objective, n1 * n2, 1e-10);
}

TEST(PositivitySufficiency, GeneralInputsMatchPsdInputs) {
  Rng rng(16);
  auto t0 = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 20; ++trial) {
    KrausChannel phi = random_channel(rng, 1 + trial % 2, 2);
    double alpha = trial % 2 ? 1.5 : 2.0;
    auto psd = cb_norm_1_to_1p(phi, cond_of(phi), alpha, quick(trial));
    auto gen = cb_norm_general_inputs(phi, cond_of(phi), alpha, quick(trial + 1000), {psd.witness_psi});
    EXPECT_NEAR(gen.log_value, psd.log_value, 1e-4) << "trial " << trial;
  }
  RecordProperty("seconds", std::to_string(seconds_since(t0)));
}
