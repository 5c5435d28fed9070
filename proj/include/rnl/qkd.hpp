#pragma once

#include <optional>

#include "rnl/channel_norms.hpp"

namespace rnl {

class CertificateError : public Error {
 public:
  using Error::Error;
};

inline double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error("binary entropy needs p in [0, 1]");
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log2(p) - (1 - p) * std::log2(1 - p);
}

/// One round: M: Q → X A with classical announcement X, constraint 𝒩(ρ_Q) = τ and an honest input.
struct ProtocolRound {
  std::string name;
  KrausChannel m_map;
  std::vector<std::string> x_labels;
  LinearConstraint constraint;
  DensityOperator honest_input;
  std::optional<WeightFunction> f;  // per key round, like key_rate_h
  double key_fraction = 1.0;        // fraction of rounds that produce key
  std::optional<double> error_rate;

  int dim_q() const { return m_map.in_dim(); }
  int dim_x() const { return m_map.out_factors()[0].dim; }
  int dim_a() const { return m_map.out_factors()[1].dim; }

  /// Kraus operators of M followed by projection onto |x⟩, as maps Q → A.
  std::vector<Matrix> x_kraus(int x) const {
    std::vector<Matrix> out;
    int da = dim_a();
    for (const auto& k : m_map.kraus()) {
      Matrix b = k.middleRows(x * da, da);
      if (b.norm() > 1e-14) out.push_back(b);
    }
    return out;
  }

  Matrix povm(int x) const {
    Matrix p = Matrix::Zero(dim_q(), dim_q());
    for (const auto& k : x_kraus(x)) p += k.adjoint() * k;
    return herm(p);
  }

  RealVector distribution(const Matrix& rho) const {
    RealVector q(dim_x());
    for (int x = 0; x < dim_x(); ++x) q(x) = (povm(x) * rho).trace().real();
    return q;
  }

  RealVector honest_distribution() const { return distribution(honest_input.matrix()); }

  int index_of(const std::string& x) const {
    for (std::size_t i = 0; i < x_labels.size(); ++i)
      if (x_labels[i] == x) return static_cast<int>(i);
    throw LabelError("unknown announcement '" + x + "'");
  }

  void require_strictly_positive() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(honest_input.matrix(), Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 1e-12)) throw InvariantError("honest input must be strictly positive");
  }

  void validate() const {
    const Factors& of = m_map.out_factors();
    if (of.size() != 2) throw DimensionError("round map must output exactly X and A");
    if (!m_map.trace_preserving()) throw InvariantError("round map must be trace preserving");
    if (static_cast<int>(x_labels.size()) != dim_x()) throw DimensionError("announcement labels do not match X");
    if (constraint.n_map.in_dim() != dim_q()) throw DimensionError("constraint does not act on the round input");
    if (honest_input.dim() != dim_q()) throw DimensionError("honest input does not live on the round input");
    if (!(key_fraction > 0.0 && key_fraction <= 1.0)) throw InvariantError("key fraction must lie in (0, 1]");
    for (int x = 0; x < dim_x(); ++x)
      for (int y = x + 1; y < dim_x(); ++y) {
        int da = dim_a();
        Matrix c = Matrix::Zero(da * da, dim_q() * dim_q());
        for (const auto& k : m_map.kraus()) c += kron(k.middleRows(x * da, da), k.middleRows(y * da, da).conjugate());
        if (c.norm() > 1e-10) throw InvariantError("round output is not block diagonal in X");
      }
  }
};

namespace detail {

inline const char* basis_name(int b) { return b == 0 ? "Z" : "X"; }

// Eigenvector a of Z (b = 0) or X (b = 1).
inline Vector bb84_vector(int b, int a) {
  Vector v(2);
  if (b == 0) {
    v << (a == 0 ? 1.0 : 0.0), (a == 0 ? 0.0 : 1.0);
  } else {
    const double s = 1.0 / std::sqrt(2.0);
    v << s, (a == 0 ? s : -s);
  }
  return v;
}

}  // namespace detail

/// Entanglement-based BB84 round on Q = Q_A Q_B. Announcements are basis pairs for key rounds and
/// basis pairs with both outcomes for test rounds; A ∈ {0, 1, ⊥} with ⊥ = 2.
inline ProtocolRound build_bb84_round(double p, double p_test = 0.1) {
  if (!(p >= 0.0 && p < 0.5)) throw Error("BB84 error rate must lie in [0, 1/2)");
  if (!(p_test > 0.0 && p_test < 1.0)) throw Error("test probability must lie in (0, 1)");
  ProtocolRound r;
  r.name = "bb84";
  r.key_fraction = 1.0 - p_test;
  r.error_rate = p;
  const int da = 3;
  std::vector<std::tuple<int, int, int, int, int>> xs;  // (bA, bB, test, a, b)
  for (int ba = 0; ba < 2; ++ba)
    for (int bb = 0; bb < 2; ++bb) {
      xs.emplace_back(ba, bb, 0, -1, -1);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) xs.emplace_back(ba, bb, 1, a, b);
    }
  for (const auto& [ba, bb, t, a, b] : xs) {
    std::string s = std::string(detail::basis_name(ba)) + detail::basis_name(bb);
    r.x_labels.push_back(t ? s + ":test:" + std::to_string(a) + std::to_string(b) : s + ":key");
  }
  int dx = static_cast<int>(xs.size());
  std::vector<Matrix> ks;
  for (int x = 0; x < dx; ++x) {
    auto [ba, bb, t, a0, b0] = xs[x];
    double w = 0.25 * (t ? p_test : 1.0 - p_test);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        if (t && (a != a0 || b != b0)) continue;
        Vector bra = kron(Matrix(detail::bb84_vector(ba, a)), Matrix(detail::bb84_vector(bb, b)));
        Matrix k = Matrix::Zero(dx * da, 4);
        k.row(x * da + (t ? 2 : a)) = std::sqrt(w) * bra.adjoint();
        ks.push_back(k);
      }
  }
  r.m_map = KrausChannel(ks, {{"QA", 2}, {"QB", 2}}, {{"X", dx}, {"A", da}});
  // 𝒩 = tr_{Q_B}, τ = 𝟙/2.
  std::vector<Matrix> nk;
  for (int b = 0; b < 2; ++b) {
    Matrix k = Matrix::Zero(2, 4);
    for (int a = 0; a < 2; ++a) k(a, 2 * a + b) = 1.0;
    nk.push_back(k);
  }
  r.constraint = LinearConstraint(KrausChannel(nk, {{"QA", 2}, {"QB", 2}}, {{"QA", 2}}),
                                  LabeledOperator(Matrix::Identity(2, 2) / 2.0, {{"QA", 2}}));
  Vector phi = Vector::Zero(4);
  phi(0) = phi(3) = 1.0 / std::sqrt(2.0);
  Matrix hon = (1 - 2 * p) * phi * phi.adjoint() + (p / 2) * Matrix::Identity(4, 4);
  r.honest_input = DensityOperator(LabeledOperator(hon, {{"QA", 2}, {"QB", 2}}));
  r.validate();
  return r;
}

namespace detail {

// −tr ω log ω from a factor W (ω = W W*) with gradient G_W = −2 (log ω + 1) W, in nats.
inline double factor_entropy(const Matrix& w, Matrix* g) {
  bool gram_small = w.cols() <= w.rows();
  Matrix gram = gram_small ? Matrix(w.adjoint() * w) : Matrix(w * w.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm(gram));
  const RealVector& lam = es.eigenvalues();
  double top = std::max(lam.maxCoeff(), 0.0);
  double s = 0.0;
  RealVector l(lam.size());
  for (int i = 0; i < lam.size(); ++i) {
    if (lam(i) > 1e-14 * top && lam(i) > 0) {
      s -= lam(i) * std::log(lam(i));
      l(i) = std::log(lam(i)) + 1.0;
    } else {
      l(i) = 0.0;
    }
  }
  if (g) {
    Matrix lm = from_spectrum(es.eigenvectors(), l);
    *g = gram_small ? Matrix(-2.0 * w * lm) : Matrix(-2.0 * lm * w);
  }
  return s;
}

// H(A|XE) in bits at the pure state with coefficient matrix Ψ, E ≅ Q.
class KeyEntropy {
 public:
  explicit KeyEntropy(const ProtocolRound& r) : da_(r.dim_a()) {
    for (int x = 0; x < r.dim_x(); ++x) blocks_.push_back(r.x_kraus(x));
  }

  double operator()(const Matrix& psi, Matrix* grad) const {
    int de = static_cast<int>(psi.rows()), dq = static_cast<int>(psi.cols());
    double total = 0.0;
    if (grad) *grad = Matrix::Zero(de, dq);
    for (const auto& ks : blocks_) {
      int k = static_cast<int>(ks.size());
      if (k == 0) continue;
      Matrix w(de * da_, k), v(de, da_ * k);
      std::vector<Matrix> m(k);
      for (int i = 0; i < k; ++i) {
        m[i] = psi * ks[i].transpose();
        for (int e = 0; e < de; ++e)
          for (int a = 0; a < da_; ++a) w(e * da_ + a, i) = m[i](e, a);
        v.middleCols(i * da_, da_) = m[i];
      }
      Matrix gw, gv;
      double hea = factor_entropy(w, grad ? &gw : nullptr);
      double he = factor_entropy(v, grad ? &gv : nullptr);
      total += hea - he;
      if (grad) {
        for (int i = 0; i < k; ++i) {
          Matrix u(de, da_);
          for (int e = 0; e < de; ++e)
            for (int a = 0; a < da_; ++a) u(e, a) = gw(e * da_ + a, i);
          *grad += (u - gv.middleCols(i * da_, da_)) * ks[i].conjugate();
        }
      }
    }
    const double ln2 = std::log(2.0);
    if (grad) *grad /= ln2;
    return total / ln2;
  }

 private:
  int da_;
  std::vector<std::vector<Matrix>> blocks_;
};

inline LinearFunctionals round_functionals(const ProtocolRound& r, const RealVector& q) {
  LinearFunctionals lf;
  lf.add(r.constraint);
  for (int x = 0; x < r.dim_x(); ++x) {
    Matrix p = r.povm(x);
    double s = p.norm();
    if (s < 1e-14) continue;
    lf.e.push_back(p / s);
    lf.b.push_back(q(x) / s);
  }
  return lf;
}

inline Matrix canonical_psi(const Matrix& rho) { return psd_power(herm(rho), 0.5).transpose(); }

}  // namespace detail

struct KeyRateResult {
  double value = 0.0;  // bits per key round
  bool converged = true;
  double violation = 0.0;
  Matrix witness;  // ρ_Q
};

/// min H(A|XE) over ρ_Q with 𝒩(ρ_Q) = τ and announcement statistics q, divided by the key fraction.
inline KeyRateResult key_rate_h(const ProtocolRound& round, const RealVector& q, const OptimizerConfig& cfg = {},
                                std::vector<Matrix> starts = {}) {
  if (q.size() != round.dim_x()) throw DimensionError("target distribution has the wrong length");
  if (q.minCoeff() < -1e-12 || std::abs(q.sum() - 1.0) > 1e-9) throw InvariantError("target is not a probability vector");
  LinearFunctionals lf = detail::round_functionals(round, q);
  detail::KeyEntropy obj(round);
  int d = round.dim_q();
  starts.push_back(detail::canonical_psi(round.honest_input.matrix()));
  starts.push_back(Matrix::Identity(d, d) / std::sqrt(double(d)));
  Rng rng(mix_seed(cfg.seed, 31));
  for (int r = 0; r < cfg.restarts; ++r) starts.push_back(ginibre_matrix(d, d, rng));
  OptimizerConfig oc = cfg;
  oc.rel_tol = std::max(cfg.rel_tol, 1e-13);
  oc.grad_tol = std::max(cfg.grad_tol, 1e-10);
  PureSolution sol = solve_pure([&](const Matrix& psi, Matrix* g) { return obj(psi, g); }, d, d, lf, starts, oc);
  if (sol.violation > 1e-7) throw InfeasibleError("announcement distribution is not reachable under the constraint");
  KeyRateResult res;
  res.value = sol.value / round.key_fraction;
  res.converged = sol.converged;
  res.violation = sol.violation;
  res.witness = herm(reduced_from_coefficients(sol.psi));
  return res;
}

inline KeyRateResult key_rate_h(const ProtocolRound& round, const OptimizerConfig& cfg = {}) {
  return key_rate_h(round, round.honest_distribution(), cfg);
}

namespace detail {

// Orthonormal announcement-space directions reachable by Hermitian perturbations of ρ that keep 𝒩(ρ) fixed,
// each paired with one such perturbation.
inline std::pair<RealMatrix, std::vector<Matrix>> feasible_directions(const ProtocolRound& r) {
  int d = r.dim_q();
  auto basis = hermitian_basis(d);
  int nb = static_cast<int>(basis.size());
  LinearFunctionals nl;
  nl.add(r.constraint);
  RealMatrix nmap(nl.e.size(), nb), qmap(r.dim_x(), nb);
  for (int j = 0; j < nb; ++j) {
    for (std::size_t k = 0; k < nl.e.size(); ++k) nmap(k, j) = (nl.e[k] * basis[j]).trace().real();
    for (int x = 0; x < r.dim_x(); ++x) qmap(x, j) = (r.povm(x) * basis[j]).trace().real();
  }
  Eigen::FullPivLU<RealMatrix> lu(nmap);
  lu.setThreshold(1e-10);
  RealMatrix kernel = lu.kernel();
  if (lu.dimensionOfKernel() == 0 || kernel.cols() == 0 || kernel.isZero()) return {RealMatrix(r.dim_x(), 0), {}};
  RealMatrix img = qmap * kernel;
  Eigen::JacobiSVD<RealMatrix> svd(img, Eigen::ComputeFullU | Eigen::ComputeFullV);
  int rank = 0;
  const RealVector& s = svd.singularValues();
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > 1e-9 * std::max(1.0, s(0))) ++rank;
  RealMatrix dirs = svd.matrixU().leftCols(rank);
  std::vector<Matrix> drho;
  for (int i = 0; i < rank; ++i) {
    RealVector coef = kernel * svd.matrixV().col(i) / s(i);
    Matrix m = Matrix::Zero(d, d);
    for (int j = 0; j < nb; ++j) m += coef(j) * basis[j];
    drho.push_back(m);
  }
  return {dirs, drho};
}

// Random state satisfying the round constraint.
inline Matrix random_feasible_state(const ProtocolRound& r, Rng& rng) {
  LinearFunctionals nl;
  nl.add(r.constraint);
  int d = r.dim_q();
  for (int t = 0; t < 20; ++t) {
    double viol;
    Matrix psi = project_onto(ginibre_matrix(d, d, rng), nl, &viol);
    if (viol < 1e-10) {
      Matrix rho = reduced_from_coefficients(psi);
      return herm(rho / rho.trace().real());
    }
  }
  throw InfeasibleError("could not sample a feasible state");
}

}  // namespace detail

struct HyperplaneResult {
  WeightFunction f;
  double h_honest = 0.0;
  double tangency_gap = 0.0;     // Σ f q_hon − h(q_hon)
  double worst_probe_gap = 0.0;  // max over probes of Σ f q − h(q)
  int probes = 0;
};

/// Affine minorant of q ↦ key_rate_h(round, q) touching at q_hon, from central differences along
/// feasible directions, checked on random feasible probe distributions.
inline HyperplaneResult supporting_hyperplane(const ProtocolRound& round, const RealVector& q_hon,
                                              const OptimizerConfig& cfg = {}, int probes = 20, double step = 1e-3) {
  round.require_strictly_positive();
  Eigen::SelfAdjointEigenSolver<Matrix> es(round.honest_input.matrix(), Eigen::EigenvaluesOnly);
  double lam_min = es.eigenvalues().minCoeff();
  auto base = key_rate_h(round, q_hon, cfg);
  std::vector<Matrix> warm{detail::canonical_psi(base.witness)};
  auto [dirs, drho] = detail::feasible_directions(round);
  int nx = round.dim_x();
  RealVector grad = RealVector::Zero(nx);
  for (int j = 0; j < dirs.cols(); ++j) {
    double op = drho[j].cwiseAbs().sum();
    double s = std::min(step, 0.25 * lam_min / std::max(op, 1e-300));
    RealVector qp = q_hon + s * dirs.col(j), qm = q_hon - s * dirs.col(j);
    double hp = key_rate_h(round, qp, cfg, warm).value;
    double hm = key_rate_h(round, qm, cfg, warm).value;
    grad += (hp - hm) / (2 * s) * dirs.col(j);
  }
  double c = base.value - grad.dot(q_hon);
  std::map<std::string, double> table;
  for (int x = 0; x < nx; ++x) table[round.x_labels[x]] = grad(x) + c;
  HyperplaneResult res;
  res.f = WeightFunction(table);
  res.h_honest = base.value;
  RealVector fv(nx);
  for (int x = 0; x < nx; ++x) fv(x) = res.f(round.x_labels[x]);
  res.tangency_gap = fv.dot(q_hon) - base.value;
  res.worst_probe_gap = -kInf;
  Rng rng(mix_seed(cfg.seed, 37));
  for (int k = 0; k < probes; ++k) {
    Matrix rho = detail::random_feasible_state(round, rng);
    RealVector q = round.distribution(rho);
    double h = key_rate_h(round, q, cfg, {detail::canonical_psi(rho)}).value;
    res.worst_probe_gap = std::max(res.worst_probe_gap, fv.dot(q) - h);
  }
  res.probes = probes;
  if (probes > 0 && res.worst_probe_gap > 5e-3)
    throw CertificateError("hyperplane exceeds the key rate on a probe by " + std::to_string(res.worst_probe_gap));
  return res;
}

enum class PenaltySign { conservative, verbatim };

/// g_n(xⁿ) = max(0, ⌊Σ_t f_t(x_t) − δ⌋) with f_t in bits per round.
struct PostProcessing {
  std::vector<WeightFunction> f;
  double delta = 0.0;
  double alpha = 0.0;
  double eta = 0.0;

  double fn(const std::vector<std::string>& xs) const {
    if (xs.size() != f.size()) throw DimensionError("announcement string has the wrong length");
    double s = 0.0;
    for (std::size_t t = 0; t < xs.size(); ++t) s += f[t](xs[t]);
    return s;
  }

  long long operator()(const std::vector<std::string>& xs) const {
    double v = std::floor(fn(xs) - delta);
    return v > 0 ? static_cast<long long>(v) : 0;
  }
};

/// f scaled to bits per round (key_rate_h is per key round).
inline WeightFunction round_weights(const ProtocolRound& r) {
  if (!r.f) throw Error("round '" + r.name + "' has no weight function");
  std::map<std::string, double> t;
  for (const auto& [k, v] : r.f->table()) t[k] = r.key_fraction * v;
  return WeightFunction(t);
}

inline double penalty_delta(int n, double alpha, double eta, double eps, PenaltySign sign) {
  double le = std::log2(eta);
  double smooth = n * (alpha - 1.0) * le * le;
  double sec = alpha / (alpha - 1.0) * std::log2(1.0 / eps);
  return sign == PenaltySign::conservative ? smooth + sec : smooth - sec;
}

inline PostProcessing build_g_n(const std::vector<ProtocolRound>& rounds, double eps, double alpha,
                                PenaltySign sign = PenaltySign::conservative) {
  if (rounds.empty()) throw Error("need at least one round");
  if (!(eps > 0.0 && eps < 1.0)) throw Error("eps must lie in (0, 1)");
  PostProcessing g;
  for (const auto& r : rounds) {
    g.f.push_back(round_weights(r));
    g.eta = std::max(g.eta, eta_zero(g.f.back(), r.dim_a()));
  }
  double upper = 1.0 + 1.0 / std::log2(g.eta);
  if (!(alpha > 1.0 && alpha < upper))
    throw Error("alpha must lie in (1, " + std::to_string(upper) + ") for these weights");
  g.alpha = alpha;
  g.delta = penalty_delta(static_cast<int>(rounds.size()), alpha, g.eta, eps, sign);
  return g;
}

struct ScheduleEntry {
  ProtocolRound round;
  double weight = 1.0;
};

struct RateBreakdown {
  std::vector<double> h_values;
  double r_ad = 0.0;
  double r_na = 0.0;
  double ec_error = 0.0;
  double ec_cost = 0.0;
  double sk_adaptive = 0.0;
  double sk_static = 0.0;
  double improvement = 0.0;  // sk_adaptive / sk_static − 1
  bool converged = true;
};

inline std::vector<double> normalized_weights(const std::vector<ScheduleEntry>& s) {
  if (s.empty()) throw Error("schedule is empty");
  double tot = 0;
  for (const auto& e : s) {
    if (!(e.weight > 0)) throw InvariantError("schedule weights must be positive");
    tot += e.weight;
  }
  std::vector<double> w;
  for (const auto& e : s) w.push_back(e.weight / tot);
  return w;
}

inline bool same_protocol(const ProtocolRound& a, const ProtocolRound& b) {
  if (a.x_labels != b.x_labels || a.key_fraction != b.key_fraction) return false;
  if (a.m_map.kraus().size() != b.m_map.kraus().size()) return false;
  for (std::size_t i = 0; i < a.m_map.kraus().size(); ++i) {
    if (a.m_map.kraus()[i].rows() != b.m_map.kraus()[i].rows() || a.m_map.kraus()[i].cols() != b.m_map.kraus()[i].cols())
      return false;
    if ((a.m_map.kraus()[i] - b.m_map.kraus()[i]).norm() > 1e-12) return false;
  }
  const Matrix &ta = a.constraint.tau.matrix(), &tb = b.constraint.tau.matrix();
  return ta.rows() == tb.rows() && (ta - tb).norm() < 1e-12;
}

/// Adaptive and non-adaptive asymptotic rates. ec_error defaults to the weighted mean error rate.
inline RateBreakdown asymptotic_rates(const std::vector<ScheduleEntry>& schedule, std::optional<double> ec_error = {},
                                      const OptimizerConfig& cfg = {}) {
  auto w = normalized_weights(schedule);
  RateBreakdown out;
  RealVector qbar = RealVector::Zero(schedule[0].round.dim_x());
  double pbar = 0.0;
  bool have_p = true;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& r = schedule[i].round;
    if (!same_protocol(r, schedule[0].round)) throw Error("non-adaptive rate needs a single protocol across the schedule");
    RealVector q = r.honest_distribution();
    auto h = key_rate_h(r, q, cfg);
    out.h_values.push_back(h.value);
    out.converged = out.converged && h.converged;
    out.r_ad += w[i] * h.value;
    qbar += w[i] * q;
    if (r.error_rate) {
      pbar += w[i] * *r.error_rate;
    } else {
      have_p = false;
    }
  }
  auto hn = key_rate_h(schedule[0].round, qbar, cfg);
  out.r_na = hn.value;
  out.converged = out.converged && hn.converged;
  out.ec_error = ec_error ? *ec_error : (have_p ? pbar : 0.0);
  out.ec_cost = binary_entropy(out.ec_error);
  out.sk_adaptive = out.r_ad - out.ec_cost;
  out.sk_static = out.r_na - out.ec_cost;
  out.improvement = out.sk_adaptive / out.sk_static - 1.0;
  return out;
}

/// Round t of n uses the schedule entry whose cumulative weight interval contains (t + ½)/n.
inline std::vector<int> expand_schedule(const std::vector<ScheduleEntry>& schedule, int n) {
  auto w = normalized_weights(schedule);
  std::vector<int> idx(n);
  for (int t = 0; t < n; ++t) {
    double u = (t + 0.5) / n, acc = 0.0;
    int j = 0;
    for (; j + 1 < static_cast<int>(w.size()); ++j) {
      acc += w[j];
      if (u < acc) break;
    }
    idx[t] = j;
  }
  return idx;
}

/// Toeplitz matrix over GF(2) with k rows and m columns from k + m − 1 seed bits.
inline std::vector<int> toeplitz_hash(const std::vector<int>& seed, int k, const std::vector<int>& in) {
  int m = static_cast<int>(in.size());
  if (static_cast<int>(seed.size()) != std::max(0, k + m - 1)) throw DimensionError("Toeplitz seed has the wrong length");
  std::vector<int> out(k, 0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < m; ++j) out[i] ^= seed[i - j + m - 1] & in[j];
  return out;
}

inline int bits_per_symbol(int d) {
  int b = 0;
  while ((1 << b) < d) ++b;
  return b;
}

struct SecurityReport {
  double epsilon = 0.0;
  double bound = kInf;           // from the f-weighted entropy with f = key length
  double f_weighted_entropy = 0.0;
  double alpha = 0.0;
  int outcomes = 0;
};

namespace detail {

struct CqBlock {
  std::vector<std::string> xs;
  double weight = 0.0;
  std::vector<Matrix> e_given_a;  // unnormalized ρ_E^{x,a} indexed by a ∈ 𝔸ⁿ
  Matrix w;                       // factor of ρ^x_{EA}, rows e·|𝔸ⁿ| + a
};

// Blocks of (Mⁿ ⊗ id_E)(ψψ*) for a pure state with coefficient matrix Ψ (d_E × d_Qⁿ).
inline std::vector<CqBlock> cq_blocks(const std::vector<ProtocolRound>& rounds, const Matrix& psi) {
  int n = static_cast<int>(rounds.size());
  int de = static_cast<int>(psi.rows());
  std::vector<int> dx(n), da(n);
  int dan = 1;
  for (int t = 0; t < n; ++t) {
    dx[t] = rounds[t].dim_x();
    da[t] = rounds[t].dim_a();
    dan *= da[t];
  }
  std::vector<std::vector<std::vector<Matrix>>> kx(n);
  for (int t = 0; t < n; ++t)
    for (int x = 0; x < dx[t]; ++x) kx[t].push_back(rounds[t].x_kraus(x));
  std::vector<CqBlock> out;
  std::vector<int> x(n, 0);
  while (true) {
    // Kraus products for this announcement string.
    std::vector<Matrix> prods{Matrix::Identity(1, 1)};
    for (int t = 0; t < n; ++t) {
      std::vector<Matrix> next;
      for (const auto& a : prods)
        for (const auto& b : kx[t][x[t]]) next.push_back(kron(a, b));
      prods = std::move(next);
    }
    if (!prods.empty()) {
      int k = static_cast<int>(prods.size());
      Matrix w(de * dan, k);
      for (int i = 0; i < k; ++i) {
        Matrix m = psi * prods[i].transpose();
        for (int e = 0; e < de; ++e)
          for (int a = 0; a < dan; ++a) w(e * dan + a, i) = m(e, a);
      }
      double weight = w.squaredNorm();
      if (weight > 1e-15) {
        CqBlock b;
        for (int t = 0; t < n; ++t) b.xs.push_back(rounds[t].x_labels[x[t]]);
        b.weight = weight;
        b.w = w;
        for (int a = 0; a < dan; ++a) {
          Matrix rows(de, k);
          for (int e = 0; e < de; ++e) rows.row(e) = w.row(e * dan + a);
          b.e_given_a.push_back(rows * rows.adjoint());
        }
        out.push_back(std::move(b));
      }
    }
    int t = n - 1;
    while (t >= 0 && ++x[t] == dx[t]) x[t--] = 0;
    if (t < 0) break;
  }
  return out;
}

inline std::vector<int> symbol_bits(const std::vector<int>& da, int a) {
  std::vector<int> bits;
  std::vector<int> digits(da.size());
  for (int t = static_cast<int>(da.size()) - 1; t >= 0; --t) {
    digits[t] = a % da[t];
    a /= da[t];
  }
  for (std::size_t t = 0; t < da.size(); ++t) {
    int nb = bits_per_symbol(da[t]);
    for (int b = nb - 1; b >= 0; --b) bits.push_back((digits[t] >> b) & 1);
  }
  return bits;
}

}  // namespace detail

/// Exact ε of the variable-length extraction, averaged over every Toeplitz seed, for input ρ on Qⁿ
/// with E its canonical purification. A must be classical.
inline SecurityReport exact_security(const std::vector<ProtocolRound>& rounds, const Matrix& rho_qn,
                                     const std::function<long long(const std::vector<std::string>&)>& key_length,
                                     double alpha = 2.0, int bound_iters = 200) {
  int dq = 1, dan = 1, m = 0;
  std::vector<int> da;
  for (const auto& r : rounds) {
    dq *= r.dim_q();
    dan *= r.dim_a();
    da.push_back(r.dim_a());
    m += bits_per_symbol(r.dim_a());
  }
  if (rho_qn.rows() != dq) throw DimensionError("input state does not match the rounds");
  if (dq > 256) throw DimensionError("exact security needs an environment of dimension at most 256");
  Matrix psi = detail::canonical_psi(rho_qn / rho_qn.trace());
  auto blocks = detail::cq_blocks(rounds, psi);
  int de = static_cast<int>(psi.rows());
  std::vector<std::vector<int>> abits;
  for (int a = 0; a < dan; ++a) abits.push_back(detail::symbol_bits(da, a));
  SecurityReport rep;
  rep.alpha = alpha;
  rep.outcomes = static_cast<int>(blocks.size());
  std::vector<double> terms;
  for (const auto& b : blocks) {
    long long k = key_length(b.xs);
    // f-weighted bound term with f = k.
    double log2_norm;
    if (de > 1 && dan > 1) {
      // Any F gives an upper bound on the norm, so a capped solve keeps the bound valid.
      detail::FactoredNorm fn(de, dan, alpha);
      OptimizerConfig c = ChannelEntropyProblem::inner_defaults();
      c.max_iters = bound_iters;
      c.rel_tol = 1e-12;
      auto sol = fn.solve(b.w, {fn.mixed_start()}, c, false);
      log2_norm = sol.log_norm / std::log(2.0);
    } else {
      Matrix gram = b.w.adjoint() * b.w;
      log2_norm = std::log2(schatten_norm(gram, de > 1 ? 1.0 : alpha));
    }
    terms.push_back((alpha - 1.0) / alpha * static_cast<double>(k) + log2_norm);
    if (k <= 0) continue;
    if (k > 20 || k + m - 1 > 20) throw DimensionError("exact security enumerates at most 2^20 seeds");
    int sb = std::max(0, static_cast<int>(k) + m - 1);
    long long nseeds = 1LL << sb;
    int nk = 1 << k;
    Matrix rho_e = Matrix::Zero(de, de);
    for (const auto& r : b.e_given_a) rho_e += r;
    double acc = 0.0;
    for (long long s = 0; s < nseeds; ++s) {
      std::vector<int> seed(sb);
      for (int i = 0; i < sb; ++i) seed[i] = (s >> i) & 1;
      std::vector<Matrix> per(nk, Matrix::Zero(de, de));
      for (int a = 0; a < dan; ++a) {
        auto key = toeplitz_hash(seed, static_cast<int>(k), abits[a]);
        int kv = 0;
        for (int bit : key) kv = 2 * kv + bit;
        per[kv] += b.e_given_a[a];
      }
      double tn = 0.0;
      for (int kv = 0; kv < nk; ++kv) tn += schatten_norm(herm(per[kv] - rho_e / nk), 1.0);
      acc += tn;
    }
    rep.epsilon += 0.5 * acc / static_cast<double>(nseeds);
  }
  double top = *std::max_element(terms.begin(), terms.end());
  double s = 0;
  for (double t : terms) s += std::exp2(t - top);
  rep.f_weighted_entropy = alpha / (1.0 - alpha) * (top + std::log2(s));
  // Rényi leftover hashing for 2-universal families, α ∈ (1, 2].
  rep.bound = std::exp2(2.0 / alpha - 2.0 + (alpha - 1.0) / alpha * -rep.f_weighted_entropy);
  return rep;
}

struct SimulationResult {
  std::vector<std::vector<std::string>> samples;
  std::vector<long long> key_lengths;
  double empirical_rate = 0.0;  // mean key length / n
  double alpha = 0.0;
  double delta = 0.0;
  std::optional<SecurityReport> security;
};

inline double default_alpha(int n, double eta) {
  double a = 1.0 + 1.0 / std::sqrt(static_cast<double>(n));
  return std::min(a, 1.0 + 0.99 / std::log2(eta));
}

inline std::vector<std::string> sample_announcements(const std::vector<ProtocolRound>& rounds,
                                                     const std::vector<RealVector>& q, Rng& rng) {
  std::vector<std::string> xs;
  for (std::size_t t = 0; t < rounds.size(); ++t) {
    double u = uniform01(rng), acc = 0.0;
    int x = 0;
    for (; x + 1 < q[t].size(); ++x) {
      acc += q[t](x);
      if (u < acc) break;
    }
    xs.push_back(rounds[t].x_labels[x]);
  }
  return xs;
}

/// Rate-only simulation with `samples` draws of xⁿ from the honest statistics; the exact
/// security report is added when requested and the input space is small enough.
inline SimulationResult simulate_protocol(const std::vector<ScheduleEntry>& schedule, int n, std::uint64_t seed, double eps,
                                          int samples = 1, std::optional<double> alpha = {}, bool exact = false,
                                          PenaltySign sign = PenaltySign::conservative) {
  if (n < 1) throw Error("n must be positive");
  if (samples < 1) throw Error("need at least one sample");
  for (const auto& e : schedule)
    if (!e.round.f) throw Error("every schedule entry needs a weight function");
  auto idx = expand_schedule(schedule, n);
  std::vector<ProtocolRound> rounds;
  std::vector<RealVector> q;
  std::vector<RealVector> qs;
  for (const auto& e : schedule) qs.push_back(e.round.honest_distribution());
  for (int t = 0; t < n; ++t) {
    rounds.push_back(schedule[idx[t]].round);
    q.push_back(qs[idx[t]]);
  }
  double eta = 0.0;
  for (const auto& e : schedule) eta = std::max(eta, eta_zero(round_weights(e.round), e.round.dim_a()));
  double a = alpha ? *alpha : default_alpha(n, eta);
  PostProcessing g = build_g_n(rounds, eps, a, sign);
  SimulationResult res;
  res.alpha = a;
  res.delta = g.delta;
  Rng rng(seed);
  double tot = 0.0;
  for (int s = 0; s < samples; ++s) {
    auto xs = sample_announcements(rounds, q, rng);
    long long k = g(xs);
    tot += static_cast<double>(k);
    res.key_lengths.push_back(k);
    res.samples.push_back(std::move(xs));
  }
  res.empirical_rate = tot / samples / n;
  if (exact) {
    Matrix rho = Matrix::Identity(1, 1);
    for (const auto& r : rounds) rho = kron(rho, r.honest_input.matrix());
    res.security = exact_security(rounds, rho, [&](const std::vector<std::string>& xs) { return g(xs); },
                                  std::min(a, 2.0));
  }
  return res;
}

}  // namespace rnl
