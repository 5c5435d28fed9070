#pragma once

#include "rnl/renyi.hpp"

namespace rnl {

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Restricted state space {ρ ≥ 0 : 𝒩(ρ) = τ tr ρ}.
struct LinearConstraint {
  KrausChannel n_map;
  LabeledOperator tau;

  LinearConstraint() = default;
  LinearConstraint(KrausChannel n, LabeledOperator t) : n_map(std::move(n)), tau(std::move(t)) {
    if (!n_map.trace_preserving()) throw InvariantError("constraint map must be trace preserving");
    if (tau.dim() != n_map.out_dim()) throw DimensionError("target dimension does not match the constraint map output");
    if (!is_psd(tau.matrix(), 1e-9)) throw InvariantError("constraint target is not positive semidefinite");
    if (std::abs(tau.trace().real() - 1.0) > 1e-8) throw InvariantError("constraint target does not have unit trace");
  }

  /// Trivial constraint 𝒩 = tr, τ = 1.
  static LinearConstraint trivial(const Factors& q) {
    int d = total_dim(q);
    std::vector<Matrix> ks;
    for (int i = 0; i < d; ++i) {
      Matrix k = Matrix::Zero(1, d);
      k(0, i) = 1.0;
      ks.push_back(k);
    }
    return LinearConstraint(KrausChannel(ks, q, {{"1", 1}}, true), LabeledOperator(Matrix::Ones(1, 1), {{"1", 1}}));
  }
};

/// Orthonormal Hermitian basis of d×d matrices under the Hilbert–Schmidt inner product.
inline std::vector<Matrix> hermitian_basis(int d) {
  std::vector<Matrix> b;
  const double s = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < d; ++i) {
    Matrix m = Matrix::Zero(d, d);
    m(i, i) = 1.0;
    b.push_back(m);
  }
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      Matrix re = Matrix::Zero(d, d), im = Matrix::Zero(d, d);
      re(i, j) = re(j, i) = s;
      im(i, j) = Complex(0, -s);
      im(j, i) = Complex(0, s);
      b.push_back(re);
      b.push_back(im);
    }
  return b;
}

/// Affine constraints tr[E_k ρ] = b_k on the input state.
struct LinearFunctionals {
  std::vector<Matrix> e;
  std::vector<double> b;

  void add(const LinearConstraint& c) {
    for (const auto& basis : hermitian_basis(c.n_map.out_dim())) {
      e.push_back(herm(c.n_map.apply_adjoint(basis)));
      b.push_back((basis * c.tau.matrix()).trace().real());
    }
  }
  bool empty() const { return e.empty(); }
  RealVector residual(const Matrix& rho) const {
    RealVector r(e.size());
    for (std::size_t k = 0; k < e.size(); ++k) r(k) = (e[k] * rho).trace().real() - b[k];
    return r;
  }
};

/// Objective on normalized coefficient matrices Ψ (d_env × d_in) with d f = Re tr[G* dΨ].
using PureObjective = std::function<double(const Matrix& psi, Matrix* grad)>;

struct PureSolution {
  Matrix psi;
  double value = kInf;
  bool converged = false;
  double violation = 0.0;
  int iterations = 0;
};

namespace detail {

inline Matrix psi_of(const RealVector& v, int de, int dq) { return unpack_complex(v.data(), de, dq); }

inline RealVector vec_of(const Matrix& psi) {
  RealVector v(2 * psi.size());
  pack_complex(psi, v.data());
  return v;
}

/// Gauss–Newton projection of an unnormalized Ψ onto tr[E_k ΨᵀΨ̄] = b_k.
inline Matrix project_onto(const Matrix& psi0, const LinearFunctionals& lf, double* violation, int max_iter = 30) {
  Matrix psi = psi0;
  int de = static_cast<int>(psi.rows()), dq = static_cast<int>(psi.cols());
  int nv = 2 * de * dq;
  for (int it = 0; it < max_iter; ++it) {
    RealVector r = lf.residual(reduced_from_coefficients(psi));
    if (r.cwiseAbs().maxCoeff() < 1e-14) break;
    RealMatrix j(r.size(), nv);
    for (std::size_t k = 0; k < lf.e.size(); ++k) {
      Matrix g = 2.0 * psi * lf.e[k].transpose();
      RealVector row(nv);
      pack_complex(g, row.data());
      j.row(k) = row.transpose();
    }
    RealVector step = j.completeOrthogonalDecomposition().solve(r);
    RealVector v = vec_of(psi) - step;
    psi = psi_of(v, de, dq);
  }
  *violation = lf.empty() ? 0.0 : lf.residual(reduced_from_coefficients(psi)).cwiseAbs().maxCoeff();
  return psi;
}

}  // namespace detail

/// Minimizes a smooth function of a pure state on E⊗Q, optionally under affine constraints on ρ_Q,
/// by L-BFGS with an augmented Lagrangian followed by a Gauss–Newton projection.
inline PureSolution solve_pure(const PureObjective& obj, int de, int dq, const LinearFunctionals& lf,
                               const std::vector<Matrix>& starts, const OptimizerConfig& cfg) {
  PureSolution best;
  double best_feasible_viol = kInf;
  for (const auto& s0 : starts) {
    RealVector lambda = RealVector::Zero(lf.e.size());
    double mu = 10.0;
    auto make = [&](const RealVector& lam, double m) -> Objective {
      return [&, lam, m](const RealVector& v, RealVector* g) {
        Matrix raw = detail::psi_of(v, de, dq);
        double nrm = raw.norm();
        if (!(nrm > 1e-150)) return kInf;
        Matrix psi = raw / nrm;
        Matrix gpsi;
        double f = obj(psi, g ? &gpsi : nullptr);
        if (!std::isfinite(f)) return kInf;
        if (!lf.empty()) {
          Matrix rho = reduced_from_coefficients(psi);
          RealVector c = lf.residual(rho);
          f += lam.dot(c) + 0.5 * m * c.squaredNorm();
          if (g) {
            Matrix y = Matrix::Zero(dq, dq);
            for (std::size_t k = 0; k < lf.e.size(); ++k) y += (lam(k) + m * c(k)) * lf.e[k];
            gpsi += 2.0 * psi * y.transpose();
          }
        }
        if (g) {
          Complex ip = (psi.adjoint() * gpsi).trace();
          Matrix gv = (gpsi - ip.real() * psi) / nrm;
          g->resize(v.size());
          pack_complex(gv, g->data());
        }
        return f;
      };
    };
    RealVector v = detail::vec_of(s0 / s0.norm());
    if (!lf.empty()) {
      // Least-squares multipliers at the start, so a feasible stationary start stays put.
      Matrix psi = s0 / s0.norm();
      Matrix gf;
      obj(psi, &gf);
      auto tangent = [&](const Matrix& g) {
        RealVector out(v.size());
        pack_complex(Matrix(g - (psi.adjoint() * g).trace().real() * psi), out.data());
        return out;
      };
      RealMatrix jac(v.size(), lf.e.size());
      for (std::size_t k = 0; k < lf.e.size(); ++k) jac.col(k) = tangent(2.0 * psi * lf.e[k].transpose());
      if (gf.allFinite()) lambda = -jac.completeOrthogonalDecomposition().solve(tangent(gf));
    }
    MinimizeResult r;
    int iters = 0;
    if (lf.empty()) {
      r = minimize(make(lambda, 0.0), v, cfg);
      iters = r.iterations;
      v = r.x;
    } else {
      double prev = kInf;
      for (int stage = 0; stage < 14; ++stage) {
        r = minimize(make(lambda, mu), v, cfg);
        iters += r.iterations;
        v = r.x;
        Matrix psi = detail::psi_of(v, de, dq);
        psi /= psi.norm();
        RealVector c = lf.residual(reduced_from_coefficients(psi));
        double viol = c.cwiseAbs().maxCoeff();
        if (viol < 1e-10) break;
        lambda += mu * c;
        if (viol > 0.25 * prev) mu = std::min(mu * 10.0, 1e9);
        prev = viol;
      }
    }
    Matrix psi = detail::psi_of(v, de, dq);
    psi /= psi.norm();
    double viol = 0.0;
    if (!lf.empty()) psi = detail::project_onto(psi, lf, &viol);
    psi /= psi.norm();
    if (!lf.empty()) viol = lf.residual(reduced_from_coefficients(psi)).cwiseAbs().maxCoeff();
    double value = obj(psi, nullptr);
    bool feasible = viol < 1e-8;
    bool better;
    if (best.psi.size() == 0) {
      better = true;
    } else if (feasible != (best_feasible_viol < 1e-8)) {
      better = feasible;
    } else {
      better = value < best.value;
    }
    if (better) {
      best.psi = psi;
      best.value = value;
      best.converged = r.converged;
      best.violation = viol;
      best.iterations = iters;
      best_feasible_viol = viol;
    }
  }
  return best;
}

namespace detail {

/// ‖W W*‖_{(C:1,S:α)} for a tall factor W (rows c·d_S + s), minimized over F on C through the
/// Gram matrix of (F^t ⊗ 1)W, which is never larger than the number of columns of W.
class FactoredNorm {
 public:
  FactoredNorm(int dc, int ds, double alpha) : dc_(dc), ds_(ds), alpha_(alpha), t_(-0.5 * (1.0 - 1.0 / alpha)) {}

  int num_params() const { return 2 * dc_ * dc_; }

  RealVector mixed_start() const {
    RealVector x(num_params());
    pack_complex(Matrix::Identity(dc_, dc_), x.data());
    return x;
  }

  // Natural log of ‖(F^t⊗1) W W* (F^t⊗1)‖_α; gw receives the gradient wrt W.
  double evaluate(const Matrix& w, const RealVector& params, RealVector* grad, Matrix* gw) const {
    DensityParam dp = density_param(params.data(), dc_);
    if (!(dp.tau > 0) || !std::isfinite(dp.tau)) return kInf;
    Eigen::SelfAdjointEigenSolver<Matrix> es(herm(dp.f));
    const RealVector& lam = es.eigenvalues();
    if (!(lam.minCoeff() > 0)) return kInf;
    RealVector pw(dc_);
    for (int i = 0; i < dc_; ++i) pw(i) = std::pow(lam(i), t_);
    Matrix ft = from_spectrum(es.eigenvectors(), pw);
    int k = static_cast<int>(w.cols());
    Matrix wr = fold(w, k);
    Matrix y = unfold(ft * wr, k);
    bool small = k <= y.rows();
    Matrix gram = small ? Matrix(y.adjoint() * y) : Matrix(y * y.adjoint());
    LogNormGrad lg = log_schatten_with_grad(gram, alpha_, true);
    if (!std::isfinite(lg.log_norm)) return kInf;
    if (!grad && !gw) return lg.log_norm;
    Matrix gy = small ? Matrix(2.0 * y * lg.g) : Matrix(2.0 * lg.g * y);
    Matrix gyr = fold(gy, k);
    if (grad) {
      grad->resize(num_params());
      Matrix m = wr * gyr.adjoint();
      Matrix nf = power_pullback(es.eigenvectors(), lam, t_, m);
      density_pullback(dp, herm(nf), grad->data());
    }
    if (gw) *gw = unfold(ft * gyr, k);
    return lg.log_norm;
  }

  struct Solution {
    double log_norm = kInf;
    RealVector params;
    bool converged = false;
    Matrix gw;
  };

  Solution solve(const Matrix& w, const std::vector<RealVector>& starts, const OptimizerConfig& cfg, bool want_grad,
                 int extra_random = 0) const {
    std::vector<RealVector> all = starts;
    Rng rng(cfg.seed);
    for (int r = 0; r < extra_random; ++r) {
      RealVector x(num_params());
      pack_complex(ginibre_matrix(dc_, dc_, rng), x.data());
      all.push_back(x);
    }
    Objective f = [&](const RealVector& p, RealVector* g) { return evaluate(w, p, g, nullptr); };
    MinimizeResult best = minimize_multistart(f, all, cfg);
    Solution sol;
    sol.params = best.x;
    sol.converged = best.converged;
    sol.log_norm = want_grad ? evaluate(w, best.x, nullptr, &sol.gw) : best.value;
    return sol;
  }

 private:
  // (c·d_S + s, j) ↔ (c, s·k + j)
  Matrix fold(const Matrix& w, int k) const {
    Matrix r(dc_, ds_ * k);
    for (int c = 0; c < dc_; ++c)
      for (int s = 0; s < ds_; ++s) r.block(c, s * k, 1, k) = w.row(c * ds_ + s);
    return r;
  }
  Matrix unfold(const Matrix& r, int k) const {
    Matrix w(dc_ * ds_, k);
    for (int c = 0; c < dc_; ++c)
      for (int s = 0; s < ds_; ++s) w.row(c * ds_ + s) = r.block(c, s * k, 1, k);
    return w;
  }

  int dc_, ds_;
  double alpha_, t_;
};

}  // namespace detail

/// Entropy-form channel objective: log of ‖(id_E ⊗ Φ)(ψψ*)‖_{(E R:1, S:α)} as a function of Ψ.
class ChannelEntropyProblem {
 public:
  ChannelEntropyProblem(const KrausChannel& phi, const std::vector<std::string>& cond, double alpha, bool with_env,
                        OptimizerConfig inner = inner_defaults())
      : alpha_(alpha), inner_cfg_(inner) {
    if (!(alpha > 1.0)) throw Error("channel entropies need alpha > 1");
    std::vector<std::string> order = cond;
    for (const auto& l : cond)
      if (find_label(phi.out_factors(), l) < 0) throw LabelError("conditioning label '" + l + "' is not a channel output");
    for (const auto& f : phi.out_factors())
      if (std::find(cond.begin(), cond.end(), f.label) == cond.end()) order.push_back(f.label);
    phi_ = permute_outputs(phi, order);
    din_ = phi_.in_dim();
    dout_ = phi_.out_dim();
    de_ = with_env ? din_ : 1;
    dr_ = 1;
    for (const auto& l : cond) dr_ *= phi_.out_factors()[find_label(phi_.out_factors(), l)].dim;
    dcond_ = de_ * dr_;
    ds_ = dout_ / dr_;
    n_ = de_ * dout_;
    if (dcond_ > 1 && ds_ > 1) {
      nested_ = std::make_unique<detail::FactoredNorm>(dcond_, ds_, alpha_);
      warm_ = nested_->mixed_start();
    }
  }

  static OptimizerConfig inner_defaults() {
    OptimizerConfig c;
    c.restarts = 0;
    c.max_iters = 1000;
    c.rel_tol = 1e-15;
    c.grad_tol = 1e-12;
    return c;
  }

  int env_dim() const { return de_; }
  int in_dim() const { return din_; }
  double alpha() const { return alpha_; }
  const KrausChannel& channel() const { return phi_; }

  Matrix output(const Matrix& psi) const {
    Matrix w = stack(psi);
    return w * w.adjoint();
  }

  /// Natural log of the norm estimate at Ψ; grad receives d log‖·‖ / dΨ̄ in the Re tr[G* dΨ] convention.
  double log_norm(const Matrix& psi, Matrix* grad, bool fresh = false) {
    Matrix w = stack(psi);
    double val;
    Matrix gw;
    if (!nested_) {
      double p = (ds_ == 1) ? 1.0 : alpha_;
      int k = static_cast<int>(w.cols());
      bool small = k <= w.rows();
      Matrix gram = small ? Matrix(w.adjoint() * w) : Matrix(w * w.adjoint());
      LogNormGrad lg = log_schatten_with_grad(gram, p, true);
      val = lg.log_norm;
      if (grad) gw = small ? Matrix(2.0 * w * lg.g) : Matrix(2.0 * lg.g * w);
    } else {
      std::vector<RealVector> starts{warm_};
      if (fresh) starts.push_back(nested_->mixed_start());
      OptimizerConfig c = inner_cfg_;
      if (fresh) c.max_iters = std::max(c.max_iters, 5000);
      auto sol = nested_->solve(w, starts, c, grad != nullptr, fresh ? fresh_random_ : 0);
      warm_ = sol.params;
      val = sol.log_norm;
      gw = sol.gw;
      inner_converged_ = sol.converged;
    }
    if (grad) *grad = pull(gw);
    return val;
  }

  /// Natural log of the norm of (id ⊗ Φ)(|u⟩⟨v|) for coefficient matrices u, v, using the
  /// two-sided factorization. Gradients follow the same convention as log_norm.
  double log_norm_pair(const Matrix& u, const Matrix& v, Matrix* gu, Matrix* gv, bool fresh = false) {
    Matrix wu = stack(u), wv = stack(v);
    Matrix x = wu * wv.adjoint();
    double val;
    Matrix n;
    bool want = gu || gv;
    if (dcond_ > 1 && ds_ > 1) {
      if (!general_) {
        std::vector<detail::Group> groups{{{"C"}, dcond_, 1.0}, {{"S"}, ds_, alpha_}};
        general_ = std::make_unique<NestedNorm>(detail::nested_spec(groups, false));
        warm_general_ = general_->mixed_start();
      }
      std::vector<RealVector> starts{warm_general_};
      if (fresh) starts.push_back(general_->mixed_start());
      OptimizerConfig c = inner_cfg_;
      if (fresh) c.restarts = std::max(c.restarts, 2);
      auto sol = general_->solve(x, starts, c, want);
      warm_general_ = sol.params;
      val = sol.log_norm;
      n = sol.dlog_dx;
      inner_converged_ = sol.converged;
    } else {
      LogNormGrad lg = log_schatten_with_grad(x, ds_ == 1 ? 1.0 : alpha_, false);
      val = lg.log_norm;
      n = lg.g.adjoint();
    }
    if (gu) *gu = pull(n.adjoint() * wv);
    if (gv) *gv = pull(n * wu);
    return val;
  }

  double entropy_of_log_norm(double ln) const { return alpha_ / (1.0 - alpha_) * ln / std::log(2.0); }

  /// Careful evaluation of the entropy at Ψ with a fresh inner start.
  double entropy(const Matrix& psi) { return entropy_of_log_norm(log_norm(psi, nullptr, true)); }

  bool inner_converged() const { return inner_converged_; }

 private:
  // Columns are (1 ⊗ K_i)ψ.
  Matrix stack(const Matrix& psi) const {
    std::size_t k = phi_.kraus().size();
    Matrix w(n_, k);
    for (std::size_t i = 0; i < k; ++i) {
      Matrix m = psi * phi_.kraus()[i].transpose();
      for (int e = 0; e < de_; ++e)
        for (int o = 0; o < dout_; ++o) w(e * dout_ + o, i) = m(e, o);
    }
    return w;
  }

  Matrix pull(const Matrix& nw) const {
    Matrix g = Matrix::Zero(de_, din_);
    for (std::size_t i = 0; i < phi_.kraus().size(); ++i) {
      Matrix u(de_, dout_);
      for (int e = 0; e < de_; ++e)
        for (int o = 0; o < dout_; ++o) u(e, o) = nw(e * dout_ + o, i);
      g += u * phi_.kraus()[i].conjugate();
    }
    return g;
  }

  KrausChannel phi_;
  double alpha_;
  int din_ = 1, dout_ = 1, de_ = 1, dr_ = 1, dcond_ = 1, ds_ = 1, n_ = 1;
  OptimizerConfig inner_cfg_;
  std::unique_ptr<detail::FactoredNorm> nested_;
  std::unique_ptr<NestedNorm> general_;
  RealVector warm_, warm_general_;
  bool inner_converged_ = true;
  int fresh_random_ = 1;
};

struct ChannelNormResult {
  double log_value = 0.0;   // entropy form, bits
  LabeledOperator witness;  // ρ_Q
  Matrix witness_psi;       // coefficient matrix of the optimal pure state on Q̃Q (or Q)
  bool converged = true;
  double constraint_violation = 0.0;  // trace norm of 𝒩(ρ) − τ
  int iterations = 0;
};

namespace detail {

inline std::vector<Matrix> default_pure_starts(int de, int dq, const OptimizerConfig& cfg, std::uint64_t salt) {
  std::vector<Matrix> starts;
  Rng rng(mix_seed(cfg.seed, salt));
  if (de == dq) starts.push_back(Matrix::Identity(de, dq) + 0.01 * ginibre_matrix(de, dq, rng));
  Matrix product = Matrix::Zero(de, dq);
  product(0, 0) = 1.0;
  starts.push_back(product + 0.05 * ginibre_matrix(de, dq, rng));
  for (int r = 0; r < cfg.restarts; ++r) starts.push_back(ginibre_matrix(de, dq, rng));
  return starts;
}

inline ChannelNormResult channel_entropy(const KrausChannel& phi, const std::vector<std::string>& cond, double alpha,
                                         bool with_env, const LinearFunctionals& lf, const OptimizerConfig& cfg,
                                         std::vector<Matrix> starts, std::uint64_t salt) {
  ChannelEntropyProblem prob(phi, cond, alpha, with_env);
  int de = prob.env_dim(), dq = prob.in_dim();
  if (starts.empty()) starts = default_pure_starts(de, dq, cfg, salt);
  // Maximize the norm: minimize −log‖·‖.
  auto objective_of = [](ChannelEntropyProblem& p) -> PureObjective {
    return [&p](const Matrix& psi, Matrix* g) {
      double v = p.log_norm(psi, g);
      if (g) *g = -*g;
      return -v;
    };
  };
  OptimizerConfig oc = cfg;
  oc.rel_tol = std::max(cfg.rel_tol, 1e-13);
  oc.grad_tol = std::max(cfg.grad_tol, 1e-9);
  PureSolution sol = solve_pure(objective_of(prob), de, dq, lf, starts, oc);
  ChannelNormResult res;
  res.witness_psi = sol.psi;
  res.log_value = prob.entropy(sol.psi);
  res.converged = sol.converged && prob.inner_converged();
  res.iterations = sol.iterations;
  // Restart from the best point with a cold inner state until the value settles.
  for (int round = 0; round < cfg.polish; ++round) {
    ChannelEntropyProblem cold(phi, cond, alpha, with_env);
    PureSolution next = solve_pure(objective_of(cold), de, dq, lf, {res.witness_psi}, oc);
    res.iterations += next.iterations;
    if (!lf.empty() && lf.residual(reduced_from_coefficients(next.psi)).cwiseAbs().maxCoeff() > 1e-8) break;
    double v = cold.entropy(next.psi);
    if (!(v < res.log_value - 1e-12)) break;
    res.witness_psi = next.psi;
    res.log_value = v;
    res.converged = next.converged && cold.inner_converged();
  }
  // Warm-started inner solves can overestimate the norm; never return worse than a feasible start.
  for (const auto& s0 : starts) {
    Matrix psi = s0 / s0.norm();
    if (!lf.empty()) {
      double viol;
      psi = project_onto(psi, lf, &viol);
      psi /= psi.norm();
      if (lf.residual(reduced_from_coefficients(psi)).cwiseAbs().maxCoeff() > 1e-8) continue;
    }
    double v = prob.entropy(psi);
    if (v < res.log_value) {
      res.log_value = v;
      res.witness_psi = psi;
      res.converged = prob.inner_converged();
    }
  }
  Matrix rho = reduced_from_coefficients(res.witness_psi);
  res.witness = LabeledOperator(herm(rho), phi.in_factors());
  return res;
}

}  // namespace detail

/// inf over ρ_Q of H↑_α(S|R)_{Φ(ρ)}; pure inputs suffice since the norm is convex in ρ.
inline ChannelNormResult min_output_entropy(const KrausChannel& phi, const std::vector<std::string>& cond, double alpha,
                                            const OptimizerConfig& cfg = {}, std::vector<Matrix> starts = {}) {
  return detail::channel_entropy(phi, cond, alpha, false, {}, cfg, std::move(starts), 11);
}

/// inf over ρ_Q of H↑_α(S|R Q̃) at the canonical purification, Q̃ ≅ Q.
inline ChannelNormResult cb_norm_1_to_1p(const KrausChannel& phi, const std::vector<std::string>& cond, double alpha,
                                         const OptimizerConfig& cfg = {}, std::vector<Matrix> starts = {}) {
  return detail::channel_entropy(phi, cond, alpha, true, {}, cfg, std::move(starts), 12);
}

/// Restricted version with 𝒩(ρ_Q) = τ.
inline ChannelNormResult restricted_cb_norm(const KrausChannel& phi, const std::vector<std::string>& cond, double alpha,
                                            const LinearConstraint& r, const OptimizerConfig& cfg = {},
                                            std::vector<Matrix> starts = {}) {
  if (r.n_map.in_dim() != phi.in_dim()) throw DimensionError("constraint map input does not match the channel input");
  LinearFunctionals lf;
  lf.add(r);
  int d = phi.in_dim();
  double viol;
  detail::project_onto(Matrix::Identity(d, d) / std::sqrt(double(d)), lf, &viol);
  if (viol > 1e-8) {
    Rng rng(mix_seed(cfg.seed, 13));
    for (int t = 0; t < 5 && viol > 1e-8; ++t) detail::project_onto(ginibre_matrix(d, d, rng), lf, &viol);
    if (viol > 1e-8) throw InfeasibleError("linear constraint has no feasible state");
  }
  if (starts.empty()) {
    starts = detail::default_pure_starts(d, d, cfg, 14);
  }
  auto res = detail::channel_entropy(phi, cond, alpha, true, lf, cfg, std::move(starts), 14);
  Matrix diff = r.n_map.apply(res.witness.matrix()) - r.tau.matrix();
  res.constraint_violation = schatten_norm(diff, 1.0);
  return res;
}

/// Same quantity as cb_norm_1_to_1p but with the supremum taken over all trace-norm-one inputs
/// |u⟩⟨v| on Q̃Q instead of density operators. Starts include every given PSD witness.
inline ChannelNormResult cb_norm_general_inputs(const KrausChannel& phi, const std::vector<std::string>& cond,
                                                double alpha, const OptimizerConfig& cfg = {},
                                                const std::vector<Matrix>& psd_witnesses = {}) {
  ChannelEntropyProblem prob(phi, cond, alpha, true);
  int d = prob.in_dim();
  int half = 2 * d * d;
  // −log‖Φ(|u⟩⟨v|)‖ + log‖u‖ + log‖v‖, invariant under rescaling u and v.
  Objective f = [&](const RealVector& x, RealVector* g) {
    Matrix u = unpack_complex(x.data(), d, d), v = unpack_complex(x.data() + half, d, d);
    double nu = u.squaredNorm(), nv = v.squaredNorm();
    if (!(nu > 1e-200) || !(nv > 1e-200)) return kInf;
    Matrix gu, gv;
    double val = prob.log_norm_pair(u, v, g ? &gu : nullptr, g ? &gv : nullptr);
    if (!std::isfinite(val)) return kInf;
    if (g) {
      g->resize(x.size());
      pack_complex(Matrix(u / nu - gu), g->data());
      pack_complex(Matrix(v / nv - gv), g->data() + half);
    }
    return -val + 0.5 * std::log(nu) + 0.5 * std::log(nv);
  };
  std::vector<RealVector> starts;
  auto pair = [&](const Matrix& u, const Matrix& v) {
    RealVector x(2 * half);
    pack_complex(u, x.data());
    pack_complex(v, x.data() + half);
    starts.push_back(x);
  };
  for (const auto& w : psd_witnesses) pair(w, w);
  Rng rng(mix_seed(cfg.seed, 15));
  pair(Matrix::Identity(d, d), Matrix::Identity(d, d));
  for (int r = 0; r < cfg.restarts; ++r) pair(ginibre_matrix(d, d, rng), ginibre_matrix(d, d, rng));
  OptimizerConfig oc = cfg;
  oc.rel_tol = std::max(cfg.rel_tol, 1e-13);
  oc.grad_tol = std::max(cfg.grad_tol, 1e-9);
  ChannelNormResult res;
  double best = kInf;
  bool conv = false;
  int iters = 0;
  for (const auto& s0 : starts) {
    MinimizeResult r = minimize(f, s0, oc);
    iters += r.iterations;
    Matrix u = unpack_complex(r.x.data(), d, d), v = unpack_complex(r.x.data() + half, d, d);
    u /= u.norm();
    v /= v.norm();
    double val = -prob.log_norm_pair(u, v, nullptr, nullptr, true);
    if (val < best) {
      best = val;
      conv = r.converged && prob.inner_converged();
      res.witness_psi = u;
    }
  }
  res.log_value = prob.entropy_of_log_norm(-best);
  res.converged = conv;
  res.iterations = iters;
  Matrix rho = reduced_from_coefficients(res.witness_psi);
  res.witness = LabeledOperator(herm(rho), phi.in_factors());
  return res;
}

/// g(ρ) = ‖(id_Q̃ ⊗ Φ)(|√ρ⟩⟨√ρ|)‖_{(Q̃R:1,S:α)} for a PSD input (any trace).
inline double purified_output_norm(ChannelEntropyProblem& prob, const Matrix& rho) {
  double tr = rho.trace().real();
  if (tr <= 0) return 0.0;
  Matrix psi = psd_power(rho / tr, 0.5).transpose();
  return tr * std::exp(prob.log_norm(psi, nullptr, true));
}

struct DualCheck {
  bool feasible = true;
  double objective = 0.0;
  double worst_gap = -kInf;  // max over samples of g(ρ) − tr(Σ𝒩(ρ))
};

/// Randomized falsifier for dual feasibility of Σ: tests g(ρ) ≤ tr(Σ𝒩(ρ)) on sampled inputs.
/// Passing is evidence, not a proof.
inline DualCheck dual_certificate_check(const KrausChannel& phi, const std::vector<std::string>& cond, double alpha,
                                        const LinearConstraint& r, const Matrix& sigma, int samples, std::uint64_t seed,
                                        const std::vector<Matrix>& extra_inputs = {}) {
  if (!is_psd(sigma, 1e-9)) throw InvariantError("dual certificate must be positive semidefinite");
  if (sigma.rows() != r.n_map.out_dim()) throw DimensionError("dual certificate lives on the constraint output");
  ChannelEntropyProblem prob(phi, cond, alpha, true);
  DualCheck out;
  out.objective = (sigma * r.tau.matrix()).trace().real();
  Rng rng(seed);
  int d = phi.in_dim();
  std::vector<Matrix> inputs = extra_inputs;
  for (int s = 0; s < samples; ++s) inputs.push_back(ginibre_state_matrix(d, rng, 1 + s % d));
  for (const auto& rho : inputs) {
    double g = purified_output_norm(prob, rho);
    double rhs = (sigma * r.n_map.apply(rho)).trace().real();
    double gap = g - rhs;
    out.worst_gap = std::max(out.worst_gap, gap);
    if (gap > 1e-6) out.feasible = false;
  }
  return out;
}

}  // namespace rnl
