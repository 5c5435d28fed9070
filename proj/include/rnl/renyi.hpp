#pragma once

#include "rnl/schatten.hpp"

#include <map>
#include <unordered_map>

namespace rnl {

/// Sandwiched Rényi divergence in bits; +inf when supp ρ ⊄ supp σ.
inline double sandwiched_divergence(const Matrix& rho, const Matrix& sigma, double alpha) {
  if (!(alpha > 1.0)) throw Error("sandwiched divergence needs alpha > 1");
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols()) throw DimensionError("divergence arguments differ in size");
  Matrix s = herm(sigma);
  Spectrum sp = eigh(s);
  double top = std::max(0.0, sp.values.maxCoeff());
  if (sp.values.minCoeff() < -1e-9 * std::max(1.0, top)) throw InvariantError("second argument is not positive semidefinite");
  RealVector pw(sp.values.size()), ker(sp.values.size());
  double t = (1.0 - alpha) / (2.0 * alpha);
  for (int i = 0; i < pw.size(); ++i) {
    bool zero = sp.values(i) <= kKernelCutoff * top || sp.values(i) <= 0;
    pw(i) = zero ? 0.0 : std::pow(sp.values(i), t);
    ker(i) = zero ? 1.0 : 0.0;
  }
  Matrix kernel = from_spectrum(sp.vectors, ker);
  double leak = (kernel * rho * kernel).trace().real();
  if (leak > 1e-12 * std::max(1.0, rho.trace().real())) return kInf;
  Matrix st = from_spectrum(sp.vectors, pw);
  Matrix z = herm(st * rho * st);
  double n = schatten_norm(z, alpha);
  return alpha / (alpha - 1.0) * std::log2(n);
}

inline double sandwiched_divergence(const DensityOperator& rho, const LabeledOperator& sigma, double alpha) {
  return sandwiched_divergence(rho.matrix(), sigma.matrix(), alpha);
}

/// Entropy form (α/(1−α))·log₂ of a (1,α) norm value given in log₂.
inline double entropy_from_log2_norm(double log2_norm, double alpha) { return alpha / (1.0 - alpha) * log2_norm; }

/// Orders the factors as (conditioning..., rest...).
inline LabeledOperator conditioning_first(const LabeledOperator& rho, const std::vector<std::string>& cond) {
  std::vector<std::string> order = cond;
  for (const auto& f : rho.factors())
    if (std::find(cond.begin(), cond.end(), f.label) == cond.end()) order.push_back(f.label);
  return permute(rho, order);
}

struct EntropyResult {
  double value = 0.0;
  bool converged = true;
  NormResult norm;
};

/// H↑_α(rest | cond) through the (cond:1, rest:α) norm.
inline EntropyResult cond_entropy_norm(const LabeledOperator& rho, const std::vector<std::string>& cond, double alpha,
                                       const OptimizerConfig& cfg = {}) {
  if (!(alpha > 1.0)) throw Error("conditional Renyi entropy needs alpha > 1");
  LabeledOperator x = conditioning_first(rho, cond);
  std::vector<std::string> rest;
  for (std::size_t i = cond.size(); i < x.factors().size(); ++i) rest.push_back(x.factors()[i].label);
  EntropyResult r;
  if (rest.empty()) {
    r.value = 0.0;
    return r;
  }
  r.norm = norm_two_index(x, cond, rest, 1.0, alpha, cfg);
  r.value = entropy_from_log2_norm(r.norm.log2_value, alpha);
  r.converged = r.norm.converged;
  return r;
}

struct CondRenyiResult {
  double value = 0.0;         // σ-minimization path
  Matrix sigma;               // witness on the conditioning system
  bool converged = true;
  double norm_path_value = 0.0;
  double path_gap = 0.0;      // |value − norm_path_value|
};

/// Optimized conditional Rényi entropy H↑_α(A|B) by direct minimization of D_α(ρ‖𝟙_A⊗σ_B) over σ_B.
/// σ = exp(H)/tr exp(H), central finite-difference gradients.
inline CondRenyiResult cond_renyi_up(const LabeledOperator& rho, const std::vector<std::string>& cond, double alpha,
                                     const OptimizerConfig& cfg = {}) {
  if (!(alpha > 1.0)) throw Error("conditional Renyi entropy needs alpha > 1");
  LabeledOperator x = conditioning_first(rho, cond);
  int db = 1;
  for (const auto& l : cond) db *= x.dim_of(l);
  int da = x.dim() / db;
  const Matrix& m = x.matrix();
  auto sigma_of = [db](const RealVector& v) {
    Matrix h(db, db);
    int k = 0;
    for (int i = 0; i < db; ++i) {
      h(i, i) = v(k++);
      for (int j = i + 1; j < db; ++j) {
        h(i, j) = Complex(v(k), v(k + 1));
        h(j, i) = std::conj(h(i, j));
        k += 2;
      }
    }
    Spectrum s = eigh(h);
    double top = s.values.maxCoeff();
    RealVector e = (s.values.array() - top).exp();
    Matrix sig = from_spectrum(s.vectors, e);
    return Matrix(sig / sig.trace().real());
  };
  auto div = [&](const RealVector& v) {
    Matrix big = kron_identity(sigma_of(v), da);
    return sandwiched_divergence(m, big, alpha);
  };
  Objective f = [&](const RealVector& v, RealVector* g) {
    double f0 = div(v);
    if (g) {
      const double h = 1e-6;
      g->resize(v.size());
      for (int i = 0; i < v.size(); ++i) {
        RealVector a = v, b = v;
        a(i) += h;
        b(i) -= h;
        (*g)(i) = (div(a) - div(b)) / (2 * h);
      }
    }
    return f0;
  };
  std::vector<RealVector> starts;
  RealVector zero = RealVector::Zero(db * db);
  starts.push_back(zero);
  // Start from the marginal, which is optimal in the classical and product cases.
  Matrix marg = trace_suffix(m, db);
  Spectrum ms = eigh(herm(marg));
  RealVector lg(db);
  for (int i = 0; i < db; ++i) lg(i) = std::log(std::max(ms.values(i), 1e-12));
  Matrix hl = from_spectrum(ms.vectors, lg);
  RealVector v0(db * db);
  int k = 0;
  for (int i = 0; i < db; ++i) {
    v0(k++) = hl(i, i).real();
    for (int j = i + 1; j < db; ++j) {
      v0(k++) = hl(i, j).real();
      v0(k++) = hl(i, j).imag();
    }
  }
  starts.push_back(v0);
  Rng rng(mix_seed(cfg.seed, 101));
  for (int r = 0; r < cfg.restarts; ++r) {
    RealVector v(db * db);
    for (int i = 0; i < v.size(); ++i) v(i) = standard_normal(rng);
    starts.push_back(v);
  }
  OptimizerConfig c = cfg;
  c.grad_tol = 1e-9;
  MinimizeResult best = minimize_multistart(f, starts, c);
  CondRenyiResult out;
  out.value = -best.value;
  out.sigma = sigma_of(best.x);
  out.converged = best.converged;
  OptimizerConfig nc = cfg;
  nc.restarts = std::min(cfg.restarts, 1);
  out.norm_path_value = cond_entropy_norm(x, cond, alpha, nc).value;
  out.path_gap = std::abs(out.value - out.norm_path_value);
  return out;
}

inline CondRenyiResult cond_renyi_up(const DensityOperator& rho, double alpha, const OptimizerConfig& cfg = {}) {
  return cond_renyi_up(rho.op(), {rho.factors().front().label}, alpha, cfg);
}

/// H(rest | cond) = H(all) − H(cond), in bits.
inline double von_neumann_conditional(const LabeledOperator& rho, const std::vector<std::string>& cond) {
  std::vector<std::string> rest;
  for (const auto& f : rho.factors())
    if (std::find(cond.begin(), cond.end(), f.label) == cond.end()) rest.push_back(f.label);
  for (const auto& l : cond)
    if (rho.index_of(l) < 0) throw LabelError("unknown label '" + l + "'");
  double hall = von_neumann_entropy(rho.matrix());
  double hcond = cond.empty() ? 0.0 : von_neumann_entropy(partial_trace(rho, rest).matrix());
  return hall - hcond;
}

struct CqOutcome {
  std::string x;
  double weight = 0.0;
  LabeledOperator block;  // normalized state on E A
};

/// Σ_x weight(x) |x⟩⟨x| ⊗ block_x with blocks on (E, A).
class ClassicalQuantumState {
 public:
  ClassicalQuantumState() = default;
  ClassicalQuantumState(std::string e_label, std::string a_label, std::vector<CqOutcome> outcomes, double tol = 1e-8)
      : e_(std::move(e_label)), a_(std::move(a_label)), outcomes_(std::move(outcomes)) {
    if (outcomes_.empty()) throw InvariantError("classical-quantum state needs at least one outcome");
    double total = 0.0;
    for (auto& o : outcomes_) {
      if (o.weight < -tol) throw InvariantError("negative weight for outcome '" + o.x + "'");
      if (o.block.index_of(a_) < 0) throw LabelError("block lacks label '" + a_ + "'");
      std::vector<std::string> order;
      if (!e_.empty()) {
        if (o.block.index_of(e_) < 0) throw LabelError("block lacks label '" + e_ + "'");
        order.push_back(e_);
      }
      order.push_back(a_);
      if (order.size() != o.block.factors().size()) throw LabelError("block must live on E and A only");
      o.block = permute(o.block, order);
      if (!is_psd(o.block.matrix(), tol)) throw InvariantError("block for outcome '" + o.x + "' is not PSD");
      if (std::abs(o.block.trace().real() - 1.0) > tol) throw InvariantError("block for outcome '" + o.x + "' is not normalized");
      total += o.weight;
    }
    if (std::abs(total - 1.0) > tol) throw InvariantError("weights sum to " + std::to_string(total) + ", not 1");
    for (std::size_t i = 0; i < outcomes_.size(); ++i)
      for (std::size_t j = i + 1; j < outcomes_.size(); ++j)
        if (outcomes_[i].x == outcomes_[j].x) throw LabelError("duplicate outcome '" + outcomes_[i].x + "'");
  }
  const std::string& e_label() const { return e_; }
  const std::string& a_label() const { return a_; }
  const std::vector<CqOutcome>& outcomes() const { return outcomes_; }
  int dim_a() const { return outcomes_.front().block.dim_of(a_); }
  int dim_e() const { return e_.empty() ? 1 : outcomes_.front().block.dim_of(e_); }

  /// The full state on X E A.
  LabeledOperator assemble(const std::string& x_label = "X") const {
    int n = static_cast<int>(outcomes_.size());
    int d = outcomes_.front().block.dim();
    Matrix m = Matrix::Zero(n * d, n * d);
    for (int i = 0; i < n; ++i) m.block(i * d, i * d, d, d) = outcomes_[i].weight * outcomes_[i].block.matrix();
    Factors fs{{x_label, n}};
    for (const auto& f : outcomes_.front().block.factors()) fs.push_back(f);
    return LabeledOperator(std::move(m), fs);
  }

 private:
  std::string e_, a_;
  std::vector<CqOutcome> outcomes_;
};

class WeightFunction {
 public:
  WeightFunction() = default;
  explicit WeightFunction(std::map<std::string, double> table) : table_(std::move(table)) {
    for (const auto& [k, v] : table_)
      if (!std::isfinite(v)) throw InvariantError("weight for '" + k + "' is not finite");
  }
  double operator()(const std::string& x) const {
    auto it = table_.find(x);
    if (it == table_.end()) throw LabelError("weight function has no value for outcome '" + x + "'");
    return it->second;
  }
  const std::map<std::string, double>& table() const { return table_; }
  double max() const {
    double m = -kInf;
    for (const auto& [k, v] : table_) m = std::max(m, v);
    return m;
  }
  double min() const {
    double m = kInf;
    for (const auto& [k, v] : table_) m = std::min(m, v);
    return m;
  }

 private:
  std::map<std::string, double> table_;
};

struct FWeightedResult {
  double value = 0.0;
  bool converged = true;
};

/// (α/(1−α)) log Σ_x 2^{((α−1)/α) f(x)} ‖ρ^x_{EA}‖_{(E:1,A:α)}.
inline FWeightedResult f_weighted_entropy(const ClassicalQuantumState& state, const WeightFunction& f, double alpha,
                                          const OptimizerConfig& cfg = {}) {
  if (!(alpha > 1.0)) throw Error("f-weighted entropy needs alpha > 1");
  std::vector<double> terms;
  FWeightedResult out;
  for (const auto& o : state.outcomes()) {
    double fx = f(o.x);
    if (o.weight <= 0) continue;
    double log2_norm;
    if (state.e_label().empty()) {
      log2_norm = std::log2(schatten_norm(o.block.matrix(), alpha));
    } else {
      auto r = norm_two_index(o.block, {state.e_label()}, {state.a_label()}, 1.0, alpha, cfg);
      log2_norm = r.log2_value;
      out.converged = out.converged && r.converged;
    }
    terms.push_back((alpha - 1.0) / alpha * fx + std::log2(o.weight) + log2_norm);
  }
  double top = *std::max_element(terms.begin(), terms.end());
  double acc = 0;
  for (double t : terms) acc += std::exp2(t - top);
  out.value = alpha / (1.0 - alpha) * (top + std::log2(acc));
  return out;
}

/// η₀ = |A| (2^{max f} + 2^{−min f}) + 1.
inline double eta_zero(const WeightFunction& f, int dim_a) {
  if (f.table().empty()) throw Error("weight function is empty");
  return dim_a * (std::exp2(f.max()) + std::exp2(-f.min())) + 1.0;
}

struct ContinuityBound {
  double lower = 0.0;
  double upper = 0.0;
  double eta0 = 0.0;
  bool alpha_ok = false;
};

inline ContinuityBound continuity_bound(const ClassicalQuantumState& state, const WeightFunction& f, double alpha) {
  if (!(alpha > 1.0)) throw Error("continuity bound needs alpha > 1");
  double h = 0.0, ef = 0.0;
  for (const auto& o : state.outcomes()) {
    double hx = state.e_label().empty() ? von_neumann_entropy(o.block.matrix())
                                        : von_neumann_conditional(o.block, {state.e_label()});
    h += o.weight * hx;
    ef += o.weight * f(o.x);
  }
  ContinuityBound b;
  b.eta0 = eta_zero(f, state.dim_a());
  double le = std::log2(b.eta0);
  b.upper = h - ef;
  b.lower = b.upper - (alpha - 1.0) * le * le;
  b.alpha_ok = alpha < 1.0 + 1.0 / le;
  return b;
}

}  // namespace rnl
