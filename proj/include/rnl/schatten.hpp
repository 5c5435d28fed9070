#pragma once

#include "rnl/optimize.hpp"

#include <sstream>

namespace rnl {

class UnsupportedProfileError : public Error {
 public:
  using Error::Error;
};

inline double schatten_norm(const Matrix& x, double p) {
  if (!(p >= 1.0)) throw Error("Schatten index must be at least 1");
  if (x.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(x);
  const RealVector& s = svd.singularValues();
  double top = s.maxCoeff();
  if (std::isinf(p) || top == 0.0) return top;
  double acc = 0.0;
  for (int i = 0; i < s.size(); ++i) acc += std::pow(s(i) / top, p);
  return top * std::pow(acc, 1.0 / p);
}

inline double schatten_norm(const LabeledOperator& x, double p) { return schatten_norm(x.matrix(), p); }

struct IndexEntry {
  std::string label;
  double p = 1.0;
};

/// Ordered assignment of Schatten exponents to subsystems.
class IndexProfile {
 public:
  IndexProfile() = default;
  IndexProfile(std::vector<IndexEntry> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!(entries_[i].p >= 1.0)) throw Error("index for '" + entries_[i].label + "' must be at least 1");
      for (std::size_t j = i + 1; j < entries_.size(); ++j)
        if (entries_[i].label == entries_[j].label) throw LabelError("duplicate label '" + entries_[i].label + "' in profile");
    }
  }

  /// Parses "A:1,B:2,C:inf".
  static IndexProfile parse(const std::string& text) {
    std::vector<IndexEntry> es;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto colon = item.rfind(':');
      if (colon == std::string::npos || colon == 0) throw Error("profile entry '" + item + "' is not label:index");
      std::string label = item.substr(0, colon), val = item.substr(colon + 1);
      auto trim = [](std::string s) {
        s.erase(0, s.find_first_not_of(" \t"));
        s.erase(s.find_last_not_of(" \t") + 1);
        return s;
      };
      label = trim(label);
      val = trim(val);
      double p;
      if (val == "inf" || val == "Inf" || val == "infinity") {
        p = kInf;
      } else {
        std::size_t used = 0;
        try {
          p = std::stod(val, &used);
        } catch (const std::exception&) {
          throw Error("profile index '" + val + "' is not a number");
        }
        if (used != val.size()) throw Error("profile index '" + val + "' is not a number");
      }
      es.push_back({label, p});
    }
    if (es.empty()) throw Error("empty profile");
    return IndexProfile(std::move(es));
  }

  const std::vector<IndexEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.label);
    return out;
  }
  bool non_decreasing() const {
    for (std::size_t i = 1; i < entries_.size(); ++i)
      if (entries_[i].p < entries_[i - 1].p) return false;
    return true;
  }
  bool non_increasing() const {
    for (std::size_t i = 1; i < entries_.size(); ++i)
      if (entries_[i].p > entries_[i - 1].p) return false;
    return true;
  }

 private:
  std::vector<IndexEntry> entries_;
};

/// Nested ℓ_(p₁,…,p_k) norm of a row-major array; the first index is outermost.
inline double vector_nested_norm(const std::vector<Complex>& v, const std::vector<int>& shape,
                                 const std::vector<double>& ps) {
  if (shape.size() != ps.size()) throw DimensionError("shape and profile lengths differ");
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 1) throw DimensionError("array dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  if (n != v.size()) throw DimensionError("array size does not match its shape");
  for (double p : ps)
    if (!(p >= 1.0)) throw Error("nested norm index must be at least 1");
  std::vector<double> cur(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) cur[i] = std::abs(v[i]);
  for (int k = static_cast<int>(shape.size()) - 1; k >= 0; --k) {
    int d = shape[k];
    double p = ps[k];
    std::vector<double> next(cur.size() / d);
    for (std::size_t b = 0; b < next.size(); ++b) {
      double top = 0;
      for (int i = 0; i < d; ++i) top = std::max(top, cur[b * d + i]);
      if (std::isinf(p) || top == 0.0) {
        next[b] = top;
        continue;
      }
      double acc = 0;
      for (int i = 0; i < d; ++i) acc += std::pow(cur[b * d + i] / top, p);
      next[b] = top * std::pow(acc, 1.0 / p);
    }
    cur = std::move(next);
  }
  return cur[0];
}

inline double vector_nested_norm(const std::vector<Complex>& v, const std::vector<int>& shape, const IndexProfile& profile) {
  std::vector<double> ps;
  for (const auto& e : profile.entries()) ps.push_back(e.p);
  return vector_nested_norm(v, shape, ps);
}

enum class BoundKind { exact, upper, lower };

inline const char* to_string(BoundKind b) {
  switch (b) {
    case BoundKind::exact: return "exact";
    case BoundKind::upper: return "upper";
    case BoundKind::lower: return "lower";
  }
  return "?";
}

struct NormResult {
  double value = 0.0;
  double log2_value = -kInf;
  std::vector<Matrix> witness_f;  // one per level
  std::vector<Matrix> witness_g;  // equal to witness_f for symmetric solves
  int iterations = 0;
  bool converged = true;
  BoundKind bound = BoundKind::exact;
};

/// Value and gradient data of log‖Z‖_p.
struct LogNormGrad {
  double log_norm = -kInf;  // natural log
  Matrix g;                 // d log‖Z‖ = Re tr[g* dZ]
};

inline LogNormGrad log_schatten_with_grad(const Matrix& z, double p, bool hermitian) {
  LogNormGrad out;
  int n = static_cast<int>(z.rows());
  if (hermitian) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(herm(z));
    const RealVector& mu = es.eigenvalues();
    RealVector s = mu.cwiseAbs();
    double top = s.maxCoeff();
    if (!(top > 0)) return out;
    RealVector w(n);
    if (std::isinf(p)) {
      int k;
      s.maxCoeff(&k);
      w.setZero();
      w(k) = (mu(k) >= 0 ? 1.0 : -1.0) / top;
      out.log_norm = std::log(top);
    } else {
      double acc = 0;
      for (int i = 0; i < n; ++i) acc += std::pow(s(i) / top, p);
      out.log_norm = std::log(top) + std::log(acc) / p;
      for (int i = 0; i < n; ++i) {
        double r = s(i) / top;
        w(i) = (mu(i) >= 0 ? 1.0 : -1.0) * std::pow(r, p - 1.0) / (top * acc);
      }
    }
    out.g = from_spectrum(es.eigenvectors(), w);
    return out;
  }
  Eigen::JacobiSVD<Matrix> svd(z, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const RealVector& s = svd.singularValues();
  double top = s.size() ? s(0) : 0.0;
  if (!(top > 0)) return out;
  RealVector w = RealVector::Zero(s.size());
  if (std::isinf(p)) {
    w(0) = 1.0 / top;
    out.log_norm = std::log(top);
  } else {
    double acc = 0;
    for (int i = 0; i < s.size(); ++i) acc += std::pow(s(i) / top, p);
    out.log_norm = std::log(top) + std::log(acc) / p;
    for (int i = 0; i < s.size(); ++i) w(i) = std::pow(s(i) / top, p - 1.0) / (top * acc);
  }
  out.g = svd.matrixU().leftCols(s.size()) * w.cast<Complex>().asDiagonal() * svd.matrixV().leftCols(s.size()).adjoint();
  return out;
}

/// Level structure of a monotone multi-index variational formula.
struct NestedSpec {
  int n = 1;
  std::vector<int> prefix_dims;
  std::vector<double> exponents;  // power applied to F_j (negative in inf mode)
  double p_final = 1.0;
  bool sup_mode = false;
  bool symmetric = true;
};

/// Evaluates and optimizes ‖A_m⋯A₁ X B₁⋯B_m‖_p over unit-trace PSD F_j, G_j.
class NestedNorm {
 public:
  explicit NestedNorm(NestedSpec spec) : s_(std::move(spec)) {
    offsets_.push_back(0);
    for (int d : s_.prefix_dims) offsets_.push_back(offsets_.back() + 2 * d * d);
    level_params_ = offsets_.back();
  }

  const NestedSpec& spec() const { return s_; }
  int levels() const { return static_cast<int>(s_.prefix_dims.size()); }
  int num_params() const { return s_.symmetric ? level_params_ : 2 * level_params_; }

  RealVector mixed_start() const {
    RealVector x = RealVector::Zero(num_params());
    for (int half = 0; half < (s_.symmetric ? 1 : 2); ++half)
      for (int j = 0; j < levels(); ++j) {
        int d = s_.prefix_dims[j];
        pack_complex(Matrix::Identity(d, d), x.data() + half * level_params_ + offsets_[j]);
      }
    return x;
  }

  RealVector random_start(Rng& rng) const {
    RealVector x(num_params());
    for (int half = 0; half < (s_.symmetric ? 1 : 2); ++half)
      for (int j = 0; j < levels(); ++j) {
        int d = s_.prefix_dims[j];
        pack_complex(ginibre_matrix(d, d, rng), x.data() + half * level_params_ + offsets_[j]);
      }
    return x;
  }

  /// Objective in minimization form: log‖Z‖ (inf mode) or −log‖Z‖ (sup mode), natural log.
  /// When dx is given it receives N with d(objective) = Re tr[N dX].
  double evaluate(const Matrix& x, const RealVector& params, RealVector* grad, Matrix* dx = nullptr) const {
    int m = levels();
    int n = s_.n;
    struct Level {
      DensityParam dp;
      Matrix u;
      RealVector lam;
      Matrix op;
    };
    auto build = [&](const double* p, int j, Level& lv) -> bool {
      int d = s_.prefix_dims[j];
      lv.dp = density_param(p, d);
      if (!(lv.dp.tau > 0) || !std::isfinite(lv.dp.tau)) return false;
      Eigen::SelfAdjointEigenSolver<Matrix> es(herm(lv.dp.f));
      lv.u = es.eigenvectors();
      lv.lam = es.eigenvalues();
      if (!(lv.lam.minCoeff() > 0)) return false;
      RealVector pw(d);
      for (int i = 0; i < d; ++i) pw(i) = std::pow(lv.lam(i), s_.exponents[j]);
      lv.op = kron_identity(from_spectrum(lv.u, pw), n / d);
      return true;
    };
    std::vector<Level> a(m), b(m);
    for (int j = 0; j < m; ++j) {
      if (!build(params.data() + offsets_[j], j, a[j])) return kInf;
      if (!s_.symmetric) {
        if (!build(params.data() + level_params_ + offsets_[j], j, b[j])) return kInf;
      }
    }
    auto bop = [&](int j) -> const Matrix& { return s_.symmetric ? a[j].op : b[j].op; };
    std::vector<Matrix> apre(m + 1), bpre(m + 1);
    apre[0] = Matrix::Identity(n, n);
    bpre[0] = Matrix::Identity(n, n);
    for (int j = 0; j < m; ++j) {
      apre[j + 1] = a[j].op * apre[j];
      bpre[j + 1] = bpre[j] * bop(j);
    }
    Matrix xb = x * bpre[m];
    Matrix z = apre[m] * xb;
    bool herm_z = s_.symmetric;
    LogNormGrad lg = log_schatten_with_grad(z, s_.p_final, herm_z);
    if (!std::isfinite(lg.log_norm)) return kInf;
    double sign = s_.sup_mode ? -1.0 : 1.0;
    double value = sign * lg.log_norm;
    if (!grad && !dx) return value;
    Matrix gs = lg.g.adjoint();
    if (grad) {
      grad->setZero(num_params());
      std::vector<Matrix> aup(m + 1), bup(m + 1);
      aup[m] = Matrix::Identity(n, n);
      bup[m] = Matrix::Identity(n, n);
      for (int j = m - 1; j >= 0; --j) {
        aup[j] = aup[j + 1] * a[j].op;
        bup[j] = bop(j) * bup[j + 1];
      }
      for (int j = 0; j < m; ++j) {
        int d = s_.prefix_dims[j];
        // Left factor: Z = aup[j+1] A_j (apre[j] X Bprod).
        Matrix ma = (apre[j] * xb) * gs * aup[j + 1];
        // Right factor: Z = (Aprod X bpre[j]) B_j bup[j+1].
        Matrix mb = bup[j + 1] * gs * (apre[m] * x * bpre[j]);
        if (s_.symmetric) {
          Matrix mred = trace_suffix(ma + mb, d);
          Matrix nf = power_pullback(a[j].u, a[j].lam, s_.exponents[j], mred);
          density_pullback(a[j].dp, sign * herm(nf), grad->data() + offsets_[j]);
        } else {
          Matrix na = power_pullback(a[j].u, a[j].lam, s_.exponents[j], trace_suffix(ma, d));
          density_pullback(a[j].dp, sign * herm(na), grad->data() + offsets_[j]);
          Matrix nb = power_pullback(b[j].u, b[j].lam, s_.exponents[j], trace_suffix(mb, d));
          density_pullback(b[j].dp, sign * herm(nb), grad->data() + level_params_ + offsets_[j]);
        }
      }
    }
    if (dx) *dx = sign * (bpre[m] * gs * apre[m]);
    return value;
  }

  struct Solution {
    double log_norm = -kInf;  // natural log of the norm estimate
    RealVector params;
    int iterations = 0;
    bool converged = false;
    Matrix dlog_dx;           // d log‖·‖ = Re tr[N dX] at the solution
  };

  Solution solve(const Matrix& x, std::vector<RealVector> starts, const OptimizerConfig& cfg, bool want_dx = false) {
    if (starts.empty()) starts.push_back(mixed_start());
    Rng rng(cfg.seed);
    for (int r = 0; r < cfg.restarts; ++r) starts.push_back(random_start(rng));
    Objective f = [&](const RealVector& p, RealVector* g) { return evaluate(x, p, g); };
    MinimizeResult best = minimize_multistart(f, starts, cfg);
    Solution sol;
    sol.params = best.x;
    sol.iterations = best.iterations;
    sol.converged = best.converged;
    double sign = s_.sup_mode ? -1.0 : 1.0;
    if (want_dx) {
      Matrix n;
      double v = evaluate(x, best.x, nullptr, &n);
      sol.log_norm = sign * v;
      sol.dlog_dx = sign * n;
    } else {
      sol.log_norm = sign * best.value;
    }
    return sol;
  }

  Matrix level_operator(const RealVector& params, int j, bool right) const {
    int d = s_.prefix_dims[j];
    int off = offsets_[j] + ((right && !s_.symmetric) ? level_params_ : 0);
    return density_param(params.data() + off, d).f;
  }

 private:
  NestedSpec s_;
  std::vector<int> offsets_;
  int level_params_ = 0;
};

inline bool is_psd(const Matrix& x, double tol = 1e-10) {
  if (x.rows() != x.cols()) return false;
  double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
  if (hermiticity_defect(x) > tol * scale) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm(x), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol * scale;
}

namespace detail {

struct Group {
  std::vector<std::string> labels;
  int dim = 1;
  double p = 1.0;
};

inline std::vector<Group> merge_groups(const IndexProfile& profile, const Factors& fs) {
  std::vector<Group> groups;
  for (const auto& e : profile.entries()) {
    int d = fs[find_label(fs, e.label)].dim;
    if (!groups.empty() && groups.back().p == e.p) {
      groups.back().labels.push_back(e.label);
      groups.back().dim *= d;
    } else {
      groups.push_back({{e.label}, d, e.p});
    }
  }
  return groups;
}

inline double inv(double p) { return std::isinf(p) ? 0.0 : 1.0 / p; }

/// Builds the level spec from monotone merged groups.
inline NestedSpec nested_spec(const std::vector<Group>& groups, bool symmetric) {
  NestedSpec s;
  s.n = 1;
  for (const auto& g : groups) s.n *= g.dim;
  s.sup_mode = groups.front().p > groups.back().p;
  s.symmetric = symmetric;
  int prefix = 1;
  for (std::size_t j = 0; j + 1 < groups.size(); ++j) {
    prefix *= groups[j].dim;
    double inv_r = std::abs(inv(groups[j].p) - inv(groups[j + 1].p));
    s.prefix_dims.push_back(prefix);
    s.exponents.push_back((s.sup_mode ? 0.5 : -0.5) * inv_r);
  }
  s.p_final = groups.back().p;
  return s;
}

inline NormResult solve_groups(const Matrix& x, const std::vector<Group>& groups, const OptimizerConfig& cfg,
                               const std::vector<RealVector>& starts = {}) {
  NormResult res;
  if (groups.size() == 1) {
    res.value = schatten_norm(x, groups[0].p);
    res.log2_value = std::log2(res.value);
    res.bound = BoundKind::exact;
    return res;
  }
  bool symmetric = is_psd(x);
  NestedNorm nn(nested_spec(groups, symmetric));
  auto sol = nn.solve(x, starts, cfg);
  res.log2_value = sol.log_norm / std::log(2.0);
  res.value = std::exp(sol.log_norm);
  res.iterations = sol.iterations;
  res.converged = sol.converged;
  res.bound = nn.spec().sup_mode ? BoundKind::lower : BoundKind::upper;
  for (int j = 0; j < nn.levels(); ++j) {
    res.witness_f.push_back(nn.level_operator(sol.params, j, false));
    res.witness_g.push_back(nn.level_operator(sol.params, j, true));
  }
  return res;
}

}  // namespace detail

/// Two-index norm with `first` a prefix of x's factor order and `second` the remainder.
inline NormResult norm_two_index(const LabeledOperator& x, const std::vector<std::string>& first,
                                 const std::vector<std::string>& second, double q, double p,
                                 const OptimizerConfig& cfg = {}) {
  const Factors& fs = x.factors();
  if (first.size() + second.size() != fs.size()) throw LabelError("split must cover every factor exactly once");
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const std::string& want = i < first.size() ? first[i] : second[i - first.size()];
    if (fs[i].label != want) throw LabelError("split does not match the factor order at '" + fs[i].label + "'");
  }
  if (!(q >= 1.0) || !(p >= 1.0)) throw Error("Schatten indices must be at least 1");
  if (!x.square()) throw DimensionError("norm_two_index needs a square operator");
  if (q == p || first.empty() || second.empty()) {
    NormResult r;
    r.value = schatten_norm(x.matrix(), first.empty() ? p : q);
    r.log2_value = std::log2(r.value);
    return r;
  }
  std::vector<detail::Group> groups;
  detail::Group g1{first, 1, q}, g2{second, 1, p};
  for (const auto& l : first) g1.dim *= x.dim_of(l);
  for (const auto& l : second) g2.dim *= x.dim_of(l);
  groups = {g1, g2};
  return detail::solve_groups(x.matrix(), groups, cfg);
}

inline NormResult norm_multi_index(const LabeledOperator& x0, const IndexProfile& profile, const OptimizerConfig& cfg = {}) {
  if (!x0.square()) throw DimensionError("norm_multi_index needs a square operator");
  if (profile.size() != x0.factors().size()) throw LabelError("profile must assign an index to every factor");
  for (const auto& e : profile.entries())
    if (x0.index_of(e.label) < 0) throw LabelError("profile label '" + e.label + "' is not a factor of the operator");
  LabeledOperator x = permute(x0, profile.labels());
  auto groups = detail::merge_groups(profile, x.factors());
  bool monotone = true;
  bool up = true, down = true;
  for (std::size_t i = 1; i < groups.size(); ++i) {
    if (groups[i].p < groups[i - 1].p) up = false;
    if (groups[i].p > groups[i - 1].p) down = false;
  }
  monotone = up || down;
  if (!monotone) {
    bool trailing_one = groups.size() == 3 && groups[0].p == 1.0 && groups[2].p == 1.0 && groups[1].p > 1.0;
    if (!trailing_one) throw UnsupportedProfileError("non-monotone index profile is not supported");
    if (!is_psd(x.matrix(), 1e-9)) throw UnsupportedProfileError("trailing-1 profile needs a positive semidefinite operator");
    LabeledOperator reduced = partial_trace(x, groups[2].labels);
    groups.pop_back();
    return detail::solve_groups(reduced.matrix(), groups, cfg);
  }
  return detail::solve_groups(x.matrix(), groups, cfg);
}

struct SwapResult {
  double lhs = 0;
  double rhs = 0;
  bool ok = true;
};

/// Compares ‖X‖ under (B:q, A:p) with ‖X‖_(A:p, B:q) for q ≥ p.
inline SwapResult check_swap_contraction(const LabeledOperator& x, double p, double q, const OptimizerConfig& cfg = {},
                                         double tol = 1e-6) {
  if (q < p) throw Error("swap contraction needs q >= p");
  if (x.factors().size() != 2) throw DimensionError("swap contraction needs an operator on two factors");
  const std::string a = x.factors()[0].label, b = x.factors()[1].label;
  SwapResult r;
  r.lhs = norm_multi_index(x, IndexProfile({{b, q}, {a, p}}), cfg).value;
  r.rhs = norm_multi_index(x, IndexProfile({{a, p}, {b, q}}), cfg).value;
  r.ok = r.lhs <= r.rhs * (1.0 + tol) + tol;
  return r;
}

}  // namespace rnl
