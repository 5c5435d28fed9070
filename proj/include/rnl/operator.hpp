#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace rnl {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kKernelCutoff = 1e-12;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class LabelError : public Error {
 public:
  using Error::Error;
};
class DimensionError : public Error {
 public:
  using Error::Error;
};
class InvariantError : public Error {
 public:
  using Error::Error;
};

struct Factor {
  std::string label;
  int dim = 1;
  bool operator==(const Factor&) const = default;
};
using Factors = std::vector<Factor>;

inline int total_dim(const Factors& fs) {
  int d = 1;
  for (const auto& f : fs) d *= f.dim;
  return d;
}

inline int find_label(const Factors& fs, const std::string& label) {
  for (std::size_t i = 0; i < fs.size(); ++i)
    if (fs[i].label == label) return static_cast<int>(i);
  return -1;
}

inline std::vector<std::string> labels_of(const Factors& fs) {
  std::vector<std::string> out;
  for (const auto& f : fs) out.push_back(f.label);
  return out;
}

inline void check_unique_labels(const Factors& fs) {
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (fs[i].dim < 1) throw DimensionError("factor '" + fs[i].label + "' has non-positive dimension");
    for (std::size_t j = i + 1; j < fs.size(); ++j)
      if (fs[i].label == fs[j].label) throw LabelError("duplicate label '" + fs[i].label + "'");
  }
}

/// Complex matrix with an ordered tensor factorization of its row space.
/// For square operators the column space carries the same factorization.
class LabeledOperator {
 public:
  LabeledOperator() = default;
  LabeledOperator(Matrix m, Factors factors) : m_(std::move(m)), factors_(std::move(factors)) {
    check_unique_labels(factors_);
    if (total_dim(factors_) != m_.rows())
      throw DimensionError("factor dimensions multiply to " + std::to_string(total_dim(factors_)) +
                           " but the matrix has " + std::to_string(m_.rows()) + " rows");
    if (!m_.allFinite()) throw InvariantError("operator has non-finite entries");
  }

  const Matrix& matrix() const { return m_; }
  const Factors& factors() const { return factors_; }
  bool square() const { return m_.rows() == m_.cols(); }
  int dim() const { return static_cast<int>(m_.rows()); }
  std::vector<std::string> labels() const { return labels_of(factors_); }
  int index_of(const std::string& label) const { return find_label(factors_, label); }
  int dim_of(const std::string& label) const {
    int i = index_of(label);
    if (i < 0) throw LabelError("unknown label '" + label + "'");
    return factors_[i].dim;
  }
  Complex trace() const { return m_.trace(); }

 private:
  Matrix m_;
  Factors factors_;
};

inline Matrix herm(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

inline double hermiticity_defect(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

/// Symmetrizes when the asymmetry is within tol, throws otherwise.
inline Matrix checked_herm(const Matrix& m, double tol = 1e-8) {
  if (m.rows() != m.cols()) throw DimensionError("Hermitian operator must be square");
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (hermiticity_defect(m) > tol * scale) throw InvariantError("operator is not Hermitian");
  return herm(m);
}

struct Spectrum {
  RealVector values;
  Matrix vectors;
};

inline Spectrum eigh(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  return {es.eigenvalues(), es.eigenvectors()};
}

inline Matrix from_spectrum(const Matrix& u, const RealVector& vals) {
  return u * vals.cast<Complex>().asDiagonal() * u.adjoint();
}

/// Spectral power of a PSD matrix with the relative kernel cutoff.
inline Matrix psd_power(const Matrix& h, double t, double tol = 1e-9) {
  Spectrum s = eigh(herm(h));
  double top = s.values.size() ? std::max(0.0, s.values.maxCoeff()) : 0.0;
  if (s.values.size() && s.values.minCoeff() < -tol * std::max(1.0, top))
    throw InvariantError("operator is not positive semidefinite");
  RealVector v(s.values.size());
  for (int i = 0; i < v.size(); ++i) {
    double lam = s.values(i);
    v(i) = (lam <= kKernelCutoff * top || lam <= 0.0) ? 0.0 : std::pow(lam, t);
  }
  return from_spectrum(s.vectors, v);
}

inline Matrix support_projector(const Matrix& h) {
  Spectrum s = eigh(herm(h));
  double top = s.values.size() ? std::max(0.0, s.values.maxCoeff()) : 0.0;
  RealVector v(s.values.size());
  for (int i = 0; i < v.size(); ++i) v(i) = s.values(i) > kKernelCutoff * top && s.values(i) > 0 ? 1.0 : 0.0;
  return from_spectrum(s.vectors, v);
}

inline LabeledOperator frac_power(const LabeledOperator& h, double t) {
  if (!h.square()) throw DimensionError("frac_power needs a square operator");
  return LabeledOperator(psd_power(checked_herm(h.matrix()), t), h.factors());
}

inline LabeledOperator identity(const Factors& fs) {
  int d = total_dim(fs);
  return LabeledOperator(Matrix::Identity(d, d), fs);
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline LabeledOperator tensor(const LabeledOperator& a, const LabeledOperator& b) {
  for (const auto& f : b.factors())
    if (a.index_of(f.label) >= 0) throw LabelError("label collision on '" + f.label + "'");
  Factors fs = a.factors();
  fs.insert(fs.end(), b.factors().begin(), b.factors().end());
  return LabeledOperator(kron(a.matrix(), b.matrix()), fs);
}

namespace detail {

inline std::vector<int> dims_of(const Factors& fs) {
  std::vector<int> d;
  for (const auto& f : fs) d.push_back(f.dim);
  return d;
}

inline std::vector<int> strides_of(const std::vector<int>& dims) {
  std::vector<int> s(dims.size(), 1);
  for (int i = static_cast<int>(dims.size()) - 2; i >= 0; --i) s[i] = s[i + 1] * dims[i + 1];
  return s;
}

// Maps each index of the permuted space to the index of the original space.
inline std::vector<int> permutation_map(const std::vector<int>& dims, const std::vector<int>& order) {
  std::vector<int> old_strides = strides_of(dims);
  std::vector<int> new_dims;
  for (int k : order) new_dims.push_back(dims[k]);
  int n = 1;
  for (int d : dims) n *= d;
  std::vector<int> map(n);
  std::vector<int> digit(order.size(), 0);
  for (int idx = 0; idx < n; ++idx) {
    int old = 0;
    for (std::size_t k = 0; k < order.size(); ++k) old += digit[k] * old_strides[order[k]];
    map[idx] = old;
    for (int k = static_cast<int>(order.size()) - 1; k >= 0; --k) {
      if (++digit[k] < new_dims[k]) break;
      digit[k] = 0;
    }
  }
  return map;
}

}  // namespace detail

/// Reorders the tensor factors of a square operator.
inline LabeledOperator permute(const LabeledOperator& x, const std::vector<std::string>& order) {
  if (!x.square()) throw DimensionError("permute needs a square operator");
  if (order.size() != x.factors().size()) throw LabelError("permutation must list every label once");
  std::vector<int> idx;
  Factors fs;
  for (const auto& l : order) {
    int i = x.index_of(l);
    if (i < 0) throw LabelError("unknown label '" + l + "'");
    idx.push_back(i);
    fs.push_back(x.factors()[i]);
  }
  check_unique_labels(fs);
  auto map = detail::permutation_map(detail::dims_of(x.factors()), idx);
  int n = x.dim();
  Matrix out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = x.matrix()(map[i], map[j]);
  return LabeledOperator(std::move(out), fs);
}

/// Permutes a state vector given the factorization of its space.
inline Vector permute_vector(const Vector& v, const Factors& fs, const std::vector<std::string>& order) {
  std::vector<int> idx;
  for (const auto& l : order) idx.push_back(find_label(fs, l));
  auto map = detail::permutation_map(detail::dims_of(fs), idx);
  Vector out(v.size());
  for (int i = 0; i < v.size(); ++i) out(i) = v(map[i]);
  return out;
}

inline LabeledOperator partial_trace(const LabeledOperator& x, const std::vector<std::string>& drop) {
  if (!x.square()) throw DimensionError("partial_trace needs a square operator");
  for (const auto& l : drop)
    if (x.index_of(l) < 0) throw LabelError("unknown label '" + l + "'");
  std::vector<std::string> keep, order;
  for (const auto& f : x.factors())
    if (std::find(drop.begin(), drop.end(), f.label) == drop.end()) keep.push_back(f.label);
  order = keep;
  for (const auto& f : x.factors())
    if (std::find(drop.begin(), drop.end(), f.label) != drop.end()) order.push_back(f.label);
  LabeledOperator p = permute(x, order);
  Factors kf;
  for (const auto& l : keep) kf.push_back(x.factors()[x.index_of(l)]);
  int dk = total_dim(kf);
  int dd = x.dim() / dk;
  Matrix out = Matrix::Zero(dk, dk);
  for (int i = 0; i < dk; ++i)
    for (int j = 0; j < dk; ++j) {
      Complex s = 0;
      for (int k = 0; k < dd; ++k) s += p.matrix()(i * dd + k, j * dd + k);
      out(i, j) = s;
    }
  return LabeledOperator(std::move(out), kf);
}

/// Traces out the trailing factors of a plain matrix, keeping a prefix of dimension `keep`.
inline Matrix trace_suffix(const Matrix& m, int keep) {
  int dd = static_cast<int>(m.rows()) / keep;
  if (dd == 1) return m;
  Matrix out(keep, keep);
  for (int i = 0; i < keep; ++i)
    for (int j = 0; j < keep; ++j) out(i, j) = m.block(i * dd, j * dd, dd, dd).trace();
  return out;
}

/// Traces out a leading block of dimension m.rows()/keep, keeping the suffix.
inline Matrix trace_prefix(const Matrix& m, int keep) {
  int dp = static_cast<int>(m.rows()) / keep;
  Matrix out = Matrix::Zero(keep, keep);
  for (int a = 0; a < dp; ++a) out += m.block(a * keep, a * keep, keep, keep);
  return out;
}

/// Kronecker product H ⊗ 1 with an identity of dimension `suffix`.
inline Matrix kron_identity(const Matrix& h, int suffix) {
  if (suffix == 1) return h;
  int d = static_cast<int>(h.rows());
  Matrix out = Matrix::Zero(d * suffix, d * suffix);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (h(i, j) != Complex(0))
        for (int k = 0; k < suffix; ++k) out(i * suffix + k, j * suffix + k) = h(i, j);
  return out;
}

/// Validated density operator.
class DensityOperator {
 public:
  DensityOperator() = default;
  explicit DensityOperator(const LabeledOperator& op, double tol = 1e-8) : trace_tol_(tol) {
    if (!op.square()) throw InvariantError("density operator must be square");
    if (hermiticity_defect(op.matrix()) > tol) throw InvariantError("density operator is not Hermitian");
    Matrix h = herm(op.matrix());
    double tr = h.trace().real();
    if (std::abs(tr - 1.0) > tol) throw InvariantError("density operator trace is " + std::to_string(tr) + ", not 1");
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol) throw InvariantError("density operator has a negative eigenvalue");
    op_ = LabeledOperator(std::move(h), op.factors());
  }
  const LabeledOperator& op() const { return op_; }
  const Matrix& matrix() const { return op_.matrix(); }
  const Factors& factors() const { return op_.factors(); }
  int dim() const { return op_.dim(); }
  double trace_tol() const { return trace_tol_; }
  operator const LabeledOperator&() const { return op_; }

 private:
  LabeledOperator op_;
  double trace_tol_ = 1e-8;
};

inline std::string tilde(const std::string& label) { return "~" + label; }

/// Canonical purification |√ρ⟩ = Σᵢ |i⟩_Q̃ ⊗ √ρ|i⟩_Q as a vector on Q̃Q.
inline Vector purification_vector(const Matrix& rho) {
  Matrix s = psd_power(rho, 0.5);
  int d = static_cast<int>(rho.rows());
  Vector v(d * d);
  for (int i = 0; i < d; ++i)
    for (int q = 0; q < d; ++q) v(i * d + q) = s(q, i);
  return v;
}

inline LabeledOperator purify(const DensityOperator& rho) {
  Factors fs;
  for (const auto& f : rho.factors()) fs.push_back({tilde(f.label), f.dim});
  for (const auto& f : rho.factors()) fs.push_back(f);
  Vector v = purification_vector(rho.matrix());
  return LabeledOperator(v * v.adjoint(), fs);
}

/// Reduced state on Q of a vector on Q̃Q given as the d_Q̃ × d_Q coefficient matrix Ψ.
inline Matrix reduced_from_coefficients(const Matrix& psi) { return psi.transpose() * psi.conjugate(); }

inline double entropy_bits(const RealVector& eig) {
  double s = 0.0;
  for (int i = 0; i < eig.size(); ++i)
    if (eig(i) > 1e-300) s -= eig(i) * std::log2(eig(i));
  return s;
}

inline double von_neumann_entropy(const Matrix& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm(rho), Eigen::EigenvaluesOnly);
  return entropy_bits(es.eigenvalues());
}

}  // namespace rnl
