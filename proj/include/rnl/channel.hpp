#pragma once

#include "rnl/operator.hpp"

namespace rnl {

/// Completely positive map given by Kraus operators from in_factors to out_factors.
class KrausChannel {
 public:
  KrausChannel() = default;
  KrausChannel(std::vector<Matrix> kraus, Factors in, Factors out, bool trace_preserving = true, double tol = 1e-8)
      : kraus_(std::move(kraus)), in_(std::move(in)), out_(std::move(out)), tp_(trace_preserving) {
    check_unique_labels(in_);
    check_unique_labels(out_);
    if (kraus_.empty()) throw InvariantError("channel needs at least one Kraus operator");
    int din = total_dim(in_), dout = total_dim(out_);
    for (const auto& k : kraus_) {
      if (k.rows() != dout || k.cols() != din)
        throw DimensionError("Kraus operator has shape " + std::to_string(k.rows()) + "x" + std::to_string(k.cols()) +
                             ", expected " + std::to_string(dout) + "x" + std::to_string(din));
      if (!k.allFinite()) throw InvariantError("Kraus operator has non-finite entries");
    }
    Matrix s = kraus_sum();
    if (tp_) {
      if ((s - Matrix::Identity(din, din)).cwiseAbs().maxCoeff() > tol)
        throw InvariantError("channel marked trace preserving but sum of K*K is not the identity");
    } else {
      Eigen::SelfAdjointEigenSolver<Matrix> es(herm(s), Eigen::EigenvaluesOnly);
      if (es.eigenvalues().maxCoeff() > 1.0 + tol) throw InvariantError("channel is trace increasing");
    }
  }

  const std::vector<Matrix>& kraus() const { return kraus_; }
  const Factors& in_factors() const { return in_; }
  const Factors& out_factors() const { return out_; }
  bool trace_preserving() const { return tp_; }
  int in_dim() const { return total_dim(in_); }
  int out_dim() const { return total_dim(out_); }

  Matrix kraus_sum() const {
    Matrix s = Matrix::Zero(in_dim(), in_dim());
    for (const auto& k : kraus_) s += k.adjoint() * k;
    return s;
  }

  Matrix apply(const Matrix& x) const {
    Matrix out = Matrix::Zero(out_dim(), out_dim());
    for (const auto& k : kraus_) out.noalias() += k * x * k.adjoint();
    return out;
  }

  Matrix apply_adjoint(const Matrix& y) const {
    Matrix out = Matrix::Zero(in_dim(), in_dim());
    for (const auto& k : kraus_) out.noalias() += k.adjoint() * y * k;
    return out;
  }

  /// Same map with relabeled factors.
  KrausChannel relabeled(Factors in, Factors out) const {
    if (total_dim(in) != in_dim() || total_dim(out) != out_dim()) throw DimensionError("relabeling changes dimensions");
    return KrausChannel(kraus_, std::move(in), std::move(out), tp_);
  }

 private:
  std::vector<Matrix> kraus_;
  Factors in_, out_;
  bool tp_ = true;
};

/// Applies id ⊗ Φ ⊗ id where Φ's inputs match a contiguous block of x's factors.
inline LabeledOperator apply_channel(const KrausChannel& phi, const LabeledOperator& x) {
  if (!x.square()) throw DimensionError("apply_channel needs a square operator");
  const Factors& xf = x.factors();
  const Factors& in = phi.in_factors();
  int start = -1;
  for (std::size_t s = 0; s + in.size() <= xf.size(); ++s) {
    bool ok = true;
    for (std::size_t k = 0; k < in.size() && ok; ++k) ok = xf[s + k] == in[k];
    if (ok) {
      start = static_cast<int>(s);
      break;
    }
  }
  if (start < 0) throw DimensionError("channel inputs do not match a contiguous block of the operator's factors");
  Factors left(xf.begin(), xf.begin() + start), right(xf.begin() + start + in.size(), xf.end());
  Factors out = left;
  out.insert(out.end(), phi.out_factors().begin(), phi.out_factors().end());
  out.insert(out.end(), right.begin(), right.end());
  check_unique_labels(out);
  int dl = total_dim(left), dr = total_dim(right);
  Matrix il = Matrix::Identity(dl, dl), ir = Matrix::Identity(dr, dr);
  int dout = total_dim(out);
  Matrix res = Matrix::Zero(dout, dout);
  for (const auto& k : phi.kraus()) {
    Matrix kf = kron(kron(il, k), ir);
    res.noalias() += kf * x.matrix() * kf.adjoint();
  }
  return LabeledOperator(std::move(res), out);
}

inline KrausChannel identity_channel(const Factors& fs) {
  int d = total_dim(fs);
  return KrausChannel({Matrix::Identity(d, d)}, fs, fs, true);
}

/// Φ₁ ⊗ Φ₂ with outputs ordered out(Φ₁) ++ out(Φ₂).
inline KrausChannel tensor(const KrausChannel& a, const KrausChannel& b) {
  std::vector<Matrix> ks;
  for (const auto& ka : a.kraus())
    for (const auto& kb : b.kraus()) ks.push_back(kron(ka, kb));
  Factors in = a.in_factors(), out = a.out_factors();
  in.insert(in.end(), b.in_factors().begin(), b.in_factors().end());
  out.insert(out.end(), b.out_factors().begin(), b.out_factors().end());
  return KrausChannel(std::move(ks), in, out, a.trace_preserving() && b.trace_preserving());
}

/// Applies `second` to a contiguous block of the outputs of `first`.
inline KrausChannel compose(const KrausChannel& second, const KrausChannel& first) {
  const Factors& of = first.out_factors();
  const Factors& in = second.in_factors();
  int start = -1;
  for (std::size_t s = 0; s + in.size() <= of.size(); ++s) {
    bool ok = true;
    for (std::size_t k = 0; k < in.size() && ok; ++k) ok = of[s + k] == in[k];
    if (ok) {
      start = static_cast<int>(s);
      break;
    }
  }
  if (start < 0) throw DimensionError("composition: inputs of the second map are not outputs of the first");
  Factors left(of.begin(), of.begin() + start), right(of.begin() + start + in.size(), of.end());
  Factors out = left;
  out.insert(out.end(), second.out_factors().begin(), second.out_factors().end());
  out.insert(out.end(), right.begin(), right.end());
  int dl = total_dim(left), dr = total_dim(right);
  Matrix il = Matrix::Identity(dl, dl), ir = Matrix::Identity(dr, dr);
  std::vector<Matrix> ks;
  for (const auto& k2 : second.kraus()) {
    Matrix big = kron(kron(il, k2), ir);
    for (const auto& k1 : first.kraus()) ks.push_back(big * k1);
  }
  return KrausChannel(std::move(ks), first.in_factors(), out, first.trace_preserving() && second.trace_preserving());
}

/// Reorders the output factors of a channel.
inline KrausChannel permute_outputs(const KrausChannel& phi, const std::vector<std::string>& order) {
  std::vector<int> idx;
  Factors fs;
  for (const auto& l : order) {
    int i = find_label(phi.out_factors(), l);
    if (i < 0) throw LabelError("unknown output label '" + l + "'");
    idx.push_back(i);
    fs.push_back(phi.out_factors()[i]);
  }
  if (fs.size() != phi.out_factors().size()) throw LabelError("output permutation must list every label");
  auto map = detail::permutation_map(detail::dims_of(phi.out_factors()), idx);
  std::vector<Matrix> ks;
  for (const auto& k : phi.kraus()) {
    Matrix m(k.rows(), k.cols());
    for (int i = 0; i < k.rows(); ++i) m.row(i) = k.row(map[i]);
    ks.push_back(std::move(m));
  }
  return KrausChannel(std::move(ks), phi.in_factors(), fs, phi.trace_preserving());
}

/// ρ ↦ (1−p)ρ + p·tr(ρ)·𝟙/d on a single system, relabeled to output `out`.
inline KrausChannel depolarizing_channel(int d, double p, const std::string& in = "Q", const std::string& out = "S") {
  std::vector<Matrix> ks;
  // Unitary error basis X^a Z^b.
  const double pi = std::acos(-1.0);
  Complex w = std::polar(1.0, 2.0 * pi / d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      Matrix u = Matrix::Zero(d, d);
      for (int j = 0; j < d; ++j) u((j + a) % d, j) = std::pow(w, b * j);
      double c = (a == 0 && b == 0) ? std::sqrt(1.0 - p + p / (d * d)) : std::sqrt(p / (d * d));
      if (c > 0) ks.push_back(c * u);
    }
  return KrausChannel(std::move(ks), {{in, d}}, {{out, d}}, true);
}

/// Computational-basis dephasing with strength p.
inline KrausChannel dephasing_channel(int d, double p, const std::string& in = "Q", const std::string& out = "S") {
  std::vector<Matrix> ks;
  ks.push_back(std::sqrt(1.0 - p) * Matrix::Identity(d, d));
  for (int i = 0; i < d; ++i) {
    Matrix k = Matrix::Zero(d, d);
    k(i, i) = std::sqrt(p);
    ks.push_back(k);
  }
  return KrausChannel(std::move(ks), {{in, d}}, {{out, d}}, true);
}

}  // namespace rnl
