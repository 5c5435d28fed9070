#pragma once

#include "rnl/channel.hpp"

#include <cstdint>
#include <random>
#include <variant>

namespace rnl {

using Rng = std::mt19937_64;

/// splitmix64 step, used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// std::normal_distribution is implementation-defined; Box-Muller keeps samples portable.
inline double standard_normal(Rng& rng) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  double u1 = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
  double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline Matrix ginibre_matrix(int rows, int cols, Rng& rng) {
  Matrix g(rows, cols);
  const double s = std::sqrt(0.5);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) {
      double re = standard_normal(rng);
      double im = standard_normal(rng);
      g(i, j) = Complex(s * re, s * im);
    }
  return g;
}

/// Isometry with orthonormal columns; the phase fix makes it Haar distributed.
inline Matrix haar_isometry(int rows, int cols, Rng& rng) {
  Matrix g = ginibre_matrix(rows, cols, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (int j = 0; j < cols; ++j) {
    Complex d = r(j, j);
    if (std::abs(d) > 0) q.col(j) *= d / std::abs(d);
  }
  return q;
}

inline Matrix haar_unitary(int d, Rng& rng) { return haar_isometry(d, d, rng); }

inline Matrix ginibre_state_matrix(int d, Rng& rng, int rank = -1) {
  Matrix g = ginibre_matrix(d, rank < 0 ? d : rank, rng);
  Matrix rho = g * g.adjoint();
  return herm(rho / rho.trace().real());
}

inline DensityOperator ginibre_state(const Factors& fs, Rng& rng, int rank = -1) {
  return DensityOperator(LabeledOperator(ginibre_state_matrix(total_dim(fs), rng, rank), fs));
}

/// Haar–Stinespring channel: V = isometry into out ⊗ env, Kraus operators (1 ⊗ ⟨k|) V.
inline KrausChannel haar_stinespring_channel(const Factors& in, const Factors& out, int env, Rng& rng) {
  int din = total_dim(in), dout = total_dim(out);
  Matrix v = haar_isometry(dout * env, din, rng);
  std::vector<Matrix> ks;
  for (int k = 0; k < env; ++k) {
    Matrix m(dout, din);
    for (int i = 0; i < dout; ++i) m.row(i) = v.row(i * env + k);
    ks.push_back(std::move(m));
  }
  return KrausChannel(std::move(ks), in, out, true);
}

/// Flat Dirichlet sample on the probability simplex.
inline std::vector<double> classical_distribution(int n, Rng& rng) {
  std::vector<double> p(n);
  double s = 0;
  for (auto& x : p) {
    x = -std::log(1.0 - uniform01(rng));
    s += x;
  }
  for (auto& x : p) x /= s;
  return p;
}

enum class RandomKind { ginibre_state, haar_stinespring_channel, classical_distribution };

struct RandomSpec {
  std::uint64_t seed = 0;
  RandomKind kind = RandomKind::ginibre_state;
  Factors in;   // state factors, or channel input
  Factors out;  // channel output
  int env = 2;  // channel environment dimension
  int n = 2;    // classical distribution length
};

using Sample = std::variant<DensityOperator, KrausChannel, std::vector<double>>;

inline Sample sample(const RandomSpec& spec) {
  Rng rng(spec.seed);
  switch (spec.kind) {
    case RandomKind::ginibre_state:
      return ginibre_state(spec.in, rng);
    case RandomKind::haar_stinespring_channel:
      return haar_stinespring_channel(spec.in, spec.out, spec.env, rng);
    case RandomKind::classical_distribution:
      if (spec.n < 1) throw DimensionError("distribution length must be positive");
      return classical_distribution(spec.n, rng);
  }
  throw Error("unknown random kind");
}

}  // namespace rnl
