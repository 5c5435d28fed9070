#pragma once

#include "rnl/random.hpp"

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>

#include <functional>

namespace rnl {

struct OptimizerConfig {
  int restarts = 8;         // random starts in addition to the maximally mixed one
  int max_iters = 5000;
  double rel_tol = 1e-12;   // relative function change
  double grad_tol = 1e-11;
  std::uint64_t seed = 0;
  int jobs = 1;
  int polish = 1;           // cold restarts from the best point (channel entropies)
};

/// Smooth objective; returns +inf (or NaN) when x is outside the domain.
using Objective = std::function<double(const RealVector& x, RealVector* grad)>;

struct MinimizeResult {
  RealVector x;
  double value = kInf;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

class CeresAdapter : public ceres::FirstOrderFunction {
 public:
  CeresAdapter(const Objective& f, int n) : f_(f), n_(n) {}
  bool Evaluate(const double* params, double* cost, double* gradient) const override {
    RealVector x = Eigen::Map<const RealVector>(params, n_);
    RealVector g;
    double v = f_(x, gradient ? &g : nullptr);
    if (!std::isfinite(v)) return false;
    *cost = v;
    if (gradient) {
      if (!g.allFinite()) return false;
      Eigen::Map<RealVector>(gradient, n_) = g;
    }
    return true;
  }
  int NumParameters() const override { return n_; }

 private:
  const Objective& f_;
  int n_;
};

}  // namespace detail

/// L-BFGS with a Wolfe line search.
inline MinimizeResult minimize(const Objective& f, const RealVector& x0, const OptimizerConfig& cfg) {
  MinimizeResult res;
  res.x = x0;
  res.value = f(x0, nullptr);
  if (x0.size() == 0) {
    res.converged = true;
    return res;
  }
  if (!std::isfinite(res.value)) return res;
  ceres::GradientProblem problem(new detail::CeresAdapter(f, static_cast<int>(x0.size())));
  ceres::GradientProblemSolver::Options opts;
  opts.line_search_direction_type = ceres::LBFGS;
  opts.max_num_iterations = cfg.max_iters;
  opts.function_tolerance = cfg.rel_tol;
  opts.gradient_tolerance = cfg.grad_tol;
  opts.parameter_tolerance = 1e-14;
  opts.logging_type = ceres::SILENT;
  opts.minimizer_progress_to_stdout = false;
  ceres::GradientProblemSolver::Summary summary;
  std::vector<double> x(x0.data(), x0.data() + x0.size());
  ceres::Solve(opts, problem, x.data(), &summary);
  RealVector xf = Eigen::Map<RealVector>(x.data(), x.size());
  double v = f(xf, nullptr);
  if (std::isfinite(v) && v <= res.value) {
    res.x = xf;
    res.value = v;
  }
  res.iterations = static_cast<int>(summary.iterations.size());
  res.converged = summary.termination_type == ceres::CONVERGENCE;
  return res;
}

// Unit-trace PSD parametrization F = LL*/tr(LL*), L stored as interleaved (re, im).

inline Matrix unpack_complex(const double* x, int rows, int cols) {
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) {
      int k = 2 * (j * rows + i);
      m(i, j) = Complex(x[k], x[k + 1]);
    }
  return m;
}

inline void pack_complex(const Matrix& m, double* x) {
  for (int j = 0; j < m.cols(); ++j)
    for (int i = 0; i < m.rows(); ++i) {
      int k = 2 * (j * static_cast<int>(m.rows()) + i);
      x[k] = m(i, j).real();
      x[k + 1] = m(i, j).imag();
    }
}

/// Initial L for a given PSD matrix (its square root).
inline Matrix factor_of(const Matrix& f) { return psd_power(f, 0.5); }

struct DensityParam {
  Matrix l;
  Matrix p;    // LL*
  double tau;  // tr(LL*)
  Matrix f;    // LL*/tau
};

inline DensityParam density_param(const double* x, int d) {
  DensityParam dp;
  dp.l = unpack_complex(x, d, d);
  dp.p = dp.l * dp.l.adjoint();
  dp.tau = dp.p.trace().real();
  dp.f = dp.p / dp.tau;
  return dp;
}

/// Gradient wrt the packed L of an objective with d obj = tr[N dF], N Hermitian.
inline void density_pullback(const DensityParam& dp, const Matrix& n, double* g) {
  Complex c = (n * dp.p).trace();
  Matrix np = n / dp.tau - (c.real() / (dp.tau * dp.tau)) * Matrix::Identity(n.rows(), n.cols());
  Matrix gl = 2.0 * np * dp.l;
  pack_complex(gl, g);
}

/// First divided differences of λ ↦ λ^t (Daleckii–Krein kernel).
inline RealMatrix power_divided_differences(const RealVector& lam, double t) {
  int d = static_cast<int>(lam.size());
  RealMatrix g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double a = lam(i), b = lam(j);
      if (std::abs(a - b) <= 1e-10 * std::max(std::abs(a), std::abs(b))) {
        double m = 0.5 * (a + b);
        g(i, j) = t * std::pow(m, t - 1.0);
      } else {
        g(i, j) = (std::pow(a, t) - std::pow(b, t)) / (a - b);
      }
    }
  return g;
}

/// For H = F^t with F = U diag(λ) U*, maps M (d obj = tr[M dH]) to N (d obj = tr[N dF]).
inline Matrix power_pullback(const Matrix& u, const RealVector& lam, double t, const Matrix& m) {
  Matrix c = u.adjoint() * herm(m) * u;
  RealMatrix g = power_divided_differences(lam, t);
  Matrix h = c.cwiseProduct(g.cast<Complex>());
  return u * h * u.adjoint();
}

/// Deterministic multi-start: the supplied starts are tried first, then `extra` random ones.
inline MinimizeResult minimize_multistart(const Objective& f, const std::vector<RealVector>& starts,
                                          const OptimizerConfig& cfg) {
  MinimizeResult best;
  for (const auto& s : starts) {
    MinimizeResult r = minimize(f, s, cfg);
    if (r.value < best.value || best.x.size() == 0) best = r;
  }
  return best;
}

}  // namespace rnl
