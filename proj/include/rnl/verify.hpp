#pragma once

#include "rnl/channel_norms.hpp"
#include "rnl/renyi.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <thread>

namespace rnl {

struct SuiteConfig {
  std::uint64_t seed = 0;
  int trials = 50;
  std::map<std::string, int> dims;  // role → dimension, missing roles are 2
  std::vector<double> alphas{1.5, 2.0, 3.0};
  double tol = 1e-4;
  int jobs = 1;

  int dim(const std::string& role) const {
    auto it = dims.find(role);
    return it == dims.end() ? 2 : it->second;
  }
  void validate() const {
    if (trials < 1) throw Error("trials must be at least 1");
    for (const auto& [k, v] : dims)
      if (v < 2) throw Error("dimension for role '" + k + "' must be at least 2");
    if (alphas.empty()) throw Error("at least one alpha is required");
    for (double a : alphas)
      if (!(a > 1.0)) throw Error("every alpha must exceed 1");
    if (!(tol > 0)) throw Error("tolerance must be positive");
    if (jobs < 1) throw Error("jobs must be at least 1");
  }
};

struct TrialOutcome {
  double value = 0.0;
  bool converged = true;
  bool error = false;
};

/// One check: every value must satisfy −tol_low ≤ value ≤ tol_high.
struct CheckRecord {
  std::string name;
  double tol_low = 0.0;
  double tol_high = kInf;
  int trials = 0;
  int violations = 0;
  int inconclusive = 0;
  double worst_slack = kInf;  // min over values
  double max_abs = 0.0;
  std::vector<double> values;
  double seconds = 0.0;  // wall time, kept out of the serialized report
  bool passed() const { return violations == 0; }
};

struct SuiteReport {
  SuiteConfig config;
  std::vector<CheckRecord> checks;
  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed()) return false;
    return true;
  }
  const CheckRecord& at(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw LabelError("no check named '" + name + "'");
  }
};

inline CheckRecord make_record(std::string name, double tol_low, double tol_high, const std::vector<TrialOutcome>& outs) {
  CheckRecord r;
  r.name = std::move(name);
  r.tol_low = tol_low;
  r.tol_high = tol_high;
  r.trials = static_cast<int>(outs.size());
  for (const auto& o : outs) {
    r.values.push_back(o.value);
    if (o.error || !std::isfinite(o.value)) {
      ++r.violations;
      continue;
    }
    r.worst_slack = std::min(r.worst_slack, o.value);
    r.max_abs = std::max(r.max_abs, std::abs(o.value));
    bool bad = o.value < -tol_low || o.value > tol_high;
    if (!bad) continue;
    if (o.converged)
      ++r.violations;
    else
      ++r.inconclusive;
  }
  return r;
}

/// Runs fn(0..n−1) on up to `jobs` threads; results are ordered by index.
inline std::vector<TrialOutcome> run_trials(int n, int jobs, const std::function<TrialOutcome(int)>& fn) {
  std::vector<TrialOutcome> out(n);
  auto guarded = [&](int i) {
    try {
      out[i] = fn(i);
    } catch (const std::exception&) {
      out[i].error = true;
      out[i].value = std::numeric_limits<double>::quiet_NaN();
    }
  };
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) guarded(i);
    return out;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int j = 0; j < std::min(jobs, n); ++j)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) guarded(i);
    });
  for (auto& t : pool) t.join();
  return out;
}

// ---------------------------------------------------------------- sampling

/// Structured channels from a single input factor: kind 0 depolarizing, 1 dephasing (both acting on the last
/// output factor, other outputs prepared in |0⟩), 2 measure-and-broadcast in a random basis.
inline KrausChannel structured_channel(const Factors& in, const Factors& out, int kind, Rng& rng) {
  if (in.size() != 1) throw DimensionError("structured channels take a single input factor");
  int din = in[0].dim;
  int dlast = out.back().dim;
  int dother = total_dim(out) / dlast;
  std::vector<Matrix> ks;
  if (kind == 2) {
    Matrix u = haar_unitary(din, rng);
    for (int x = 0; x < din; ++x) {
      Vector e = Vector::Ones(1);
      for (const auto& f : out) {
        Vector b = Vector::Zero(f.dim);
        b(x % f.dim) = 1.0;
        e = kron(e, b);
      }
      ks.push_back(e * u.row(x));
    }
    return KrausChannel(std::move(ks), in, out);
  }
  if (dlast < din) throw DimensionError("structured channel needs the last output to hold the input");
  double p = uniform01(rng);
  KrausChannel base = kind == 0 ? depolarizing_channel(dlast, p) : dephasing_channel(dlast, p);
  Matrix embed = Matrix::Identity(dlast, din);
  Matrix zero = Matrix::Zero(dother, 1);
  zero(0, 0) = 1.0;
  for (const auto& k : base.kraus()) ks.push_back(kron(zero, Matrix(k * embed)));
  return KrausChannel(std::move(ks), in, out);
}

/// Haar–Stinespring and structured channels at ratio 2:1.
inline KrausChannel sample_channel(const Factors& in, const Factors& out, int trial, Rng& rng) {
  if (trial % 3 == 2) return structured_channel(in, out, (trial / 3) % 3, rng);
  return haar_stinespring_channel(in, out, 2, rng);
}

// ---------------------------------------------------------------- theorem checks

struct SlackResult {
  double slack = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool converged = true;
};

inline std::vector<std::string> input_labels(const KrausChannel& phi) { return labels_of(phi.in_factors()); }

inline std::vector<std::string> joined(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

/// H↑(ST|R)_{(Φ⊗id)ρ} − H↑(T|Q)_ρ − inf_σ H↑(S|R)_{Φ(σ)}; expected ≥ 0.
/// `moe` may carry a precomputed minimum output entropy of Φ.
inline SlackResult check_chain_rule(const KrausChannel& phi, const std::vector<std::string>& r, const LabeledOperator& rho,
                                    double alpha, const OptimizerConfig& cfg = {},
                                    const ChannelNormResult* moe = nullptr) {
  if (!(alpha > 1.0)) throw Error("chain rule needs alpha > 1");
  ChannelNormResult m = moe ? *moe : min_output_entropy(phi, r, alpha, cfg);
  auto out = cond_entropy_norm(apply_channel(phi, rho), r, alpha, cfg);
  auto in = cond_entropy_norm(rho, input_labels(phi), alpha, cfg);
  SlackResult s;
  s.lhs = out.value - in.value;
  s.rhs = m.log_value;
  s.slack = s.lhs - s.rhs;
  s.converged = out.converged && in.converged && m.converged;
  return s;
}

/// Conditioning on an extra system E on both sides, cb entropy of Φ on the right.
inline SlackResult check_cb_chain_rule(const KrausChannel& phi, const std::vector<std::string>& r,
                                       const std::vector<std::string>& e, const LabeledOperator& rho, double alpha,
                                       const OptimizerConfig& cfg = {}, const ChannelNormResult* cb = nullptr) {
  if (!(alpha > 1.0)) throw Error("chain rule needs alpha > 1");
  ChannelNormResult c = cb ? *cb : cb_norm_1_to_1p(phi, r, alpha, cfg);
  auto out = cond_entropy_norm(apply_channel(phi, rho), joined(r, e), alpha, cfg);
  auto in = cond_entropy_norm(rho, joined(input_labels(phi), e), alpha, cfg);
  SlackResult s;
  s.lhs = out.value - in.value;
  s.rhs = c.log_value;
  s.slack = s.lhs - s.rhs;
  s.converged = out.converged && in.converged && c.converged;
  return s;
}

/// Φ = φ₁ ⊗ φ₂ with φ₁: Q₁→R, φ₂: Q₂→S and ρ on Q₁Q₂T. H↑(T|Q₁) comes from the (Q₁:1, T:α, Q₂:1) norm.
inline SlackResult check_product_chain_rule(const KrausChannel& phi1, const KrausChannel& phi2, const LabeledOperator& rho,
                                            double alpha, const OptimizerConfig& cfg = {}) {
  if (!(alpha > 1.0)) throw Error("chain rule needs alpha > 1");
  KrausChannel phi = tensor(phi1, phi2);
  auto r = labels_of(phi1.out_factors());
  auto q1 = input_labels(phi1), q2 = input_labels(phi2);
  std::vector<IndexEntry> prof;
  for (const auto& l : q1) prof.push_back({l, 1.0});
  for (const auto& f : rho.factors())
    if (std::find(q1.begin(), q1.end(), f.label) == q1.end() && std::find(q2.begin(), q2.end(), f.label) == q2.end())
      prof.push_back({f.label, alpha});
  for (const auto& l : q2) prof.push_back({l, 1.0});
  auto tq = norm_multi_index(rho, IndexProfile(prof), cfg);
  auto out = cond_entropy_norm(apply_channel(phi, rho), r, alpha, cfg);
  // Product of the factor witnesses as the start.
  auto w1 = cb_norm_1_to_1p(phi1, r, alpha, cfg), w2 = cb_norm_1_to_1p(phi2, {}, alpha, cfg);
  OptimizerConfig pc = cfg;
  pc.polish = 0;
  auto cb = cb_norm_1_to_1p(phi, r, alpha, pc, {kron(w1.witness_psi, w2.witness_psi)});
  SlackResult s;
  s.lhs = out.value - entropy_from_log2_norm(tq.log2_value, alpha);
  s.rhs = cb.log_value;
  s.slack = s.lhs - s.rhs;
  s.converged = out.converged && tq.converged && cb.converged;
  return s;
}

/// Ψ∘Φ with Φ: Q₁→R₁Q₂S₁ and Ψ: Q₂→R₂S₂; slack = H_cb(Ψ∘Φ) − H_cb(Ψ) − H_cb(Φ | R₁Q₂).
inline SlackResult check_sequential(const KrausChannel& phi, const std::vector<std::string>& r1, const KrausChannel& psi,
                                    const std::vector<std::string>& r2, double alpha, const OptimizerConfig& cfg = {}) {
  if (!(alpha > 1.0)) throw Error("sequential composition needs alpha > 1");
  KrausChannel comp = compose(psi, phi);
  OptimizerConfig oc = cfg;
  oc.restarts = std::min(cfg.restarts, 1);
  auto lhs = cb_norm_1_to_1p(comp, joined(r1, r2), alpha, oc);
  // Unpolished right-hand terms can only shrink the slack.
  OptimizerConfig rc = cfg;
  rc.polish = 0;
  auto a = cb_norm_1_to_1p(psi, r2, alpha, rc);
  rc.restarts = oc.restarts;
  auto b = cb_norm_1_to_1p(phi, joined(r1, input_labels(psi)), alpha, rc);
  SlackResult s;
  s.lhs = lhs.log_value;
  s.rhs = a.log_value + b.log_value;
  s.slack = s.lhs - s.rhs;
  s.converged = lhs.converged && a.converged && b.converged;
  return s;
}

struct GapResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;  // lhs − rhs
  bool converged = true;
};

inline KrausChannel ordered_product(const KrausChannel& phi1, const std::vector<std::string>& r1, const KrausChannel& phi2,
                                    const std::vector<std::string>& r2) {
  std::vector<std::string> order = joined(r1, r2);
  for (const auto* p : {&phi1, &phi2})
    for (const auto& f : p->out_factors())
      if (std::find(order.begin(), order.end(), f.label) == order.end() &&
          std::find(r1.begin(), r1.end(), f.label) == r1.end())
        order.push_back(f.label);
  return permute_outputs(tensor(phi1, phi2), order);
}

/// cb entropy of Φ₁⊗Φ₂ (outputs R₁R₂S₁S₂) against the sum of the factor values.
inline GapResult check_multiplicativity_1_1p(const KrausChannel& phi1, const std::vector<std::string>& r1,
                                             const KrausChannel& phi2, const std::vector<std::string>& r2, double alpha,
                                             const OptimizerConfig& cfg = {}) {
  if (!(alpha > 1.0)) throw Error("multiplicativity needs alpha > 1");
  auto a = cb_norm_1_to_1p(phi1, r1, alpha, cfg);
  auto b = cb_norm_1_to_1p(phi2, r2, alpha, cfg);
  KrausChannel prod = ordered_product(phi1, r1, phi2, r2);
  std::vector<Matrix> starts{kron(a.witness_psi, b.witness_psi)};
  OptimizerConfig pc = cfg;
  pc.polish = 0;
  auto lhs = cb_norm_1_to_1p(prod, joined(r1, r2), alpha, pc, starts);
  GapResult g;
  g.lhs = lhs.log_value;
  g.rhs = a.log_value + b.log_value;
  g.gap = g.lhs - g.rhs;
  g.converged = lhs.converged && a.converged && b.converged;
  return g;
}

inline LinearConstraint product_constraint(const LinearConstraint& c1, const LinearConstraint& c2) {
  auto suffixed = [](const Factors& fs, const std::string& s) {
    Factors out = fs;
    for (auto& f : out) f.label += s;
    return out;
  };
  KrausChannel n1 = c1.n_map.relabeled(suffixed(c1.n_map.in_factors(), "#1"), suffixed(c1.n_map.out_factors(), "#1"));
  KrausChannel n2 = c2.n_map.relabeled(suffixed(c2.n_map.in_factors(), "#2"), suffixed(c2.n_map.out_factors(), "#2"));
  KrausChannel n = tensor(n1, n2);
  return LinearConstraint(n, LabeledOperator(kron(c1.tau.matrix(), c2.tau.matrix()), n.out_factors()));
}

/// Restricted cb entropy of Φ₁⊗Φ₂ under the product constraint against the sum of restricted factor values.
inline GapResult check_restricted_multiplicativity(const KrausChannel& phi1, const std::vector<std::string>& r1,
                                                   const LinearConstraint& c1, const KrausChannel& phi2,
                                                   const std::vector<std::string>& r2, const LinearConstraint& c2,
                                                   double alpha, const OptimizerConfig& cfg = {}) {
  if (!(alpha > 1.0)) throw Error("multiplicativity needs alpha > 1");
  auto a = restricted_cb_norm(phi1, r1, alpha, c1, cfg);
  auto b = restricted_cb_norm(phi2, r2, alpha, c2, cfg);
  KrausChannel prod = ordered_product(phi1, r1, phi2, r2);
  std::vector<Matrix> starts{kron(a.witness_psi, b.witness_psi)};
  OptimizerConfig pc = cfg;
  pc.polish = 0;
  auto lhs = restricted_cb_norm(prod, joined(r1, r2), alpha, product_constraint(c1, c2), pc, starts);
  GapResult g;
  g.lhs = lhs.log_value;
  g.rhs = a.log_value + b.log_value;
  g.gap = g.lhs - g.rhs;
  g.converged = lhs.converged && a.converged && b.converged && lhs.constraint_violation < 1e-6;
  return g;
}

// ---------------------------------------------------------------- suite

/// Arimoto's closed form for a classical p(b, a), b outer.
inline double arimoto_entropy(const std::vector<double>& p, int db, int da, double alpha) {
  double s = 0;
  for (int b = 0; b < db; ++b) {
    double inner = 0;
    for (int a = 0; a < da; ++a) inner += std::pow(p[b * da + a], alpha);
    s += std::pow(inner, 1.0 / alpha);
  }
  return alpha / (1 - alpha) * std::log2(s);
}

/// Computational-basis pinching constraint with a random full-support diagonal target.
inline LinearConstraint random_pinching_constraint(const Factors& q, Rng& rng) {
  int d = total_dim(q);
  std::vector<Matrix> ks;
  for (int i = 0; i < d; ++i) {
    Matrix k = Matrix::Zero(d, d);
    k(i, i) = 1.0;
    ks.push_back(k);
  }
  auto p = classical_distribution(d, rng);
  RealVector v(d);
  for (int i = 0; i < d; ++i) v(i) = 0.5 * p[i] + 0.5 / d;
  Factors out{{"P", d}};
  return LinearConstraint(KrausChannel(ks, q, out), LabeledOperator(v.cast<Complex>().asDiagonal(), out));
}

namespace detail {

inline OptimizerConfig trial_config(const SuiteConfig& cfg, std::uint64_t salt, int trial) {
  OptimizerConfig oc;
  oc.restarts = 2;
  oc.seed = mix_seed(cfg.seed, salt * 1000003ULL + static_cast<std::uint64_t>(trial));
  return oc;
}

inline Rng trial_rng(const SuiteConfig& cfg, std::uint64_t salt, int trial) {
  return Rng(mix_seed(mix_seed(cfg.seed, salt), static_cast<std::uint64_t>(trial)));
}

}  // namespace detail

/// Runs every theorem check and the entropy and norm invariant suites. Deterministic given cfg.
inline SuiteReport run_suite(const SuiteConfig& cfg) {
  cfg.validate();
  SuiteReport rep;
  rep.config = cfg;
  const int n = cfg.trials;
  const int na = static_cast<int>(cfg.alphas.size());
  auto alpha_of = [&](int i) { return cfg.alphas[i % na]; };
  auto clock = std::chrono::steady_clock::now();
  auto push = [&](CheckRecord r) {
    auto t = std::chrono::steady_clock::now();
    r.seconds = std::chrono::duration<double>(t - clock).count();
    clock = t;
    rep.checks.push_back(std::move(r));
  };
  const int dq = cfg.dim("Q"), dr = cfg.dim("R"), ds = cfg.dim("S"), dt = cfg.dim("T"), de = cfg.dim("E");
  const Factors q{{"Q", dq}}, rs{{"R", dr}, {"S", ds}};

  // Chain rule and its saturation at ρ*_Q ⊗ ρ_T.
  std::vector<TrialOutcome> sat(n);
  push(make_record("chain_rule", cfg.tol, kInf, run_trials(n, cfg.jobs, [&](int i) {
    Rng rng = detail::trial_rng(cfg, 1, i);
    auto oc = detail::trial_config(cfg, 1, i);
    double a = alpha_of(i);
    KrausChannel phi = sample_channel(q, rs, i, rng);
    auto rho = ginibre_state({{"Q", dq}, {"T", dt}}, rng);
    auto moe = min_output_entropy(phi, {"R"}, a, oc);
    auto s = check_chain_rule(phi, {"R"}, rho.op(), a, oc, &moe);
    LabeledOperator prod = tensor(moe.witness, ginibre_state({{"T", dt}}, rng).op());
    auto z = check_chain_rule(phi, {"R"}, prod, a, oc, &moe);
    sat[i] = {z.slack, z.converged};
    return TrialOutcome{s.slack, s.converged};
  })));
  push(make_record("chain_rule_saturation", 1e-3, 1e-3, sat));

  push(make_record("chain_rule_cb", cfg.tol, kInf, run_trials(n, cfg.jobs, [&](int i) {
    Rng rng = detail::trial_rng(cfg, 2, i);
    auto oc = detail::trial_config(cfg, 2, i);
    KrausChannel phi = sample_channel(q, rs, i, rng);
    auto rho = ginibre_state({{"E", de}, {"Q", dq}, {"T", dt}}, rng);
    auto s = check_cb_chain_rule(phi, {"R"}, {"E"}, rho.op(), alpha_of(i), oc);
    return TrialOutcome{s.slack, s.converged};
  })));

  push(make_record("chain_rule_product", cfg.tol, kInf, run_trials(n, cfg.jobs, [&](int i) {
    Rng rng = detail::trial_rng(cfg, 3, i);
    auto oc = detail::trial_config(cfg, 3, i);
    KrausChannel phi1 = sample_channel({{"Q1", dq}}, {{"R", dr}}, i, rng);
    KrausChannel phi2 = sample_channel({{"Q2", dq}}, {{"S", ds}}, i + 1, rng);
    auto rho = ginibre_state({{"Q1", dq}, {"Q2", dq}, {"T", dt}}, rng);
    auto s = check_product_chain_rule(phi1, phi2, rho.op(), alpha_of(i), oc);
    return TrialOutcome{s.slack, s.converged};
  })));

  push(make_record("sequential_composition", cfg.tol, kInf, run_trials(n, cfg.jobs, [&](int i) {
    Rng rng = detail::trial_rng(cfg, 4, i);
    auto oc = detail::trial_config(cfg, 4, i);
    KrausChannel phi = sample_channel({{"Q1", dq}}, {{"R1", dr}, {"Q2", dq}, {"S1", ds}}, i, rng);
    KrausChannel psi = sample_channel({{"Q2", dq}}, {{"R2", dr}, {"S2", ds}}, i + 1, rng);
    auto s = check_sequential(phi, {"R1"}, psi, {"R2"}, alpha_of(i), oc);
    return TrialOutcome{s.slack, s.converged};
  })));

  // Check sizes relative to cfg.trials: 2/5 for the product-channel solves (every pair at every alpha),
  // 1/5 for the restricted products, twice for the cheap swap sampling.
  const int n_pairs = (2 * n + 4) / 5, n_restricted = (n + 4) / 5;
  push(make_record("multiplicativity", 1e-6, 1e-3, run_trials(n_pairs * na, cfg.jobs, [&](int k) {
    int i = k / na;
    Rng rng = detail::trial_rng(cfg, 5, i);
    auto oc = detail::trial_config(cfg, 5, k);
    KrausChannel phi1 = sample_channel({{"Q1", dq}}, {{"R1", dr}, {"S1", ds}}, i, rng);
    KrausChannel phi2 = sample_channel({{"Q2", dq}}, {{"R2", dr}, {"S2", ds}}, i + 1, rng);
    auto g = check_multiplicativity_1_1p(phi1, {"R1"}, phi2, {"R2"}, cfg.alphas[k % na], oc);
    return TrialOutcome{g.gap, g.converged};
  })));

  push(make_record("restricted_multiplicativity", cfg.tol, 1e-3, run_trials(n_restricted, cfg.jobs, [&](int i) {
    Rng rng = detail::trial_rng(cfg, 6, i);
    auto oc = detail::trial_config(cfg, 6, i);
    KrausChannel phi1 = sample_channel({{"Q1", dq}}, {{"R1", dr}, {"S1", ds}}, i, rng);
    KrausChannel phi2 = sample_channel({{"Q2", dq}}, {{"R2", dr}, {"S2", ds}}, i + 1, rng);
    auto c1 = random_pinching_constraint(phi1.in_factors(), rng);
    auto c2 = random_pinching_constraint(phi2.in_factors(), rng);
    auto g = check_restricted_multiplicativity(phi1, {"R1"}, c1, phi2, {"R2"}, c2, alpha_of(i), oc);
    return TrialOutcome{g.gap, g.converged};
  })));

  const Factors ba{{"B", cfg.dim("B")}, {"A", cfg.dim("A")}};
  const int db = ba[0].dim, da = ba[1].dim;

  // Signed worst of the two paths against the closed form.
  push(make_record("arimoto", 1e-8, 1e-8, run_trials(n, cfg.jobs, [&](int i) {
    Rng rng = detail::trial_rng(cfg, 7, i);
    auto p = classical_distribution(db * da, rng);
    RealVector v(db * da);
    for (int k = 0; k < v.size(); ++k) v(k) = p[k];
    double a = alpha_of(i);
    auto r = cond_renyi_up(LabeledOperator(v.cast<Complex>().asDiagonal(), ba), {"B"}, a,
                           detail::trial_config(cfg, 7, i));
    double ref = arimoto_entropy(p, db, da, a);
    double d1 = r.value - ref, d2 = r.norm_path_value - ref;
    return TrialOutcome{std::abs(d1) > std::abs(d2) ? d1 : d2, r.converged};
  })));

  push(make_record("norm_sigma_agreement", 1e-5, 1e-5, run_trials(n, cfg.jobs, [&](int i) {
    Rng rng = detail::trial_rng(cfg, 8, i);
    auto rho = ginibre_state(ba, rng);
    auto r = cond_renyi_up(rho.op(), {"B"}, alpha_of(i), detail::trial_config(cfg, 8, i));
    return TrialOutcome{r.value - r.norm_path_value, r.converged};
  })));

  push(make_record("von_neumann_limit", 5e-2, 5e-2, run_trials(n, cfg.jobs, [&](int i) {
    Rng rng = detail::trial_rng(cfg, 9, i);
    auto rho = ginibre_state(ba, rng);
    auto h = cond_entropy_norm(rho.op(), {"B"}, 1.001, detail::trial_config(cfg, 9, i));
    return TrialOutcome{h.value - von_neumann_conditional(rho.op(), {"B"}), h.converged};
  })));

  push(make_record("alpha_monotonicity", 1e-4, kInf, run_trials(n, cfg.jobs, [&](int i) {
    Rng rng = detail::trial_rng(cfg, 10, i);
    auto rho = ginibre_state(ba, rng);
    auto oc = detail::trial_config(cfg, 10, i);
    double worst = kInf, prev = kInf;
    bool conv = true;
    for (double a : {1.1, 1.5, 2.0, 3.0}) {
      auto h = cond_entropy_norm(rho.op(), {"B"}, a, oc);
      conv = conv && h.converged;
      if (std::isfinite(prev)) worst = std::min(worst, prev - h.value);
      prev = h.value;
    }
    return TrialOutcome{worst, conv};
  })));

  push(make_record("data_processing", 1e-6, kInf, run_trials(n, cfg.jobs, [&](int i) {
    Rng rng = detail::trial_rng(cfg, 11, i);
    Matrix rho = ginibre_state_matrix(dq, rng), sigma = ginibre_state_matrix(dq, rng);
    KrausChannel phi = sample_channel(q, {{"S", ds}}, i, rng);
    double a = alpha_of(i);
    double before = sandwiched_divergence(rho, sigma, a);
    double after = sandwiched_divergence(phi.apply(rho), phi.apply(sigma), a);
    return TrialOutcome{before - after, true};
  })));

  push(make_record("continuity_sandwich", 1e-6, kInf, run_trials(n, cfg.jobs, [&](int i) {
    Rng rng = detail::trial_rng(cfg, 12, i);
    int nx = 3;
    auto w = classical_distribution(nx, rng);
    std::vector<CqOutcome> os;
    std::map<std::string, double> table;
    for (int x = 0; x < nx; ++x) {
      os.push_back({std::to_string(x), w[x], LabeledOperator(ginibre_state_matrix(de * da, rng), {{"E", de}, {"A", da}})});
      table[std::to_string(x)] = uniform01(rng) - 0.5;
    }
    ClassicalQuantumState st("E", "A", os);
    WeightFunction f(table);
    double le = std::log2(eta_zero(f, da));
    double a = 1.0 + (0.1 + 0.8 * uniform01(rng)) / le;
    auto b = continuity_bound(st, f, a);
    auto h = f_weighted_entropy(st, f, a, detail::trial_config(cfg, 12, i));
    return TrialOutcome{std::min(h.value - b.lower, b.upper - h.value), h.converged};
  })));

  // Relative slack of ‖X‖_(B:q,A:p) ≤ ‖X‖_(A:p,B:q), both index pairs.
  push(make_record("swap_contraction", 1e-6, kInf, run_trials(2 * n, cfg.jobs, [&](int i) {
    Rng rng = detail::trial_rng(cfg, 13, i);
    LabeledOperator x(ginibre_matrix(db * da, db * da, rng), {{"A", db}, {"B", da}});
    auto oc = detail::trial_config(cfg, 13, i);
    double worst = kInf;
    for (auto [p, qq] : {std::pair{1.0, 2.0}, std::pair{1.5, 3.0}}) {
      auto s = check_swap_contraction(x, p, qq, oc);
      worst = std::min(worst, (s.rhs - s.lhs) / std::max(1.0, s.rhs));
    }
    return TrialOutcome{worst, true};
  })));

  push(make_record("positivity_sufficiency", 1e-4, 1e-4, run_trials(n_pairs, cfg.jobs, [&](int i) {
    Rng rng = detail::trial_rng(cfg, 14, i);
    auto oc = detail::trial_config(cfg, 14, i);
    KrausChannel phi = sample_channel(q, rs, i, rng);
    double a = alpha_of(i);
    auto psd = cb_norm_1_to_1p(phi, {"R"}, a, oc);
    auto gen = cb_norm_general_inputs(phi, {"R"}, a, oc, {psd.witness_psi});
    return TrialOutcome{gen.log_value - psd.log_value, psd.converged && gen.converged};
  })));

  return rep;
}

// ---------------------------------------------------------------- report

inline nlohmann::ordered_json json_number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline nlohmann::ordered_json to_json(const SuiteConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["trials"] = c.trials;
  nlohmann::ordered_json d = nlohmann::ordered_json::object();
  for (const char* role : {"Q", "R", "S", "T", "E", "A", "B"}) d[role] = c.dim(role);
  for (const auto& [k, v] : c.dims) d[k] = v;
  j["dims"] = d;
  j["alphas"] = c.alphas;
  j["tol"] = c.tol;
  j["jobs"] = c.jobs;
  return j;
}

inline nlohmann::ordered_json to_json(const SuiteReport& r) {
  nlohmann::ordered_json j;
  j["config"] = to_json(r.config);
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : r.checks) {
    nlohmann::ordered_json e;
    e["name"] = c.name;
    e["trials"] = c.trials;
    e["violations"] = c.violations;
    e["inconclusive"] = c.inconclusive;
    e["worst_slack"] = json_number(c.worst_slack);
    e["max_abs"] = json_number(c.max_abs);
    e["tol_low"] = json_number(c.tol_low);
    e["tol_high"] = json_number(c.tol_high);
    e["passed"] = c.passed();
    nlohmann::ordered_json vals = nlohmann::ordered_json::array();
    for (double v : c.values) vals.push_back(json_number(v));
    e["values"] = vals;
    checks.push_back(e);
  }
  j["checks"] = checks;
  j["passed"] = r.passed();
  return j;
}

}  // namespace rnl
