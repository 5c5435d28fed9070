#include <glog/logging.h>
#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "rnl/io.hpp"
#include "rnl/verify.hpp"

using namespace rnl;
using Json = nlohmann::ordered_json;

namespace {

const std::string kCli = RNL_CLI_PATH;
const std::string kFixtures = RNL_FIXTURE_DIR;

struct Captured {
  int code = -1;
  std::string out;
  double seconds = 0.0;
};

Captured capture(const std::string& args) {
  Captured c;
  auto t0 = std::chrono::steady_clock::now();
  FILE* p = popen((kCli + " " + args + " 2>/dev/null").c_str(), "r");
  if (!p) return c;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) c.out.append(buf, n);
  int status = pclose(p);
  c.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return c;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

int failures = 0;

void report(int id, bool ok, const std::string& title, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " " << id << " " << title << ": " << detail << std::endl;
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double as_double(const Json& v) {
  if (v.is_number()) return v.get<double>();
  return std::numeric_limits<double>::quiet_NaN();
}

/// Every value of a check lies in [lo, hi]; returns the check's range and trial count.
struct Range {
  bool ok = false;
  int trials = 0;
  double min = kInf, max = -kInf, max_abs = 0.0;
};

Range range_of(const Json& checks, const std::string& name, double lo, double hi, int min_trials) {
  Range r;
  for (const auto& c : checks) {
    if (c["name"] != name) continue;
    r.trials = c["trials"].get<int>();
    r.ok = r.trials >= min_trials;
    for (const auto& v : c["values"]) {
      double x = as_double(v);
      if (!std::isfinite(x)) {
        r.ok = false;
        continue;
      }
      r.min = std::min(r.min, x);
      r.max = std::max(r.max, x);
      r.max_abs = std::max(r.max_abs, std::abs(x));
      if (x < lo || x > hi) r.ok = false;
    }
    return r;
  }
  return r;
}

std::string describe(const std::string& name, const Range& r) {
  return name + " n=" + std::to_string(r.trials) + fmt(" min=%.3g max=%.3g", r.min, r.max);
}

void criterion_bb84() {
  auto c = capture("--format json qkd rate --schedule " + kFixtures + "/bb84_paper.json");
  if (c.code != 0) {
    report(1, false, "BB84 worked example", "rnl qkd rate exited with " + std::to_string(c.code));
    return;
  }
  auto j = Json::parse(c.out)["result"];
  double ad = j["sk_adaptive"], st = j["sk_static"], imp = j["improvement"];
  bool ok = std::abs(ad - 0.329) <= 5e-3 && std::abs(st - 0.291) <= 5e-3 && std::abs(imp - 0.13) <= 1e-2 &&
            c.seconds < 300;
  report(1, ok, "BB84 worked example",
         fmt("sk_adaptive=%.4f sk_static=%.4f improvement=%.2f%% in %.1f s", ad, st, 100 * imp, c.seconds));
}

void criterion_key_rate() {
  bool ok = true;
  std::string detail;
  for (double p : {0.01, 0.05, 0.1, 0.25}) {
    double h = key_rate_h(build_bb84_round(p)).value;
    double closed = 1.0 - (-p * std::log2(p) - (1 - p) * std::log2(1 - p));
    ok = ok && std::abs(h - closed) <= 1e-2;
    detail += fmt("p=%.2f: %.5f vs %.5f; ", p, h, closed);
  }
  report(2, ok, "BB84 key rate vs 1 - h(p)", detail);
}

void criterion_multiplicativity(const Json& checks) {
  auto r = range_of(checks, "multiplicativity", -1e-6, 1e-3, 60);
  report(3, r.ok, "multiplicativity of cb entropies", describe("gap", r));
}

void criterion_chain_rules(const Json& checks) {
  bool ok = true;
  std::string detail;
  for (const char* name : {"chain_rule", "chain_rule_cb", "chain_rule_product", "sequential_composition"}) {
    auto r = range_of(checks, name, -1e-4, kInf, 50);
    ok = ok && r.ok;
    detail += describe(name, r) + "; ";
  }
  auto s = range_of(checks, "chain_rule_saturation", -1e-3, 1e-3, 1);
  report(4, ok && s.ok, "chain rules", detail + describe("saturation", s));
}

void criterion_dictionary(const Json& checks) {
  auto a = range_of(checks, "arimoto", -1e-8, 1e-8, 50);
  auto n = range_of(checks, "norm_sigma_agreement", -1e-5, 1e-5, 50);
  report(5, a.ok && n.ok, "entropy dictionary", describe("arimoto", a) + "; " + describe("norm_vs_sigma", n));
}

void criterion_limits(const Json& checks) {
  auto v = range_of(checks, "von_neumann_limit", -5e-2, 5e-2, 50);
  auto m = range_of(checks, "alpha_monotonicity", -1e-4, kInf, 50);
  auto d = range_of(checks, "data_processing", -1e-6, kInf, 50);
  report(6, v.ok && m.ok && d.ok, "limits and monotonicity",
         describe("vn_limit", v) + "; " + describe("monotonicity", m) + "; " + describe("data_processing", d));
}

void criterion_continuity(const Json& checks) {
  auto r = range_of(checks, "continuity_sandwich", -1e-6, kInf, 50);
  // η₀ = |A| (2^{max f} + 2^{-min f}) + 1 evaluated by hand.
  double e1 = eta_zero(WeightFunction({{"a", 0.0}, {"b", 1.0}}), 2);
  double e2 = eta_zero(WeightFunction({{"a", -1.0}, {"b", 2.0}, {"c", 0.5}}), 3);
  double e3 = eta_zero(WeightFunction({{"a", 0.0}}), 4);
  bool exact = e1 == 7.0 && e2 == 19.0 && e3 == 9.0;
  report(7, r.ok && exact, "continuity sandwich", describe("sandwich", r) + fmt("; eta0 = %g, %g, %g", e1, e2, e3));
}

void criterion_swap(const Json& checks) {
  auto r = range_of(checks, "swap_contraction", -1e-6, kInf, 100);
  report(8, r.ok, "swap contraction", describe("relative slack", r));
}

void criterion_positivity(const Json& checks) {
  auto r = range_of(checks, "positivity_sufficiency", -1e-4, 1e-4, 20);
  report(9, r.ok, "positivity sufficiency", describe("general - psd", r));
}

void criterion_security() {
  auto r = build_bb84_round(0.05);
  std::vector<ProtocolRound> rounds(2, r);
  Matrix rho = kron(r.honest_input.matrix(), r.honest_input.matrix());
  auto rep = exact_security(rounds, rho, [](const std::vector<std::string>&) { return 1LL; });

  // A is always 0, so a one-bit key is constant.
  ProtocolRound c;
  c.name = "constant";
  std::vector<Matrix> ks;
  for (int j = 0; j < 2; ++j) {
    Matrix k = Matrix::Zero(2, 2);
    k(0, j) = 1.0;
    ks.push_back(k);
  }
  c.m_map = KrausChannel(ks, {{"Q", 2}}, {{"X", 1}, {"A", 2}});
  c.x_labels = {"none"};
  c.constraint = LinearConstraint::trivial({{"Q", 2}});
  c.honest_input = DensityOperator(LabeledOperator(Matrix::Identity(2, 2) / 2.0, {{"Q", 2}}));
  c.validate();
  std::vector<ProtocolRound> crounds(2, c);
  Matrix crho = kron(c.honest_input.matrix(), c.honest_input.matrix());
  auto det = exact_security(crounds, crho, [](const std::vector<std::string>&) { return 1LL; });
  bool ok = rep.epsilon <= rep.bound && det.epsilon == 0.5;
  report(10, ok, "toy security",
         fmt("epsilon=%.6g bound=%.6g; deterministic key epsilon=%.17g", rep.epsilon, rep.bound, det.epsilon));
}

}  // namespace

int main() {
  FLAGS_minloglevel = google::GLOG_ERROR;
  criterion_bb84();
  criterion_key_rate();

  auto dir = std::filesystem::temp_directory_path() / "rnl_acceptance";
  std::filesystem::create_directories(dir);
  // Both runs write the same path, so the echoed configuration matches too.
  auto path = (dir / "report.json").string();
  std::filesystem::remove(path);
  auto first = capture("--format json verify --seed 7 --trials 50 --out " + path);
  Json report1;
  std::string bytes1 = slurp(path);
  try {
    report1 = io::read_json(path);
  } catch (const std::exception& e) {
    std::cout << "report unreadable: " << e.what() << std::endl;
  }
  std::filesystem::remove(path);
  auto second = capture("--format json verify --seed 7 --trials 50 --out " + path);
  std::string bytes2 = slurp(path);
  Json checks = report1.is_object() ? report1["result"]["checks"] : Json::array();

  criterion_multiplicativity(checks);
  criterion_chain_rules(checks);
  criterion_dictionary(checks);
  criterion_limits(checks);
  criterion_continuity(checks);
  criterion_swap(checks);
  criterion_positivity(checks);
  criterion_security();

  bool same = !first.out.empty() && first.out == second.out;
  bool files_same = !bytes1.empty() && bytes1 == bytes2;
  report(11, same && files_same && first.seconds < 600 && first.code == 0 && second.code == 0, "determinism",
         fmt("identical=%g exit=%g,%g runtime=%.1f s", same && files_same, first.code, second.code, first.seconds));
  return failures == 0 ? 0 : 1;
}
