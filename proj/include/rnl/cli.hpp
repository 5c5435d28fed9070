#pragma once

#include "rnl/io.hpp"
#include "rnl/verify.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iomanip>

namespace rnl::cli {

using Json = nlohmann::ordered_json;

enum class Format { table, json, csv };

/// Bad flags, unreadable inputs, or inputs that violate an invariant.
class UsageError : public Error {
 public:
  using Error::Error;
};

inline std::uint64_t default_seed() {
  const char* env = std::getenv("RNL_SEED");
  if (!env || !*env) return 0;
  try {
    std::size_t used = 0;
    unsigned long long v = std::stoull(env, &used);
    if (used == std::string(env).size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError(std::string("RNL_SEED is not an unsigned integer: ") + env);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw UsageError(what + ": '" + s + "' is not a number");
  }
  if (used != s.size()) throw UsageError(what + ": '" + s + "' is not a number");
  return v;
}

/// "Q=2,R=3"
inline std::map<std::string, int> parse_dims(const std::string& s) {
  std::map<std::string, int> out;
  for (const auto& item : split(s, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--dims entry '" + item + "' is not role=dim");
    double v = parse_double(item.substr(eq + 1), "--dims");
    if (v != std::floor(v)) throw UsageError("--dims entry '" + item + "' is not an integer");
    out[item.substr(0, eq)] = static_cast<int>(v);
  }
  return out;
}

inline Json labels_json(const std::vector<std::string>& v) {
  Json j = Json::array();
  for (const auto& s : v) j.push_back(s);
  return j;
}

inline Json num(double x) { return json_number(x); }

// ---------------------------------------------------------------- rendering

inline std::string format_number(double x, Format f) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, f == Format::table ? "%.6g" : "%.17g", x);
  return buf;
}

inline std::string scalar_text(const Json& v, Format f) {
  if (v.is_number_float()) return format_number(v.get<double>(), f);
  if (v.is_number()) return v.dump();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_null()) return "null";
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (f == Format::csv && s.find_first_of(",\"\n") != std::string::npos) {
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  return s;
}

inline bool is_scalar(const Json& v) { return !v.is_object() && !v.is_array(); }

inline bool is_record_list(const Json& v) {
  if (!v.is_array() || v.empty()) return false;
  for (const auto& e : v)
    if (!e.is_object()) return false;
  return true;
}

inline void flatten(const Json& v, const std::string& key, std::vector<std::pair<std::string, Json>>& rows,
                    std::vector<std::pair<std::string, Json>>& tables) {
  if (is_scalar(v)) {
    rows.emplace_back(key, v);
  } else if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it)
      flatten(it.value(), key.empty() ? it.key() : key + "." + it.key(), rows, tables);
  } else if (is_record_list(v)) {
    tables.emplace_back(key, v);
  } else {
    for (std::size_t i = 0; i < v.size(); ++i) flatten(v[i], key + "." + std::to_string(i), rows, tables);
  }
}

inline void render_header(const Json& config, Format f, std::ostream& out) {
  for (auto it = config.begin(); it != config.end(); ++it) {
    const Json& v = it.value();
    std::string text;
    if (is_scalar(v)) {
      text = scalar_text(v, f == Format::table ? Format::table : Format::json);
    } else {
      text = v.dump();
    }
    out << "# " << it.key() << ": " << text << "\n";
  }
}

inline void render_records(const std::string& name, const Json& list, Format f, std::ostream& out) {
  std::vector<std::string> cols;
  for (const auto& rec : list)
    for (auto it = rec.begin(); it != rec.end(); ++it)
      if (is_scalar(it.value()) && std::find(cols.begin(), cols.end(), it.key()) == cols.end()) cols.push_back(it.key());
  std::vector<std::vector<std::string>> cells;
  for (const auto& rec : list) {
    std::vector<std::string> row;
    for (const auto& c : cols) row.push_back(rec.contains(c) ? scalar_text(rec[c], f) : "");
    cells.push_back(std::move(row));
  }
  if (f == Format::csv) {
    out << "\n# " << name << "\n";
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << "\n";
    for (const auto& row : cells) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
      out << "\n";
    }
    return;
  }
  std::vector<std::size_t> width(cols.size());
  for (std::size_t i = 0; i < cols.size(); ++i) {
    width[i] = cols[i].size();
    for (const auto& row : cells) width[i] = std::max(width[i], row[i].size());
  }
  out << "\n" << name << "\n";
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "  " : "") << std::left << std::setw(int(width[i])) << cols[i];
  out << "\n";
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "  " : "") << std::left << std::setw(int(width[i])) << row[i];
    out << "\n";
  }
}

/// doc = {"config": {...}, "result": {...}}
inline void render(const Json& doc, Format f, std::ostream& out) {
  if (f == Format::json) {
    out << doc.dump(2) << "\n";
    return;
  }
  render_header(doc["config"], f, out);
  std::vector<std::pair<std::string, Json>> rows, tables;
  flatten(doc["result"], "", rows, tables);
  if (f == Format::csv) {
    out << "key,value\n";
    for (const auto& [k, v] : rows) out << k << "," << scalar_text(v, f) << "\n";
  } else {
    std::size_t w = 0;
    for (const auto& r : rows) w = std::max(w, r.first.size());
    for (const auto& [k, v] : rows) out << std::left << std::setw(int(w)) << k << "  " << scalar_text(v, f) << "\n";
  }
  for (const auto& [k, v] : tables) render_records(k, v, f, out);
}

// ---------------------------------------------------------------- commands

struct Options {
  std::string format = "table";
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out_path;

  // norm
  std::string op_path, profile;
  // entropy
  std::string state_path, kind = "cond-renyi", cond, f_path;
  double alpha = 2.0;
  // channel-norm
  std::string channel_path, norm_kind = "cb", constraint_path;
  // verify
  int trials = 50;
  std::string alphas = "1.5,2,3", dims;
  double tol = 1e-4;
  // qkd
  std::string schedule_path, round_path;
  std::optional<double> ec_error;
  int probes = 20;
  int n = 2;
  double eps = 1e-2;
  int samples = 1;
  std::optional<double> sim_alpha;
  bool exact = false;
};

inline OptimizerConfig optimizer(const Options& o) {
  OptimizerConfig c;
  c.seed = o.seed;
  c.jobs = o.jobs;
  return c;
}

inline Json base_config(const std::string& command, const Options& o) {
  Json c;
  c["command"] = command;
  c["seed"] = o.seed;
  c["jobs"] = o.jobs;
  c["format"] = o.format;
  if (!o.out_path.empty()) c["out"] = o.out_path;
  return c;
}

/// Loads inputs; any failure here is a usage error.
template <class F>
auto load(F&& f) {
  try {
    return f();
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

inline std::vector<std::string> cond_labels(const Options& o) { return split(o.cond, ','); }

inline Json run_norm(const Options& o, Json& config) {
  config["op"] = o.op_path;
  config["profile"] = o.profile;
  auto x = load([&] { return io::load_operator(o.op_path); });
  auto prof = load([&] { return IndexProfile::parse(o.profile); });
  auto r = norm_multi_index(x, prof, optimizer(o));
  Json res;
  res["value"] = num(r.value);
  res["log2_value"] = num(r.log2_value);
  res["bound"] = to_string(r.bound);
  res["converged"] = r.converged;
  res["iterations"] = r.iterations;
  return res;
}

inline Json run_entropy(const Options& o, Json& config) {
  config["state"] = o.state_path;
  config["kind"] = o.kind;
  Json res;
  if (o.kind == "cond-renyi" || o.kind == "vn") {
    config["cond"] = labels_json(cond_labels(o));
    if (o.kind == "cond-renyi") config["alpha"] = num(o.alpha);
    auto rho = load([&] { return io::load_state(o.state_path); });
    auto cond = cond_labels(o);
    load([&] {
      for (const auto& l : cond)
        if (rho.op().index_of(l) < 0) throw LabelError("state has no factor '" + l + "'");
      return 0;
    });
    if (o.kind == "vn") {
      res["value"] = num(von_neumann_conditional(rho.op(), cond));
      return res;
    }
    if (!(o.alpha > 1.0)) throw UsageError("--alpha must exceed 1");
    auto r = cond_renyi_up(rho.op(), cond, o.alpha, optimizer(o));
    res["value"] = num(r.value);
    res["norm_path_value"] = num(r.norm_path_value);
    res["path_gap"] = num(r.path_gap);
    res["converged"] = r.converged;
    return res;
  }
  if (o.kind == "f-weighted") {
    config["f"] = o.f_path;
    config["alpha"] = num(o.alpha);
    if (o.f_path.empty()) throw UsageError("--f is required for f-weighted entropy");
    auto state = load([&] { return io::load_cq_state(o.state_path); });
    auto f = load([&] { return io::load_weights(o.f_path); });
    load([&] {
      for (const auto& x : state.outcomes()) f(x.x);
      return 0;
    });
    if (!(o.alpha > 1.0)) throw UsageError("--alpha must exceed 1");
    auto r = f_weighted_entropy(state, f, o.alpha, optimizer(o));
    auto b = continuity_bound(state, f, o.alpha);
    res["value"] = num(r.value);
    res["converged"] = r.converged;
    res["eta0"] = num(b.eta0);
    res["continuity_lower"] = num(b.lower);
    res["continuity_upper"] = num(b.upper);
    res["alpha_admissible"] = b.alpha_ok;
    return res;
  }
  throw UsageError("--kind must be cond-renyi, vn or f-weighted");
}

inline Json run_channel_norm(const Options& o, Json& config) {
  config["channel"] = o.channel_path;
  config["kind"] = o.norm_kind;
  config["alpha"] = num(o.alpha);
  config["cond"] = labels_json(cond_labels(o));
  if (o.norm_kind == "restricted") config["constraint"] = o.constraint_path;
  if (!(o.alpha > 1.0)) throw UsageError("--alpha must exceed 1");
  auto phi = load([&] { return io::load_channel(o.channel_path); });
  auto cond = cond_labels(o);
  load([&] {
    for (const auto& l : cond) {
      bool found = false;
      for (const auto& f : phi.out_factors()) found = found || f.label == l;
      if (!found) throw LabelError("channel has no output factor '" + l + "'");
    }
    return 0;
  });
  ChannelNormResult r;
  if (o.norm_kind == "plain") {
    r = min_output_entropy(phi, cond, o.alpha, optimizer(o));
  } else if (o.norm_kind == "cb") {
    r = cb_norm_1_to_1p(phi, cond, o.alpha, optimizer(o));
  } else if (o.norm_kind == "restricted") {
    if (o.constraint_path.empty()) throw UsageError("--constraint is required for restricted norms");
    auto c = load([&] { return io::load_constraint(o.constraint_path); });
    if (c.n_map.in_dim() != phi.in_dim()) throw UsageError("constraint map input does not match the channel input");
    r = restricted_cb_norm(phi, cond, o.alpha, c, optimizer(o));
  } else {
    throw UsageError("--kind must be plain, cb or restricted");
  }
  Json res;
  res["entropy"] = num(r.log_value);
  res["norm"] = num(std::exp2((1.0 - o.alpha) / o.alpha * r.log_value));
  res["converged"] = r.converged;
  if (o.norm_kind == "restricted") res["constraint_violation"] = num(r.constraint_violation);
  return res;
}

inline Json run_verify(const Options& o, Json& config, std::ostream& err, bool& passed) {
  SuiteConfig sc;
  sc.seed = o.seed;
  sc.trials = o.trials;
  sc.tol = o.tol;
  sc.jobs = o.jobs;
  sc.alphas.clear();
  for (const auto& a : split(o.alphas, ',')) sc.alphas.push_back(parse_double(a, "--alphas"));
  sc.dims = parse_dims(o.dims);
  load([&] {
    sc.validate();
    return 0;
  });
  config["trials"] = sc.trials;
  config["alphas"] = sc.alphas;
  config["tol"] = num(sc.tol);
  Json dims;
  for (const char* r : {"Q", "R", "S", "T", "E", "A", "B"}) dims[r] = sc.dim(r);
  config["dims"] = dims;
  auto report = run_suite(sc);
  for (const auto& c : report.checks)
    err << std::left << std::setw(28) << c.name << std::fixed << std::setprecision(2) << c.seconds << " s\n"
        << std::defaultfloat;
  passed = report.passed();
  return to_json(report);
}

inline Json rate_json(const std::vector<ScheduleEntry>& s, const RateBreakdown& r) {
  Json res;
  Json rounds = Json::array();
  auto w = normalized_weights(s);
  for (std::size_t i = 0; i < s.size(); ++i) {
    Json e;
    e["name"] = s[i].round.name;
    if (s[i].round.error_rate) e["error_rate"] = num(*s[i].round.error_rate);
    e["weight"] = num(w[i]);
    e["h"] = num(r.h_values[i]);
    rounds.push_back(e);
  }
  res["r_ad"] = num(r.r_ad);
  res["r_na"] = num(r.r_na);
  res["ec_error"] = num(r.ec_error);
  res["ec_cost"] = num(r.ec_cost);
  res["sk_adaptive"] = num(r.sk_adaptive);
  res["sk_static"] = num(r.sk_static);
  res["improvement"] = num(r.improvement);
  res["converged"] = r.converged;
  char buf[128];
  std::snprintf(buf, sizeof buf, "adaptive %.3f, static %.3f, improvement %.1f%%", r.sk_adaptive, r.sk_static,
                100.0 * r.improvement);
  res["summary"] = buf;
  res["rounds"] = rounds;
  return res;
}

inline Json run_qkd_rate(const Options& o, Json& config) {
  config["schedule"] = o.schedule_path;
  if (o.ec_error) config["ec_error"] = num(*o.ec_error);
  if (o.ec_error && !(*o.ec_error >= 0.0 && *o.ec_error <= 0.5)) throw UsageError("--ec-error must lie in [0, 1/2]");
  auto s = load([&] { return io::load_schedule(o.schedule_path); });
  return rate_json(s, asymptotic_rates(s, o.ec_error, optimizer(o)));
}

inline Json hyperplane_json(const ProtocolRound& r, const HyperplaneResult& h) {
  Json res;
  res["h_honest"] = num(h.h_honest);
  res["tangency_gap"] = num(h.tangency_gap);
  res["worst_probe_gap"] = num(h.worst_probe_gap);
  res["probes"] = h.probes;
  Json f = Json::array();
  for (const auto& x : r.x_labels) f.push_back(Json{{"x", x}, {"f", num(h.f(x))}});
  res["f"] = f;
  return res;
}

inline Json run_qkd_hyperplane(const Options& o, Json& config) {
  config["round"] = o.round_path;
  config["probes"] = o.probes;
  if (o.probes < 0) throw UsageError("--probes must be non-negative");
  auto r = load([&] {
    auto round = io::load_round(o.round_path);
    round.require_strictly_positive();
    return round;
  });
  return hyperplane_json(r, supporting_hyperplane(r, r.honest_distribution(), optimizer(o), o.probes));
}

inline Json run_qkd_simulate(const Options& o, Json& config) {
  config["schedule"] = o.schedule_path;
  config["n"] = o.n;
  config["eps"] = num(o.eps);
  config["samples"] = o.samples;
  if (o.sim_alpha) config["alpha"] = num(*o.sim_alpha);
  config["exact"] = o.exact;
  if (o.n < 1) throw UsageError("--n must be positive");
  if (o.samples < 1) throw UsageError("--samples must be positive");
  if (!(o.eps > 0.0 && o.eps < 1.0)) throw UsageError("--eps must lie in (0, 1)");
  if (o.sim_alpha && !(*o.sim_alpha > 1.0)) throw UsageError("--alpha must exceed 1");
  auto s = load([&] { return io::load_schedule(o.schedule_path); });
  for (auto& e : s)
    if (!e.round.f) e.round.f = supporting_hyperplane(e.round, e.round.honest_distribution(), optimizer(o), 0).f;
  auto r = simulate_protocol(s, o.n, o.seed, o.eps, o.samples, o.sim_alpha, o.exact);
  Json res;
  res["alpha"] = num(r.alpha);
  res["delta"] = num(r.delta);
  res["empirical_rate"] = num(r.empirical_rate);
  Json runs = Json::array();
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    std::string xs;
    for (const auto& x : r.samples[i]) xs += (xs.empty() ? "" : " ") + x;
    runs.push_back(Json{{"sample", i}, {"key_length", r.key_lengths[i]}, {"announcements", xs}});
  }
  if (r.security) {
    res["epsilon"] = num(r.security->epsilon);
    res["epsilon_bound"] = num(r.security->bound);
    res["f_weighted_entropy"] = num(r.security->f_weighted_entropy);
    res["security_alpha"] = num(r.security->alpha);
  }
  res["samples"] = runs;
  return res;
}

/// Parses argv, runs one subcommand, and writes the report to `out`. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Numerical toolkit for Rényi entropies, Schatten norms of channels, and adaptive QKD rates", "rnl"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  try {
    o.seed = default_seed();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  app.add_option("--format", o.format, "Report format")->check(CLI::IsMember({"table", "json", "csv"}));
  app.add_option("--seed", o.seed, "Random seed (default from RNL_SEED, else 0)");
  app.add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", o.out_path, "Also write the JSON report to this file");

  auto* norm = app.add_subcommand("norm", "Multi-index Schatten norm of an operator");
  norm->fallthrough();
  norm->add_option("--op", o.op_path, "Operator JSON file")->required();
  norm->add_option("--profile", o.profile, "Index profile, e.g. \"A:1,B:2,C:inf\"")->required();

  auto* entropy = app.add_subcommand("entropy", "Conditional entropies of a state");
  entropy->fallthrough();
  entropy->add_option("--state", o.state_path, "State JSON file (cq-state for f-weighted)")->required();
  entropy->add_option("--kind", o.kind, "cond-renyi, vn or f-weighted")
      ->check(CLI::IsMember({"cond-renyi", "vn", "f-weighted"}));
  entropy->add_option("--alpha", o.alpha, "Rényi order, > 1");
  entropy->add_option("--cond", o.cond, "Comma-separated conditioning labels");
  entropy->add_option("--f", o.f_path, "Weight function JSON file");

  auto* cn = app.add_subcommand("channel-norm", "Output entropy and (1 → 1,α) norms of a channel");
  cn->fallthrough();
  cn->add_option("--channel", o.channel_path, "Channel JSON file")->required();
  cn->add_option("--alpha", o.alpha, "Rényi order, > 1");
  cn->add_option("--kind", o.norm_kind, "plain, cb or restricted")->check(CLI::IsMember({"plain", "cb", "restricted"}));
  cn->add_option("--constraint", o.constraint_path, "Constraint JSON file for restricted norms");
  cn->add_option("--cond", o.cond, "Comma-separated conditioning output labels");

  auto* verify = app.add_subcommand("verify", "Randomized checks of the entropy inequalities");
  verify->fallthrough();
  verify->add_option("--trials", o.trials, "Trials per check");
  verify->add_option("--alphas", o.alphas, "Comma-separated Rényi orders");
  verify->add_option("--tol", o.tol, "Slack tolerance in bits");
  verify->add_option("--dims", o.dims, "Role dimensions, e.g. \"Q=2,R=3\"");

  auto* qkd = app.add_subcommand("qkd", "Adaptive QKD key rates");
  qkd->fallthrough();
  qkd->require_subcommand(1);
  auto* rate = qkd->add_subcommand("rate", "Asymptotic adaptive and static key rates");
  rate->fallthrough();
  rate->add_option("--schedule", o.schedule_path, "Schedule JSON file")->required();
  rate->add_option("--ec-error", o.ec_error, "Error-correction error rate (default: weighted mean)");
  auto* hyper = qkd->add_subcommand("hyperplane", "Supporting hyperplane weights at the honest statistics");
  hyper->fallthrough();
  hyper->add_option("--round", o.round_path, "Round JSON file")->required();
  hyper->add_option("--probes", o.probes, "Random feasible probes");
  auto* sim = qkd->add_subcommand("simulate", "Sample honest runs and the key length map");
  sim->fallthrough();
  sim->add_option("--schedule", o.schedule_path, "Schedule JSON file")->required();
  sim->add_option("--n", o.n, "Rounds");
  sim->add_option("--eps", o.eps, "Security parameter");
  sim->add_option("--samples", o.samples, "Sampled runs");
  sim->add_option("--alpha", o.sim_alpha, "Rényi order (default from n and the weights)");
  sim->add_flag("--exact", o.exact, "Compute the exact security level");

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  Format fmt = o.format == "json" ? Format::json : o.format == "csv" ? Format::csv : Format::table;
  std::string command;
  bool passed = true;
  Json doc;
  try {
    Json config;
    Json result;
    if (norm->parsed()) {
      config = base_config(command = "norm", o);
      result = run_norm(o, config);
    } else if (entropy->parsed()) {
      config = base_config(command = "entropy", o);
      result = run_entropy(o, config);
    } else if (cn->parsed()) {
      config = base_config(command = "channel-norm", o);
      result = run_channel_norm(o, config);
    } else if (verify->parsed()) {
      config = base_config(command = "verify", o);
      result = run_verify(o, config, err, passed);
    } else if (rate->parsed()) {
      config = base_config(command = "qkd rate", o);
      result = run_qkd_rate(o, config);
    } else if (hyper->parsed()) {
      config = base_config(command = "qkd hyperplane", o);
      result = run_qkd_hyperplane(o, config);
    } else {
      config = base_config(command = "qkd simulate", o);
      result = run_qkd_simulate(o, config);
    }
    doc["config"] = config;
    doc["result"] = result;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << command << ": " << e.what() << "\n";
    return 1;
  }

  render(doc, fmt, out);
  if (!o.out_path.empty()) {
    try {
      io::write_json(o.out_path, doc);
    } catch (const IoError& e) {
      err << "error: " << e.what() << "\n";
      return 2;
    }
  }
  return passed ? 0 : 1;
}

}  // namespace rnl::cli
