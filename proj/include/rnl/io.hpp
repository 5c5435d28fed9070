#pragma once

#include "rnl/qkd.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace rnl {

/// Malformed or invalid input file; the message names the file and the location.
class IoError : public Error {
 public:
  using Error::Error;
};

namespace io {

using Json = nlohmann::ordered_json;

inline Json parse_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw IoError(source + ": " + e.what());
  }
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path);
}

inline void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot write file");
  out << j.dump(2) << "\n";
}

namespace detail {

inline std::string at(const std::string& where, const std::string& key) { return where + "/" + key; }

inline const Json& need(const Json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) throw IoError(where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw IoError(where + ": missing field '" + key + "'");
  return *it;
}

inline double number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw IoError(where + ": expected a number");
  return j.get<double>();
}

inline int positive_int(const Json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 1) throw IoError(where + ": expected a positive integer");
  return j.get<int>();
}

inline RealMatrix real_rows(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw IoError(where + ": expected a non-empty array of rows");
  int rows = static_cast<int>(j.size());
  int cols = -1;
  RealMatrix m;
  for (int r = 0; r < rows; ++r) {
    const Json& row = j[r];
    std::string w = where + "/" + std::to_string(r);
    if (!row.is_array()) throw IoError(w + ": expected a row array");
    if (cols < 0) {
      cols = static_cast<int>(row.size());
      m.resize(rows, cols);
    }
    if (static_cast<int>(row.size()) != cols) throw IoError(w + ": ragged row");
    for (int c = 0; c < cols; ++c) m(r, c) = number(row[c], w + "/" + std::to_string(c));
  }
  return m;
}

/// {"re": rows, "im": rows}; "im" may be omitted.
inline Matrix complex_matrix(const Json& j, const std::string& where) {
  RealMatrix re = real_rows(need(j, "re", where), at(where, "re"));
  Matrix m = re.cast<Complex>();
  if (j.contains("im")) {
    RealMatrix im = real_rows(j["im"], at(where, "im"));
    if (im.rows() != re.rows() || im.cols() != re.cols()) throw IoError(at(where, "im") + ": shape differs from re");
    m.imag() = im;
  }
  return m;
}

inline Json rows_json(const RealMatrix& m) {
  Json rows = Json::array();
  for (int r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline Json complex_json(const Matrix& m) {
  Json j;
  j["re"] = rows_json(m.real());
  j["im"] = rows_json(m.imag());
  return j;
}

/// [["Q", 2], ...] or [{"label": "Q", "dim": 2}, ...].
inline Factors factors(const Json& j, const std::string& where) {
  if (!j.is_array()) throw IoError(where + ": expected an array of factors");
  Factors fs;
  for (std::size_t i = 0; i < j.size(); ++i) {
    std::string w = where + "/" + std::to_string(i);
    const Json& f = j[i];
    if (f.is_array() && f.size() == 2 && f[0].is_string()) {
      fs.push_back({f[0].get<std::string>(), positive_int(f[1], w + "/1")});
    } else if (f.is_object()) {
      const Json& l = need(f, "label", w);
      if (!l.is_string()) throw IoError(w + "/label: expected a string");
      fs.push_back({l.get<std::string>(), positive_int(need(f, "dim", w), w + "/dim")});
    } else {
      throw IoError(w + ": expected [label, dim]");
    }
  }
  return fs;
}

inline Json factors_json(const Factors& fs) {
  Json j = Json::array();
  for (const auto& f : fs) j.push_back(Json::array({f.label, f.dim}));
  return j;
}

/// Runs a domain constructor, reporting its invariant failure at `where`.
template <class F>
auto checked(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw IoError(where + ": " + e.what());
  }
}

}  // namespace detail

// ---------------------------------------------------------------- operators

inline LabeledOperator operator_from_json(const Json& j, const std::string& where = "") {
  Factors fs = detail::factors(detail::need(j, "factors", where), detail::at(where, "factors"));
  Matrix m = detail::complex_matrix(j, where);
  return detail::checked(where, [&] { return LabeledOperator(std::move(m), fs); });
}

inline Json to_json(const LabeledOperator& op) {
  Json j;
  j["factors"] = detail::factors_json(op.factors());
  Json c = detail::complex_json(op.matrix());
  j["re"] = c["re"];
  j["im"] = c["im"];
  return j;
}

inline LabeledOperator load_operator(const std::string& path) { return operator_from_json(read_json(path), path + ":"); }

inline DensityOperator load_state(const std::string& path) {
  LabeledOperator op = load_operator(path);
  return detail::checked(path + ":", [&] { return DensityOperator(op); });
}

inline void save_operator(const std::string& path, const LabeledOperator& op) { write_json(path, to_json(op)); }

// ---------------------------------------------------------------- channels

inline KrausChannel channel_from_json(const Json& j, const std::string& where = "") {
  Factors in = detail::factors(detail::need(j, "in_factors", where), detail::at(where, "in_factors"));
  Factors out = detail::factors(detail::need(j, "out_factors", where), detail::at(where, "out_factors"));
  const Json& ks = detail::need(j, "kraus", where);
  if (!ks.is_array() || ks.empty()) throw IoError(detail::at(where, "kraus") + ": expected a non-empty array");
  std::vector<Matrix> kraus;
  for (std::size_t i = 0; i < ks.size(); ++i)
    kraus.push_back(detail::complex_matrix(ks[i], detail::at(where, "kraus/" + std::to_string(i))));
  bool tp = true;
  if (j.contains("tp")) {
    if (!j["tp"].is_boolean()) throw IoError(detail::at(where, "tp") + ": expected a boolean");
    tp = j["tp"].get<bool>();
  }
  return detail::checked(where, [&] { return KrausChannel(std::move(kraus), in, out, tp); });
}

inline Json to_json(const KrausChannel& phi) {
  Json j;
  j["in_factors"] = detail::factors_json(phi.in_factors());
  j["out_factors"] = detail::factors_json(phi.out_factors());
  Json ks = Json::array();
  for (const auto& k : phi.kraus()) ks.push_back(detail::complex_json(k));
  j["kraus"] = ks;
  j["tp"] = phi.trace_preserving();
  return j;
}

inline KrausChannel load_channel(const std::string& path) { return channel_from_json(read_json(path), path + ":"); }

inline void save_channel(const std::string& path, const KrausChannel& phi) { write_json(path, to_json(phi)); }

/// {"map": channel, "tau": operator}.
inline LinearConstraint constraint_from_json(const Json& j, const std::string& where = "") {
  KrausChannel n = channel_from_json(detail::need(j, "map", where), detail::at(where, "map"));
  LabeledOperator tau = operator_from_json(detail::need(j, "tau", where), detail::at(where, "tau"));
  return detail::checked(where, [&] { return LinearConstraint(n, tau); });
}

inline LinearConstraint load_constraint(const std::string& path) {
  return constraint_from_json(read_json(path), path + ":");
}

// ---------------------------------------------------------------- entropies

/// {"label": value, ...}
inline WeightFunction weights_from_json(const Json& j, const std::string& where = "") {
  if (!j.is_object()) throw IoError(where + ": expected an object of weights");
  std::map<std::string, double> t;
  for (auto it = j.begin(); it != j.end(); ++it) t[it.key()] = detail::number(it.value(), detail::at(where, it.key()));
  return detail::checked(where, [&] { return WeightFunction(t); });
}

inline WeightFunction load_weights(const std::string& path) { return weights_from_json(read_json(path), path + ":"); }

/// {"e_label": "E", "a_label": "A", "outcomes": [{"x": "0", "weight": 0.5, "block": operator}, ...]}
inline ClassicalQuantumState cq_from_json(const Json& j, const std::string& where = "") {
  auto str = [&](const char* key) {
    const Json& v = detail::need(j, key, where);
    if (!v.is_string()) throw IoError(detail::at(where, key) + ": expected a string");
    return v.get<std::string>();
  };
  std::string e = j.contains("e_label") ? str("e_label") : std::string();
  std::string a = str("a_label");
  const Json& os = detail::need(j, "outcomes", where);
  if (!os.is_array()) throw IoError(detail::at(where, "outcomes") + ": expected an array");
  std::vector<CqOutcome> out;
  for (std::size_t i = 0; i < os.size(); ++i) {
    std::string w = detail::at(where, "outcomes/" + std::to_string(i));
    const Json& x = detail::need(os[i], "x", w);
    if (!x.is_string()) throw IoError(w + "/x: expected a string");
    double weight = detail::number(detail::need(os[i], "weight", w), w + "/weight");
    out.push_back({x.get<std::string>(), weight, operator_from_json(detail::need(os[i], "block", w), w + "/block")});
  }
  return detail::checked(where, [&] { return ClassicalQuantumState(e, a, out); });
}

inline Json to_json(const ClassicalQuantumState& s) {
  Json j;
  if (!s.e_label().empty()) j["e_label"] = s.e_label();
  j["a_label"] = s.a_label();
  Json os = Json::array();
  for (const auto& o : s.outcomes()) os.push_back(Json{{"x", o.x}, {"weight", o.weight}, {"block", to_json(o.block)}});
  j["outcomes"] = os;
  return j;
}

inline ClassicalQuantumState load_cq_state(const std::string& path) { return cq_from_json(read_json(path), path + ":"); }

// ---------------------------------------------------------------- protocol rounds

/// Either {"bb84": {"p": 0.01, "p_test": 0.1}} or a full round with m_map, x_labels, constraint, honest_input.
inline ProtocolRound round_from_json(const Json& j, const std::string& where = "") {
  if (!j.is_object()) throw IoError(where + ": expected an object");
  if (j.contains("bb84")) {
    const Json& b = j["bb84"];
    std::string w = detail::at(where, "bb84");
    double p = detail::number(detail::need(b, "p", w), w + "/p");
    double pt = b.contains("p_test") ? detail::number(b["p_test"], w + "/p_test") : 0.1;
    return detail::checked(w, [&] { return build_bb84_round(p, pt); });
  }
  ProtocolRound r;
  r.name = j.contains("name") && j["name"].is_string() ? j["name"].get<std::string>() : "custom";
  r.m_map = channel_from_json(detail::need(j, "m_map", where), detail::at(where, "m_map"));
  const Json& xl = detail::need(j, "x_labels", where);
  if (!xl.is_array()) throw IoError(detail::at(where, "x_labels") + ": expected an array of strings");
  for (std::size_t i = 0; i < xl.size(); ++i) {
    if (!xl[i].is_string()) throw IoError(detail::at(where, "x_labels/" + std::to_string(i)) + ": expected a string");
    r.x_labels.push_back(xl[i].get<std::string>());
  }
  r.constraint = constraint_from_json(detail::need(j, "constraint", where), detail::at(where, "constraint"));
  LabeledOperator hon = operator_from_json(detail::need(j, "honest_input", where), detail::at(where, "honest_input"));
  r.honest_input = detail::checked(detail::at(where, "honest_input"), [&] { return DensityOperator(hon); });
  if (j.contains("key_fraction")) r.key_fraction = detail::number(j["key_fraction"], detail::at(where, "key_fraction"));
  if (j.contains("error_rate")) r.error_rate = detail::number(j["error_rate"], detail::at(where, "error_rate"));
  if (j.contains("f")) r.f = weights_from_json(j["f"], detail::at(where, "f"));
  detail::checked(where, [&] {
    r.validate();
    return 0;
  });
  return r;
}

inline ProtocolRound load_round(const std::string& path) { return round_from_json(read_json(path), path + ":"); }

/// Array of {round spec, "weight": w}, or {"schedule": [...]}.
inline std::vector<ScheduleEntry> schedule_from_json(const Json& j, const std::string& where = "") {
  const Json* list = &j;
  std::string base = where;
  if (j.is_object()) {
    list = &detail::need(j, "schedule", where);
    base = detail::at(where, "schedule");
  }
  if (!list->is_array() || list->empty()) throw IoError(base + ": expected a non-empty array of rounds");
  std::vector<ScheduleEntry> s;
  for (std::size_t i = 0; i < list->size(); ++i) {
    std::string w = base + "/" + std::to_string(i);
    const Json& e = (*list)[i];
    double weight = e.contains("weight") ? detail::number(e["weight"], w + "/weight") : 1.0;
    if (!(weight > 0)) throw IoError(w + "/weight: weights must be positive");
    const Json& spec = e.contains("round") ? e["round"] : e;
    s.push_back({round_from_json(spec, e.contains("round") ? w + "/round" : w), weight});
  }
  return s;
}

inline std::vector<ScheduleEntry> load_schedule(const std::string& path) {
  return schedule_from_json(read_json(path), path + ":");
}

}  // namespace io
}  // namespace rnl
