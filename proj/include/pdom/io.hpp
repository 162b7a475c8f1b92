#pragma once

#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>

#include "json.hpp"

#include "dissipativity.hpp"
#include "errors.hpp"
#include "lti.hpp"
#include "lure.hpp"
#include "matrix.hpp"
#include "numeric_policy.hpp"
#include "sim.hpp"
#include "sym_eigen.hpp"

namespace pdom::io {

using Json = nlohmann::json;

/// Parses text, reporting syntax errors as "source:line:column: message".
inline Json parse_json(const std::string& text, const std::string& source = "<input>") {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    const auto pos = what.find("syntax error");
    if (pos != std::string::npos) what = what.substr(pos);
    throw InputError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
  }
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str(), path);
}

namespace detail {

inline const Json& require(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw InputError(where + ": expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw InputError(where + ": missing \"" + key + "\"");
  return *it;
}

inline double number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw InputError(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw InputError(where + ": value is not finite");
  return v;
}

inline double number_or(const Json& j, const char* key, double fallback, const std::string& where) {
  const auto it = j.find(key);
  return it == j.end() ? fallback : number(*it, where + "." + key);
}

}  // namespace detail

inline Vector vector_from_json(const Json& j, const std::string& where) {
  if (!j.is_array()) throw InputError(where + ": expected an array of numbers");
  Vector v;
  v.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(detail::number(j[i], where + "[" + std::to_string(i) + "]"));
  return v;
}

/// Nested row arrays; [] is 0x0 and [[], []] is 2x0.
inline Matrix matrix_from_json(const Json& j, const std::string& where) {
  if (!j.is_array()) throw InputError(where + ": expected an array of rows");
  if (j.empty()) return Matrix();
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < j.size(); ++i) {
    rows.push_back(vector_from_json(j[i], where + "[" + std::to_string(i) + "]"));
    if (rows.back().size() != rows.front().size())
      throw DimensionError(where + ": row " + std::to_string(i) + " has " + std::to_string(rows.back().size()) +
                           " entries, expected " + std::to_string(rows.front().size()));
  }
  if (rows.front().empty()) return Matrix(rows.size(), 0);
  return Matrix::from_rows(rows);
}

inline Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (std::size_t k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    out.push_back(std::move(row));
  }
  return out;
}

inline Json to_json(const SymmetricMatrix& s) { return to_json(s.matrix()); }

inline Json to_json(const Inertia& in) { return Json::array({in.negative, in.zero, in.positive}); }

inline SymmetricMatrix symmetric_from_json(const Json& j, const std::string& where, const NumericPolicy& policy = {}) {
  const Matrix m = matrix_from_json(j, where);
  if (!m.square()) throw DimensionError(where + ": expected a square matrix, got " + m.shape());
  const double asym = (m - m.transpose()).frobenius_norm();
  if (asym > policy.sym_tol * std::max(1.0, m.frobenius_norm()))
    throw InputError(where + ": matrix is not symmetric (asymmetry " + std::to_string(asym) + ")");
  return SymmetricMatrix::symmetric_part(m);
}

/// {"name", "A", "B", "C", "D"}; B, C and D are optional.
inline LtiSystem system_from_json(const Json& j, const std::string& where = "system") {
  const Matrix a = matrix_from_json(detail::require(j, "A", where), where + ".A");
  const std::size_t n = a.rows();
  if (!a.square() && !(a.rows() == 0 && a.cols() == 0)) throw DimensionError(where + ".A must be square, got " + a.shape());
  Matrix b = j.contains("B") ? matrix_from_json(j["B"], where + ".B") : Matrix(n, 0);
  if (b.rows() == 0 && b.cols() == 0) b = Matrix(n, 0);
  Matrix c = j.contains("C") ? matrix_from_json(j["C"], where + ".C") : Matrix(0, n);
  if (c.rows() == 0 && c.cols() == 0) c = Matrix(0, n);
  Matrix d = j.contains("D") ? matrix_from_json(j["D"], where + ".D") : Matrix(c.rows(), b.cols());
  if (d.rows() == 0 && d.cols() == 0) d = Matrix(c.rows(), b.cols());
  LtiSystem sys(a, b, c, d);
  if (j.contains("name")) sys.name = j["name"].get<std::string>();
  return sys;
}

inline Json to_json(const LtiSystem& s) {
  Json j;
  j["name"] = s.name;
  j["A"] = to_json(s.A);
  j["B"] = to_json(s.B);
  j["C"] = to_json(s.C);
  j["D"] = to_json(s.D);
  return j;
}

/// {"P", "lambda", "epsilon", "p"}; epsilon defaults to 0 and p to the negative inertia of P.
inline DominanceCertificate certificate_from_json(const Json& j, std::size_t n, const std::string& where = "certificate",
                                                  const NumericPolicy& policy = {}) {
  DominanceCertificate c;
  c.P = symmetric_from_json(detail::require(j, "P", where), where + ".P", policy);
  if (c.P.dim() != n)
    throw DimensionError(where + ".P is " + std::to_string(c.P.dim()) + "x" + std::to_string(c.P.dim()) +
                         ", system has " + std::to_string(n) + " states");
  c.lambda = detail::number(detail::require(j, "lambda", where), where + ".lambda");
  c.epsilon = detail::number_or(j, "epsilon", 0.0, where);
  if (c.epsilon < 0.0) throw InputError(where + ".epsilon must be non-negative");
  if (j.contains("p")) {
    if (!j["p"].is_number_unsigned()) throw InputError(where + ".p must be a non-negative integer");
    c.p = j["p"].get<std::size_t>();
    if (c.p > n) throw InputError(where + ".p exceeds the state dimension");
  } else {
    c.p = inertia_of(c.P, policy).negative;
  }
  return c;
}

inline Json to_json(const DominanceCertificate& c) {
  return Json{{"P", to_json(c.P)}, {"lambda", c.lambda}, {"epsilon", c.epsilon}, {"p", c.p}};
}

/// {"Q", "L", "R"} or the shorthand {"kind": "passivity" | "gain" | "zero", "gamma": ...}.
inline SupplyRate supply_from_json(const Json& j, std::size_t r, std::size_t m, const std::string& where = "supply") {
  if (j.is_string() || (j.is_object() && j.contains("kind"))) {
    const std::string kind = j.is_string() ? j.get<std::string>() : j["kind"].get<std::string>();
    if (kind == "passivity") {
      if (r != m) throw DimensionError(where + ": passivity needs as many inputs as outputs");
      return supply_passivity(r, m);
    }
    if (kind == "gain") {
      if (!j.is_object()) throw InputError(where + ": gain supply needs \"gamma\"");
      return supply_gain(detail::number(detail::require(j, "gamma", where), where + ".gamma"), r, m);
    }
    if (kind == "zero") return supply_zero(r, m);
    throw InputError(where + ": unknown supply kind \"" + kind + "\"");
  }
  const SymmetricMatrix q = symmetric_from_json(detail::require(j, "Q", where), where + ".Q");
  Matrix l = matrix_from_json(detail::require(j, "L", where), where + ".L");
  if (l.rows() == 0 && l.cols() == 0) l = Matrix(r, m);
  const SymmetricMatrix rr = symmetric_from_json(detail::require(j, "R", where), where + ".R");
  SupplyRate s(q, l, rr);
  if (s.outputs() != r || s.inputs() != m)
    throw DimensionError(where + ": supply is for " + std::to_string(s.outputs()) + " outputs and " +
                         std::to_string(s.inputs()) + " inputs, expected " + std::to_string(r) + " and " +
                         std::to_string(m));
  return s;
}

inline Json to_json(const SupplyRate& s) { return Json{{"Q", to_json(s.Q)}, {"L", to_json(s.L)}, {"R", to_json(s.R)}}; }

inline Json to_json(const DissipativityCertificate& c) {
  return Json{{"P", to_json(c.P)}, {"lambda", c.lambda}, {"epsilon", c.epsilon}, {"p", c.p}, {"supply", to_json(c.supply)}};
}

/// "cubic_saturated" or {"kind", "scale" | "slope" | "s" and "v"}.
inline Nonlinearity nonlinearity_from_json(const Json& j, const std::string& where) {
  const std::string kind = j.is_string() ? j.get<std::string>()
                           : j.is_object() ? detail::require(j, "kind", where).get<std::string>()
                                           : throw InputError(where + ": expected a name or an object");
  if (kind == "cubic_saturated") return Nonlinearity::cubic_saturated(j.is_object() ? detail::number_or(j, "scale", 1.0, where) : 1.0);
  if (kind == "linear") {
    if (!j.is_object()) throw InputError(where + ": linear nonlinearity needs \"slope\"");
    return Nonlinearity::linear(detail::number(detail::require(j, "slope", where), where + ".slope"));
  }
  if (kind == "tabulated") {
    if (!j.is_object()) throw InputError(where + ": tabulated nonlinearity needs \"s\" and \"v\"");
    return Nonlinearity::tabulated(vector_from_json(detail::require(j, "s", where), where + ".s"),
                                   vector_from_json(detail::require(j, "v", where), where + ".v"));
  }
  throw InputError(where + ": unknown nonlinearity \"" + kind + "\"");
}

inline Json to_json(const Nonlinearity& f) {
  switch (f.kind()) {
    case Nonlinearity::Kind::cubic_saturated: return Json{{"kind", "cubic_saturated"}, {"scale", f.scale()}};
    case Nonlinearity::Kind::linear: return Json{{"kind", "linear"}, {"slope", f.scale()}};
    case Nonlinearity::Kind::tabulated: return Json{{"kind", "tabulated"}, {"s", f.knots()}, {"v", f.values()}};
  }
  return {};
}

inline bool is_lure(const Json& j) { return j.is_object() && j.contains("channels"); }

/// {"name", "A", "B", "C", "channels": [{"g", "h", "sigma", "alpha", "beta"}]}.
inline LureSystem lure_from_json(const Json& j, const std::string& where = "system") {
  const LtiSystem lin = system_from_json(j, where);
  if (lin.has_feedthrough()) throw UnsupportedConfiguration(where + ": Lur'e systems have no feedthrough");
  const Json& chs = detail::require(j, "channels", where);
  if (!chs.is_array()) throw InputError(where + ".channels: expected an array");
  std::vector<LureChannel> channels;
  for (std::size_t i = 0; i < chs.size(); ++i) {
    const std::string w = where + ".channels[" + std::to_string(i) + "]";
    LureChannel ch;
    ch.g = vector_from_json(detail::require(chs[i], "g", w), w + ".g");
    ch.h = vector_from_json(detail::require(chs[i], "h", w), w + ".h");
    ch.sigma = nonlinearity_from_json(detail::require(chs[i], "sigma", w), w + ".sigma");
    ch.alpha = detail::number(detail::require(chs[i], "alpha", w), w + ".alpha");
    ch.beta = detail::number(detail::require(chs[i], "beta", w), w + ".beta");
    channels.push_back(std::move(ch));
  }
  return LureSystem(lin.A, std::move(channels), lin.B, lin.C, lin.name);
}

inline Json to_json(const LureSystem& s) {
  Json j;
  j["name"] = s.name;
  j["A"] = to_json(s.A);
  j["B"] = to_json(s.B);
  j["C"] = to_json(s.C);
  j["channels"] = Json::array();
  for (const auto& ch : s.channels)
    j["channels"].push_back(Json{{"g", ch.g}, {"h", ch.h}, {"sigma", to_json(ch.sigma)}, {"alpha", ch.alpha}, {"beta", ch.beta}});
  return j;
}

using AnySystem = std::variant<LtiSystem, LureSystem>;

inline AnySystem any_system_from_json(const Json& j, const std::string& where = "system") {
  if (is_lure(j)) return lure_from_json(j, where);
  return system_from_json(j, where);
}

inline LtiSystem linear_part(const AnySystem& s) {
  return std::holds_alternative<LtiSystem>(s) ? std::get<LtiSystem>(s) : std::get<LureSystem>(s).linear_part();
}

/// {"sys1", "sys2", "supply1", "supply2", "lambda"} with optional storages "P1", "P2".
struct LoopSpec {
  AnySystem sys1;
  AnySystem sys2;
  SupplyRate supply1;
  SupplyRate supply2;
  double lambda = 0.0;
  std::optional<SymmetricMatrix> P1;
  std::optional<SymmetricMatrix> P2;
};

inline LoopSpec loop_from_json(const Json& j, const std::string& where = "loop") {
  LoopSpec l{any_system_from_json(detail::require(j, "sys1", where), where + ".sys1"),
             any_system_from_json(detail::require(j, "sys2", where), where + ".sys2"), {}, {}, 0.0, {}, {}};
  const LtiSystem a = linear_part(l.sys1), b = linear_part(l.sys2);
  l.supply1 = supply_from_json(detail::require(j, "supply1", where), a.outputs(), a.inputs(), where + ".supply1");
  l.supply2 = supply_from_json(detail::require(j, "supply2", where), b.outputs(), b.inputs(), where + ".supply2");
  const Json& lam = detail::require(j, "lambda", where);
  if (lam.is_array()) {
    if (lam.size() != 2) throw InputError(where + ".lambda: expected a number or a pair");
    const double l1 = detail::number(lam[0], where + ".lambda[0]"), l2 = detail::number(lam[1], where + ".lambda[1]");
    if (l1 != l2) throw RateMismatch(where + ": subsystem rates differ: " + num(l1) + " vs " + num(l2));
    l.lambda = l1;
  } else {
    l.lambda = detail::number(lam, where + ".lambda");
  }
  if (j.contains("P1")) l.P1 = symmetric_from_json(j["P1"], where + ".P1");
  if (j.contains("P2")) l.P2 = symmetric_from_json(j["P2"], where + ".P2");
  return l;
}

/// Overrides policy fields from a JSON object keyed by field name.
inline NumericPolicy policy_from_json(const Json& j, NumericPolicy base = {}) {
  if (!j.is_object()) throw InputError("numeric policy: expected an object");
  for (const auto& [key, value] : j.items()) {
    const std::string w = "numeric policy." + key;
    auto real = [&](double& field) { field = detail::number(value, w); };
    auto integer = [&](int& field) {
      if (!value.is_number_integer()) throw InputError(w + ": expected an integer");
      field = value.get<int>();
    };
    if (key == "sym_tol") real(base.sym_tol);
    else if (key == "zero_band_rel") real(base.zero_band_rel);
    else if (key == "split_tol") real(base.split_tol);
    else if (key == "recon_tol") real(base.recon_tol);
    else if (key == "exp_tol") real(base.exp_tol);
    else if (key == "lmi_tol") real(base.lmi_tol);
    else if (key == "proj_tol") real(base.proj_tol);
    else if (key == "probe_margin") real(base.probe_margin);
    else if (key == "gain_tol") real(base.gain_tol);
    else if (key == "fp_tol_rel") real(base.fp_tol_rel);
    else if (key == "cycle_tol") real(base.cycle_tol);
    else if (key == "lmi_stall_tol") real(base.lmi_stall_tol);
    else if (key == "jacobi_max_sweeps") integer(base.jacobi_max_sweeps);
    else if (key == "qr_max_iter_per_eig") integer(base.qr_max_iter_per_eig);
    else if (key == "lmi_max_iter") integer(base.lmi_max_iter);
    else if (key == "lmi_stall_window") integer(base.lmi_stall_window);
    else throw InputError("numeric policy: unknown field \"" + key + "\"");
  }
  if (!base.valid()) throw InputError("numeric policy: every tolerance and limit must be positive");
  return base;
}

inline Json to_json(const NumericPolicy& p) {
  return Json{{"sym_tol", p.sym_tol},       {"zero_band_rel", p.zero_band_rel},
              {"split_tol", p.split_tol},   {"recon_tol", p.recon_tol},
              {"exp_tol", p.exp_tol},       {"lmi_tol", p.lmi_tol},
              {"proj_tol", p.proj_tol},     {"probe_margin", p.probe_margin},
              {"gain_tol", p.gain_tol},     {"fp_tol_rel", p.fp_tol_rel},
              {"cycle_tol", p.cycle_tol},   {"lmi_stall_tol", p.lmi_stall_tol},
              {"jacobi_max_sweeps", p.jacobi_max_sweeps}, {"qr_max_iter_per_eig", p.qr_max_iter_per_eig},
              {"lmi_max_iter", p.lmi_max_iter},           {"lmi_stall_window", p.lmi_stall_window}};
}

/// Policy from the file named by PDOM_NUMERIC_POLICY, or the defaults.
inline NumericPolicy policy_from_env() {
  const char* path = std::getenv("PDOM_NUMERIC_POLICY");
  if (path == nullptr || *path == '\0') return {};
  return policy_from_json(read_json_file(path));
}

inline Json to_json(const DominanceVerdict& v) {
  return Json{{"pass", v.pass},         {"residual_max", v.residual_max}, {"inertia", to_json(v.inertia)},
              {"expected", to_json(v.expected)}, {"witness", v.witness}, {"message", v.message}};
}

inline const char* to_string(SplitVerdict::Status s) {
  switch (s) {
    case SplitVerdict::Status::pass: return "pass";
    case SplitVerdict::Status::fail: return "fail";
    case SplitVerdict::Status::inconclusive: return "inconclusive";
  }
  return "unknown";
}

inline Json to_json(const SplitVerdict& v) {
  return Json{{"status", to_string(v.status)}, {"unstable", v.unstable}, {"stable", v.stable}, {"margin", v.margin}};
}

inline Json to_json(const DissipativityVerdict& v) {
  return Json{{"pass", v.pass},         {"block_max", v.block_max},         {"inertia", to_json(v.inertia)},
              {"expected", to_json(v.expected)}, {"witness", v.witness}, {"message", v.message}};
}

inline Json to_json(const AsymptoticVerdict& v) {
  Json j{{"kind", to_string(v.kind)},
         {"tail_displacement", v.tail_displacement},
         {"fp_tol", v.fp_tol},
         {"window", v.window},
         {"message", v.message}};
  if (v.kind == AsymptoticVerdict::Kind::fixed_point) j["location"] = v.location;
  if (v.kind == AsymptoticVerdict::Kind::limit_cycle || v.period > 0.0) {
    j["period"] = v.period;
    j["amplitude"] = v.amplitude;
    j["period_jitter"] = v.period_jitter;
    j["amplitude_change"] = v.amplitude_change;
    j["coordinate"] = v.coordinate;
  }
  return j;
}

}  // namespace pdom::io
