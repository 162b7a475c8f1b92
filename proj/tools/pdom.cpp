#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"

#include "pdom/dissipativity.hpp"
#include "pdom/interconnect.hpp"
#include "pdom/io.hpp"
#include "pdom/lmi.hpp"
#include "pdom/lti.hpp"
#include "pdom/lure.hpp"
#include "pdom/report.hpp"
#include "pdom/reproduce.hpp"
#include "pdom/sim.hpp"

using namespace pdom;
using io::Json;

namespace {

struct Global {
  std::uint64_t seed = 42;
  unsigned jobs = 1;
  bool json = false;
  bool timing = false;
  std::string report_path;
  NumericPolicy policy;
};

Vector parse_list(const std::string& text, const std::string& what) {
  Vector out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw InputError(what + ": cannot parse \"" + item + "\" as a number");
    }
  }
  return out;
}

LureSystem as_lure(const io::AnySystem& s) {
  if (std::holds_alternative<LureSystem>(s)) return std::get<LureSystem>(s);
  const auto& l = std::get<LtiSystem>(s);
  if (l.has_feedthrough()) throw UnsupportedConfiguration("interconnection requires D = 0");
  return LureSystem(l.A, {}, l.B, l.C, l.name);
}

std::size_t states_of(const io::AnySystem& s) { return io::linear_part(s).states(); }

/// Degree suggested by the spectrum: unstable count of A + lambda I (vertex average for Lur'e).
std::size_t suggested_degree(const io::AnySystem& s, double lambda, const NumericPolicy& policy) {
  Matrix a = io::linear_part(s).A;
  if (std::holds_alternative<LureSystem>(s)) {
    const auto fam = vertex_family(std::get<LureSystem>(s));
    a = Matrix(a.rows(), a.cols());
    for (const auto& v : fam.vertices) a += (1.0 / static_cast<double>(fam.vertices.size())) * v;
  }
  return eigen_split_test(a, lambda, 0, policy).unstable;
}

SupplyRate supply_option(const std::string& file, const std::string& kind, double gamma, std::size_t r, std::size_t m) {
  if (!file.empty()) return io::supply_from_json(io::read_json_file(file), r, m, file);
  if (kind == "passivity") return io::supply_from_json(Json{{"kind", "passivity"}}, r, m);
  if (kind == "gain") return supply_gain(gamma, r, m);
  throw InputError("unknown supply kind \"" + kind + "\"");
}

RunReport cmd_analyze(const std::string& path, double lambda, std::size_t p, const Global& g) {
  const Json doc = io::read_json_file(path);
  RunReport r;
  r.command = "analyze";
  r.seed = g.seed;
  r.inputs_digest = digest_inputs({doc, Json{{"lambda", lambda}, {"p", p}}});
  const auto sys = io::any_system_from_json(doc, path);
  if (p > states_of(sys)) throw InputError("p exceeds the state dimension");
  if (std::holds_alternative<LureSystem>(sys)) {
    const auto& l = std::get<LureSystem>(sys);
    const auto fam = vertex_family(l);
    bool splits = true;
    for (std::size_t i = 0; i < fam.vertices.size(); ++i) {
      const auto s = eigen_split_test(fam.vertices[i], lambda, p, g.policy);
      r.verdicts["vertex_splits"].push_back(io::to_json(s));
      splits = splits && s.pass();
    }
    r.add("vertex_splits", splits, splits ? "every vertex has the requested split" : "some vertex splits differently");
    const auto found = find_diff_dominance_storage(l, lambda, p, g.policy);
    r.metrics["lmi"] = {{"status", to_string(found.status)}, {"iterations", found.iterations}};
    if (found.feasible()) r.certificates["storage"] = io::to_json(DominanceCertificate{*found.P, lambda, 1e-6, p});
    r.add("differential_dominance", found.feasible(), found.message);
    return r;
  }
  const auto& lin = std::get<LtiSystem>(sys);
  const auto split = eigen_split_test(lin.A, lambda, p, g.policy);
  r.verdicts["split"] = io::to_json(split);
  if (split.status == SplitVerdict::Status::inconclusive) {
    r.warn("split", "inconclusive: an eigenvalue of A + lambda I lies within split_tol of the imaginary axis");
    r.add("certificate", false, "no certificate for a non-hyperbolic rate");
    return r;
  }
  r.add("split", split.pass(),
        "A + lambda I has " + std::to_string(split.unstable) + " unstable eigenvalues, requested " + std::to_string(p));
  if (!split.pass()) return r;
  const auto cert = construct_certificate(lin.A, lambda, p, g.policy);
  const auto v = check_dominance(lin.A, cert, g.policy);
  r.certificates["storage"] = io::to_json(cert);
  r.verdicts["dominance"] = io::to_json(v);
  r.add("certificate", v.pass, v.message);
  return r;
}

RunReport cmd_verify(const std::string& sys_path, const std::string& cert_path, const std::string& supply_path,
                     const Global& g) {
  const Json sdoc = io::read_json_file(sys_path), cdoc = io::read_json_file(cert_path);
  Json supply_doc;
  if (!supply_path.empty()) supply_doc = io::read_json_file(supply_path);
  else if (cdoc.contains("supply")) supply_doc = cdoc["supply"];
  RunReport r;
  r.command = "verify";
  r.seed = g.seed;
  r.inputs_digest = digest_inputs({sdoc, cdoc, supply_doc});
  const auto sys = io::any_system_from_json(sdoc, sys_path);
  const LtiSystem lin = io::linear_part(sys);
  const auto cert = io::certificate_from_json(cdoc, lin.states(), cert_path, g.policy);
  const bool lure = std::holds_alternative<LureSystem>(sys);
  if (supply_doc.is_null()) {
    if (lure) {
      const auto v = check_diff_dominance(std::get<LureSystem>(sys), cert, g.policy);
      for (const auto& x : v.vertices) r.verdicts["vertices"].push_back(io::to_json(x));
      r.add("differential_dominance", v.pass, v.message);
    } else {
      const auto v = check_dominance(lin.A, cert, g.policy);
      r.verdicts["dominance"] = io::to_json(v);
      r.add("dominance", v.pass, v.message);
    }
    return r;
  }
  const SupplyRate s = io::supply_from_json(supply_doc, lin.outputs(), lin.inputs(), "supply");
  const DissipativityCertificate dc{cert.P, cert.lambda, cert.epsilon, cert.p, s};
  if (lure) {
    const auto v = check_diff_dissipativity(std::get<LureSystem>(sys), dc, g.policy);
    for (const auto& x : v.vertices) r.verdicts["vertices"].push_back(io::to_json(x));
    r.add("differential_dissipativity", v.pass, v.message);
  } else {
    const auto v = verify_dissipativity(lin, dc, g.policy);
    r.verdicts["dissipativity"] = io::to_json(v);
    r.add("dissipativity", v.pass, v.message);
  }
  return r;
}

RunReport cmd_certify(const std::string& path, double lambda, std::size_t p, const std::string& supply_file,
                      const std::string& supply_kind, double gamma, const std::string& out, const Global& g) {
  const Json doc = io::read_json_file(path);
  RunReport r;
  r.command = "certify";
  r.seed = g.seed;
  r.inputs_digest = digest_inputs({doc, Json{{"lambda", lambda}, {"p", p}, {"supply", supply_file + supply_kind}, {"gamma", gamma}}});
  const auto sys = io::any_system_from_json(doc, path);
  const LtiSystem lin = io::linear_part(sys);
  if (p > lin.states()) throw InputError("p exceeds the state dimension");
  Json cert;
  if (supply_file.empty() && supply_kind.empty()) {
    const LmiResult res = std::holds_alternative<LureSystem>(sys)
                              ? find_diff_dominance_storage(std::get<LureSystem>(sys), lambda, p, g.policy)
                              : find_dominance_storage(lin.A, lambda, p, g.policy);
    r.metrics["lmi"] = {{"status", to_string(res.status)}, {"iterations", res.iterations}, {"violation", res.violation}};
    if (res.feasible()) cert = io::to_json(DominanceCertificate{*res.P, lambda, 1e-6, p});
    r.add("storage", res.feasible(), res.message);
  } else {
    const SupplyRate s = supply_option(supply_file, supply_kind, gamma, lin.outputs(), lin.inputs());
    PassivityStorageResult res;
    if (std::holds_alternative<LureSystem>(sys)) {
      const bool passive = s.Q.matrix().max_abs() == 0.0 && s.R.matrix().max_abs() == 0.0 && s.L.square() &&
                           (s.L - Matrix::identity(s.L.rows())).max_abs() == 0.0;
      if (!passive) throw UnsupportedConfiguration("differential storage search supports the passivity supply only");
      res = find_diff_passivity_storage(std::get<LureSystem>(sys), lambda, p, g.policy);
    } else {
      res = find_dissipativity_storage(lin, lambda, p, s, g.policy);
    }
    r.metrics["lmi"] = {{"status", to_string(res.report.status)}, {"iterations", res.report.iterations},
                        {"violation", res.report.violation}};
    if (res.found) cert = io::to_json(res.certificate);
    r.add("storage", res.found, res.report.message);
  }
  if (!cert.is_null()) {
    r.certificates["storage"] = cert;
    if (!out.empty()) {
      std::ofstream os(out);
      if (!os) throw InputError("cannot write " + out);
      os << cert.dump(2) << "\n";
    }
  }
  return r;
}

RunReport cmd_interconnect(const std::string& path, const Global& g) {
  const Json doc = io::read_json_file(path);
  RunReport r;
  r.command = "interconnect";
  r.seed = g.seed;
  r.inputs_digest = digest_inputs({doc});
  const io::LoopSpec loop = io::loop_from_json(doc, path);
  const LtiSystem l1 = io::linear_part(loop.sys1), l2 = io::linear_part(loop.sys2);
  check_loop_channels(l1.outputs(), l1.inputs(), l2.outputs(), l2.inputs());

  const auto coupling = scaled_coupling_condition(loop.supply1, loop.supply2, g.policy);
  r.verdicts["coupling"] = {{"lambda_max", coupling.lambda_max}, {"tau1", coupling.tau1}, {"tau2", coupling.tau2}};
  r.add("coupling", coupling.pass, coupling.message);

  auto subsystem = [&](const io::AnySystem& s, const SupplyRate& supply, const std::optional<SymmetricMatrix>& given,
                       const std::string& tag) -> std::optional<DissipativityCertificate> {
    DissipativityCertificate c;
    if (given) {
      c = {*given, loop.lambda, 0.0, inertia_of(*given, g.policy).negative, supply};
    } else {
      const std::size_t p = suggested_degree(s, loop.lambda, g.policy);
      PassivityStorageResult res;
      if (std::holds_alternative<LureSystem>(s)) {
        const bool passive = supply.Q.matrix().max_abs() == 0.0 && supply.R.matrix().max_abs() == 0.0 &&
                             supply.L.square() && (supply.L - Matrix::identity(supply.L.rows())).max_abs() == 0.0;
        if (!passive) throw UnsupportedConfiguration(tag + ": give a storage for non-passivity supplies of Lur'e systems");
        res = find_diff_passivity_storage(std::get<LureSystem>(s), loop.lambda, p, g.policy);
      } else {
        res = find_dissipativity_storage(std::get<LtiSystem>(s), loop.lambda, p, supply, g.policy);
      }
      if (!res.found) {
        r.add(tag, false, "no storage found: " + res.report.message);
        return std::nullopt;
      }
      c = res.certificate;
    }
    bool ok;
    std::string msg;
    if (std::holds_alternative<LureSystem>(s)) {
      const auto v = check_diff_dissipativity(std::get<LureSystem>(s), c, g.policy);
      ok = v.pass;
      msg = v.message;
    } else {
      const auto v = verify_dissipativity(std::get<LtiSystem>(s), c, g.policy);
      ok = v.pass;
      msg = v.message;
    }
    r.certificates[tag] = io::to_json(c);
    r.add(tag, ok, "degree " + std::to_string(c.p) + ", " + msg);
    return ok ? std::optional(c) : std::nullopt;
  };
  const auto c1 = subsystem(loop.sys1, loop.supply1, loop.P1, "subsystem1");
  const auto c2 = subsystem(loop.sys2, loop.supply2, loop.P2, "subsystem2");
  if (!c1 || !c2 || !coupling.pass) {
    r.add("closed_loop", false, "skipped: a subsystem certificate or the coupling condition failed");
    return r;
  }
  const auto cert = closed_loop_certificate(*c1, *c2, coupling.tau1, coupling.tau2, g.policy);
  r.certificates["closed_loop"] = io::to_json(cert);
  const bool lure = std::holds_alternative<LureSystem>(loop.sys1) || std::holds_alternative<LureSystem>(loop.sys2);
  if (lure) {
    const auto v = check_diff_dominance(diff_feedback_compose(as_lure(loop.sys1), as_lure(loop.sys2)), cert, g.policy);
    r.add("closed_loop", v.pass, std::to_string(cert.p) + "-dominance with rate " + num(cert.lambda) + ": " + v.message);
  } else {
    const auto v = check_dominance(feedback_compose(l1, l2).A, cert, g.policy);
    r.verdicts["closed_loop"] = io::to_json(v);
    r.add("closed_loop", v.pass, std::to_string(cert.p) + "-dominance with rate " + num(cert.lambda) + ": " + v.message);
  }
  return r;
}

RunReport cmd_simulate(const std::string& path, const std::string& x0_text, double t_end, double dt, std::size_t stride,
                       const std::string& u_text, const std::string& csv, const Global& g) {
  const Json doc = io::read_json_file(path);
  RunReport r;
  r.command = "simulate";
  r.seed = g.seed;
  IntegrationOptions opt;
  opt.t_end = t_end;
  opt.dt = dt;
  opt.stride = stride;
  r.inputs_digest = digest_inputs({doc, Json{{"x0", x0_text}, {"t", t_end}, {"dt", dt}, {"stride", stride}, {"u", u_text}}});
  const Vector x0 = parse_list(x0_text, "--x0");
  const InputSignal u = u_text.empty() ? InputSignal::zero() : InputSignal::constant(parse_list(u_text, "--u"));
  Trajectory tr;
  if (doc.is_object() && doc.contains("sys1")) {
    const auto a = io::any_system_from_json(doc["sys1"], path + ".sys1");
    const auto b = io::any_system_from_json(doc["sys2"], path + ".sys2");
    tr = integrate(diff_feedback_compose(as_lure(a), as_lure(b)), x0, u, opt);
  } else {
    const auto sys = io::any_system_from_json(doc, path);
    tr = std::holds_alternative<LureSystem>(sys) ? integrate(std::get<LureSystem>(sys), x0, u, opt)
                                                 : integrate(std::get<LtiSystem>(sys), x0, u, opt);
  }
  const auto v = classify_asymptotics(tr, g.policy);
  r.verdicts["asymptotics"] = io::to_json(v);
  r.metrics["samples"] = tr.size();
  r.metrics["diverged"] = tr.diverged;
  r.metrics["final_state"] = tr.back();
  r.add("classification", true, std::string(to_string(v.kind)) + ": " + v.message);
  if (!csv.empty()) {
    std::ofstream os(csv);
    if (!os) throw InputError("cannot write " + csv);
    tr.write_csv(os);
  }
  return r;
}

int emit(RunReport& r, const Global& g, double seconds) {
  r.wall_time_s = seconds;
  if (g.json) {
    std::cout << r.to_json(g.timing).dump(2) << "\n";
  } else {
    std::cout << r.summary();
    if (g.timing) std::cout << "wall time " << num(seconds) << " s\n";
  }
  if (!g.report_path.empty()) {
    std::ofstream os(g.report_path);
    if (!os) throw InputError("cannot write " + g.report_path);
    os << r.to_json(g.timing).dump(2) << "\n";
  }
  return r.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pdom: p-dominance and p-dissipativity analysis of linear and Lur'e systems"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--seed", g.seed, "Seed for every random probe")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads for independent sub-checks")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_flag("--json", g.json, "Print the report as JSON");
  app.add_flag("--timing", g.timing, "Include wall time in the output");
  app.add_option("--report", g.report_path, "Write the JSON report to a file");

  std::string sys_path, cert_path, supply_path, supply_kind, out_path, loop_path, x0 = "", u_text, csv, example = "all";
  double lambda = 0.0, gamma = 0.0, t_end = 100.0, dt = 1e-3;
  std::size_t p = 0, stride = 1;

  auto* analyze = app.add_subcommand("analyze", "Spectral split, constructed certificate and dominance check");
  analyze->add_option("system", sys_path, "System JSON")->required();
  analyze->add_option("--lambda", lambda, "Rate")->required();
  analyze->add_option("--p", p, "Dominance degree")->required();

  auto* verify = app.add_subcommand("verify", "Check a given certificate");
  verify->add_option("system", sys_path, "System JSON")->required();
  verify->add_option("certificate", cert_path, "Certificate JSON {P, lambda, epsilon, p}")->required();
  verify->add_option("--supply", supply_path, "Supply JSON; switches to the dissipativity check");

  auto* certify = app.add_subcommand("certify", "Search for a storage with the LMI engine");
  certify->add_option("system", sys_path, "System JSON")->required();
  certify->add_option("--lambda", lambda, "Rate")->required();
  certify->add_option("--p", p, "Degree")->required();
  certify->add_option("--supply", supply_path, "Supply JSON");
  certify->add_option("--supply-kind", supply_kind, "passivity or gain")->check(CLI::IsMember({"passivity", "gain"}));
  certify->add_option("--gamma", gamma, "Gain for --supply-kind gain");
  certify->add_option("--out", out_path, "Write the certificate JSON here");

  auto* inter = app.add_subcommand("interconnect", "Certify a negative feedback loop");
  inter->add_option("loop", loop_path, "Loop JSON {sys1, sys2, supply1, supply2, lambda}")->required();

  auto* simulate = app.add_subcommand("simulate", "Integrate and classify the asymptotic behavior");
  simulate->add_option("system", sys_path, "System or loop JSON")->required();
  simulate->add_option("--x0", x0, "Initial state, comma separated")->required();
  simulate->add_option("--t", t_end, "Final time")->capture_default_str();
  simulate->add_option("--dt", dt, "Step size")->capture_default_str();
  simulate->add_option("--stride", stride, "Record every n-th step")->capture_default_str();
  simulate->add_option("--u", u_text, "Constant input, comma separated");
  simulate->add_option("--out", csv, "Trajectory CSV");

  auto* repro = app.add_subcommand("reproduce", "Run the built-in example suites");
  repro->add_option("example", example, "1, 2, 3 or all")->check(CLI::IsMember({"1", "2", "3", "all"}))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    g.policy = io::policy_from_env();
    RunReport r;
    if (*analyze) r = cmd_analyze(sys_path, lambda, p, g);
    else if (*verify) r = cmd_verify(sys_path, cert_path, supply_path, g);
    else if (*certify) r = cmd_certify(sys_path, lambda, p, supply_path, supply_kind, gamma, out_path, g);
    else if (*inter) r = cmd_interconnect(loop_path, g);
    else if (*simulate) r = cmd_simulate(sys_path, x0, t_end, dt, stride, u_text, csv, g);
    else r = reproduce::run(example == "all" ? 0 : std::stoi(example), {g.policy, g.seed, g.jobs});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return emit(r, g, secs);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << "\n";
    return 2;
  } catch (const UnsupportedConfiguration& e) {
    std::cerr << "unsupported: " << e.what() << "\n";
    return 2;
  } catch (const RateMismatch& e) {
    std::cerr << "rate mismatch: " << e.what() << "\n";
    return 2;
  } catch (const CertificationError& e) {
    std::cerr << "certification failed: " << e.what() << "\n";
    return 1;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
