#include "nls/cli_io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "nls/approximation.hpp"
#include "nls/asymptotics.hpp"
#include "nls/expr.hpp"
#include "nls/local_limit.hpp"
#include "nls/variational.hpp"

namespace nls {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::invalid_argument("config error at " + path + ": " + what);
}

void check_keys(const json& obj, const std::string& path,
                const std::vector<std::string>& allowed) {
  for (auto it = obj.cbegin(); it != obj.cend(); ++it) {
    bool ok = false;
    for (const auto& a : allowed)
      if (it.key() == a) ok = true;
    if (!ok) fail(path, "unknown key \"" + it.key() + "\"");
  }
}

std::string get_string(const json& o, const std::string& path, const std::string& key,
                       const std::string& dflt) {
  if (!o.contains(key)) return dflt;
  if (!o[key].is_string()) fail(path + "." + key, "expected a string");
  return o[key].get<std::string>();
}

int get_int(const json& o, const std::string& path, const std::string& key, int dflt) {
  if (!o.contains(key)) return dflt;
  if (!o[key].is_number_integer()) fail(path + "." + key, "expected an integer");
  return o[key].get<int>();
}

double get_double(const json& o, const std::string& path, const std::string& key, double dflt) {
  if (!o.contains(key)) return dflt;
  if (!o[key].is_number()) fail(path + "." + key, "expected a number");
  return o[key].get<double>();
}

bool get_bool(const json& o, const std::string& path, const std::string& key, bool dflt) {
  if (!o.contains(key)) return dflt;
  if (!o[key].is_boolean()) fail(path + "." + key, "expected a boolean");
  return o[key].get<bool>();
}

std::vector<double> get_list(const json& o, const std::string& path, const std::string& key) {
  if (!o.contains(key)) fail(path, "missing required list \"" + key + "\"");
  if (!o[key].is_array() || o[key].empty()) fail(path + "." + key, "expected a nonempty array");
  std::vector<double> v;
  for (const auto& e : o[key]) {
    if (!e.is_number()) fail(path + "." + key, "expected numbers");
    v.push_back(e.get<double>());
  }
  return v;
}

void validate_inline_scenario(const json& sc) {
  check_keys(sc, "scenario",
             {"l", "dim", "bounds", "tau", "form", "m", "sigma", "C", "D", "A", "kernels",
              "bc"});
  if (!sc.contains("kernels")) fail("scenario", "kernels required");
  if (!sc.contains("D")) fail("scenario", "D required");
  if (!sc.contains("A")) fail("scenario", "A required");
  std::string form = get_string(sc, "scenario", "form", "raw");
  if (form != "raw" && form != "scaled") fail("scenario.form", "expected \"raw\" or \"scaled\"");
  std::string bc = get_string(sc, "scenario", "bc", "raw");
  if (bc != "raw" && bc != "dirichlet" && bc != "neumann")
    fail("scenario.bc", "expected raw|dirichlet|neumann");
  for (const auto& ker : sc["kernels"]) {
    if (!ker.is_object()) fail("scenario.kernels", "expected kernel objects");
    check_keys(ker, "scenario.kernels[]", {"type", "value", "f", "g"});
    std::string type = get_string(ker, "scenario.kernels[]", "type", "");
    if (type != "uniform" && type != "triangle" && type != "gaussian" && type != "constant" &&
        type != "rankone")
      fail("scenario.kernels[].type", "expected uniform|triangle|gaussian|constant|rankone");
  }
}

json default_options(const std::string& command, const json& given) {
  json o = given.is_null() ? json::object() : given;
  const std::string path = "options";
  if (command == "spectrum") {
    check_keys(o, path, {"adjoint"});
    o["adjoint"] = get_bool(o, path, "adjoint", false);
  } else if (command == "existence") {
    check_keys(o, path, {});
  } else if (command == "approx") {
    check_keys(o, path, {"levels", "eps0"});
    o["levels"] = get_int(o, path, "levels", 4);
    o["eps0"] = get_double(o, path, "eps0", 0.02);
  } else if (command == "certify") {
    check_keys(o, path, {"tol"});
    o["tol"] = get_double(o, path, "tol", 1e-6);
  } else if (command == "sweep-rate") {
    check_keys(o, path, {"scales"});
    get_list(o, path, "scales");
  } else if (command == "sweep-range") {
    check_keys(o, path, {"sigmas", "m"});
    get_list(o, path, "sigmas");
    o["m"] = get_double(o, path, "m", 2.0);
  } else if (command == "sweep-freq") {
    check_keys(o, path, {"taus"});
    get_list(o, path, "taus");
  } else if (command == "local-eigen") {
    check_keys(o, path, {});
  } else if (command == "zika") {
    check_keys(o, path, {"periods", "h0", "vu0", "vi0", "thin"});
    o["periods"] = get_int(o, path, "periods", 200);
    o["h0"] = get_string(o, path, "h0", "0.1");
    o["vu0"] = get_string(o, path, "vu0", "0.5");
    o["vi0"] = get_string(o, path, "vi0", "0.1");
    o["thin"] = get_int(o, path, "thin", 20);
  } else if (command == "stemcell") {
    check_keys(o, path, {"periods", "q0", "thin"});
    o["periods"] = get_int(o, path, "periods", 200);
    o["q0"] = get_string(o, path, "q0", "1 + 0.5*sin(pi*x)");
    o["thin"] = get_int(o, path, "thin", 20);
  } else if (command == "convergence") {
    check_keys(o, path, {"sigmas", "T", "d", "a", "u0"});
    if (!o.contains("sigmas")) o["sigmas"] = json::array({0.2, 0.1, 0.05});
    get_list(o, path, "sigmas");
    o["T"] = get_double(o, path, "T", 1.0);
    o["d"] = get_string(o, path, "d", "1");
    o["a"] = get_string(o, path, "a", "0.5 + 0.3*cos(2*pi*t)");
    o["u0"] = get_string(o, path, "u0", "sin(pi*x)");
  } else {
    fail("command", "unknown command \"" + command + "\"");
  }
  return o;
}

}  // namespace

std::vector<std::string> command_names() {
  return {"spectrum",   "existence", "approx",     "certify", "sweep-rate", "sweep-range",
          "sweep-freq", "local-eigen", "zika",     "stemcell", "convergence"};
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail("$", e.what());
  }
  if (!j.is_object()) fail("$", "expected a JSON object");
  check_keys(j, "$", {"command", "scenario", "n", "steps", "stepper", "workers", "options",
                      "tolerances"});

  RunConfig cfg;
  if (!j.contains("command")) fail("$", "missing required field \"command\"");
  if (!j["command"].is_string()) fail("command", "expected a string");
  cfg.command = j["command"].get<std::string>();
  bool known = false;
  for (const auto& c : command_names())
    if (c == cfg.command) known = true;
  if (!known) fail("command", "unknown command \"" + cfg.command + "\"");

  cfg.scenario = j.contains("scenario") ? j["scenario"] : json("SCEN-A");
  if (cfg.scenario.is_object())
    validate_inline_scenario(cfg.scenario);
  else if (!cfg.scenario.is_string())
    fail("scenario", "expected a preset name or an inline spec object");

  cfg.n = get_int(j, "$", "n", 200);
  if (cfg.n < 2) fail("n", "must be >= 2");
  cfg.steps = get_int(j, "$", "steps", 400);
  if (cfg.steps < 8) fail("steps", "must be >= 8");
  cfg.stepper = get_string(j, "$", "stepper", "auto");
  if (cfg.stepper != "auto" && cfg.stepper != "cn" && cfg.stepper != "rk4")
    fail("stepper", "expected auto|cn|rk4");
  cfg.workers = get_int(j, "$", "workers", 1);
  if (cfg.workers < 1) fail("workers", "must be >= 1");

  cfg.options = default_options(cfg.command, j.contains("options") ? j["options"] : json());
  json tol = j.contains("tolerances") ? j["tolerances"] : json::object();
  check_keys(tol, "tolerances", {"power_tol", "power_cap", "bias_rel_tol"});
  cfg.tolerances = json::object();
  cfg.tolerances["power_tol"] = get_double(tol, "tolerances", "power_tol", 1e-10);
  cfg.tolerances["power_cap"] = get_int(tol, "tolerances", "power_cap", 20000);
  cfg.tolerances["bias_rel_tol"] = get_double(tol, "tolerances", "bias_rel_tol", 1e-9);
  return cfg;
}

nlohmann::json RunConfig::resolved() const {
  json j;
  j["command"] = command;
  j["scenario"] = scenario;
  j["n"] = n;
  j["steps"] = steps;
  j["stepper"] = stepper;
  j["workers"] = workers;
  j["options"] = options;
  j["tolerances"] = tolerances;
  return j;
}

namespace {

void write_value(std::string& out, const json& j) {
  if (j.is_object()) {
    out += '{';
    bool first = true;
    for (auto it = j.cbegin(); it != j.cend(); ++it) {
      if (!first) out += ',';
      first = false;
      out += json(it.key()).dump();
      out += ':';
      write_value(out, it.value());
    }
    out += '}';
  } else if (j.is_array()) {
    out += '[';
    bool first = true;
    for (const auto& e : j) {
      if (!first) out += ',';
      first = false;
      write_value(out, e);
    }
    out += ']';
  } else if (j.is_number_float()) {
    double v = j.get<double>();
    if (std::isfinite(v)) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out += buf;
    } else {
      out += "null";
    }
  } else {
    out += j.dump();
  }
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string dump_json(const nlohmann::json& j) {
  std::string out;
  write_value(out, j);
  out += '\n';
  return out;
}

OperatorSpec spec_from_scenario(const nlohmann::json& scenario, const Resolution& res) {
  if (scenario.is_string()) {
    std::string name = scenario.get<std::string>();
    if (!is_operator_preset(name))
      throw std::invalid_argument("scenario: not an operator preset: " + name);
    return make_scenario(name, res);
  }
  const json& sc = scenario;
  int l = get_int(sc, "scenario", "l", 1);
  int dim = get_int(sc, "scenario", "dim", 1);
  Box box;
  box.dim = dim;
  if (sc.contains("bounds")) {
    const json& b = sc["bounds"];
    if (!b.is_array() || static_cast<int>(b.size()) != dim)
      fail("scenario.bounds", "expected one [lo,hi] pair per axis");
    for (int d = 0; d < dim; ++d) {
      box.lo[d] = b[d][0].get<double>();
      box.hi[d] = b[d][1].get<double>();
    }
  }
  OperatorSpec spec;
  spec.grid = build_spatial_grid(box, {res.n, res.n});
  spec.time = build_time_grid(res.steps);
  spec.tau = get_double(sc, "scenario", "tau", 1.0);
  spec.m = get_double(sc, "scenario", "m", 0.0);
  spec.sigma = get_double(sc, "scenario", "sigma", 1.0);
  std::string form = get_string(sc, "scenario", "form", "raw");
  spec.form = form == "scaled" ? CouplingForm::Scaled : CouplingForm::Raw;
  std::string bc = get_string(sc, "scenario", "bc", "raw");
  spec.bc = bc == "dirichlet" ? BCMode::Dirichlet
                              : (bc == "neumann" ? BCMode::Neumann : BCMode::Raw);

  auto parse_matrix_exprs = [&](const json& m, const std::string& path) {
    if (!m.is_array() || static_cast<int>(m.size()) != l) fail(path, "expected an l x l matrix");
    std::vector<std::vector<Expr>> rows;
    for (const auto& r : m) {
      if (!r.is_array() || static_cast<int>(r.size()) != l)
        fail(path, "expected an l x l matrix");
      std::vector<Expr> row;
      for (const auto& e : r) {
        if (!e.is_string()) fail(path, "expected expression strings");
        row.push_back(Expr::parse(e.get<std::string>()));
      }
      rows.push_back(std::move(row));
    }
    return rows;
  };
  auto Dx = parse_matrix_exprs(sc["D"], "scenario.D");
  auto Ax = parse_matrix_exprs(sc["A"], "scenario.A");
  MatrixFn Dfn = [Dx, l](const Point& x, double t) {
    Eigen::MatrixXd v(l, l);
    for (int i = 0; i < l; ++i)
      for (int j = 0; j < l; ++j) v(i, j) = Dx[i][j](x.x, x.y, t);
    return v;
  };
  MatrixFn Afn = [Ax, l](const Point& x, double t) {
    Eigen::MatrixXd v(l, l);
    for (int i = 0; i < l; ++i)
      for (int j = 0; j < l; ++j) v(i, j) = Ax[i][j](x.x, x.y, t);
    return v;
  };
  spec.D = sample_field(Dfn, l, spec.grid, spec.time);
  spec.A = sample_field(Afn, l, spec.grid, spec.time);

  if (sc.contains("C")) {
    const json& c = sc["C"];
    Eigen::MatrixXd C(l, l);
    for (int i = 0; i < l; ++i)
      for (int j = 0; j < l; ++j) C(i, j) = c[i][j].get<double>();
    spec.C = C;
  } else {
    spec.C = Eigen::MatrixXd::Identity(l, l);
  }

  KernelSet ks;
  ks.l = l;
  ks.dim = dim;
  if (static_cast<int>(sc["kernels"].size()) != l)
    fail("scenario.kernels", "expected one kernel per species");
  for (const auto& kj : sc["kernels"]) {
    std::string type = kj["type"].get<std::string>();
    if (type == "uniform") {
      ks.kernels.push_back(kernel_uniform(dim));
    } else if (type == "triangle") {
      ks.kernels.push_back(kernel_triangle(dim));
    } else if (type == "gaussian") {
      ks.kernels.push_back(kernel_truncated_gaussian(dim));
    } else if (type == "constant") {
      ks.kernels.push_back(kernel_constant(get_double(kj, "scenario.kernels[]", "value", 1.0)));
    } else {
      Expr f = Expr::parse(get_string(kj, "scenario.kernels[]", "f", "1"));
      Expr g = Expr::parse(get_string(kj, "scenario.kernels[]", "g", "1"));
      ks.kernels.push_back(kernel_rank_one(
          [f](const Point& p) { return f(p.x, p.y, 0.0); },
          [g](const Point& p) { return g(p.x, p.y, 0.0); }));
    }
  }
  spec.kernels = (spec.form == CouplingForm::Scaled && spec.sigma != 1.0)
                     ? rescale_kernel(ks, spec.sigma)
                     : ks;
  spec.prepare();
  return spec;
}

SteppingOptions stepping_options(const RunConfig& cfg) {
  SteppingOptions opts;
  if (cfg.stepper == "cn") opts.stepper = Stepper::CrankNicolson;
  if (cfg.stepper == "rk4") opts.stepper = Stepper::RK4;
  opts.power_tol = cfg.tolerances["power_tol"].get<double>();
  opts.power_cap = cfg.tolerances["power_cap"].get<int>();
  opts.bias_rel_tol = cfg.tolerances["bias_rel_tol"].get<double>();
  return opts;
}

namespace {

json spectral_to_json(const SpectralResult& sb) {
  json j;
  j["s"] = sb.s;
  j["rho"] = sb.rho;
  j["residual"] = sb.residual;
  j["power_iters"] = sb.power_iters;
  j["converged"] = sb.converged;
  j["gap_estimate"] = sb.gap_estimate;
  j["is_principal_eigenvalue"] = sb.is_principal_eigenvalue;
  j["principal_reason"] = sb.principal_reason;
  j["cw_lower"] = sb.cw_lower;
  j["cw_upper"] = sb.cw_upper;
  j["clipped_magnitude"] = sb.clipped_magnitude;
  j["stepper"] = sb.stepper_used == Stepper::CrankNicolson ? "cn" : "rk4";
  j["steps_used"] = sb.steps_used;
  return j;
}

std::string sweep_csv(const SweepResult& sw) {
  std::string csv = "param,s,residual,iters,converged,refused,note\n";
  for (const auto& r : sw.rows) {
    csv += fmt17(r.param) + "," + fmt17(r.s) + "," + fmt17(r.residual) + "," +
           std::to_string(r.iters) + "," + (r.converged ? "1" : "0") + "," +
           (r.refused ? "1" : "0") + "," + r.note + "\n";
  }
  return csv;
}

json sweep_json(const SweepResult& sw) {
  json j;
  j["parameter"] = sw.parameter;
  j["predicted_limit"] = sw.predicted_limit;
  j["provenance"] = sw.provenance;
  j["extrapolated"] = sw.extrapolated;
  j["target_gap"] = sw.target_gap;
  j["monotonicity_violations"] = sw.monotonicity_violations;
  json pts = json::array();
  for (const auto& r : sw.rows) {
    json p;
    p["param"] = r.param;
    p["s"] = r.s;
    p["converged"] = r.converged;
    p["refused"] = r.refused;
    pts.push_back(p);
  }
  j["points"] = pts;
  return j;
}

std::string state_csv(const StateField& f, const SpatialGrid& grid, int l, int thin) {
  std::string csv = "t,node,species,value\n";
  int steps = f.knots() - 1;
  for (int k = 0; k <= steps; k += std::max(1, thin)) {
    double t = static_cast<double>(k) / steps;
    for (int p = 0; p < grid.n(); ++p)
      for (int i = 0; i < l; ++i)
        csv += fmt17(t) + "," + std::to_string(p) + "," + std::to_string(i) + "," +
               fmt17(f.u[k][p * l + i]) + "\n";
  }
  return csv;
}

}  // namespace

int run(const RunConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  Resolution res{cfg.n, cfg.steps};
  SteppingOptions opts = stepping_options(cfg);
  int exit_code = 0;
  json results;
  std::string csv;
  results["command"] = cfg.command;

  auto t0 = std::chrono::steady_clock::now();

  if (cfg.command == "spectrum") {
    OperatorSpec spec = spec_from_scenario(cfg.scenario, res);
    SpectralResult sb = spectral_bound(spec, opts);
    results["spectrum"] = spectral_to_json(sb);
    if (cfg.options["adjoint"].get<bool>()) {
      SpectralResult asb = adjoint_spectral_bound(spec, opts);
      results["adjoint"] = spectral_to_json(asb);
      results["adjoint_primal_gap"] = std::abs(asb.s - sb.s);
    }
    csv = "s,residual,iters\n" + fmt17(sb.s) + "," + fmt17(sb.residual) + "," +
          std::to_string(sb.power_iters) + "\n";
  } else if (cfg.command == "existence") {
    OperatorSpec spec = spec_from_scenario(cfg.scenario, res);
    ExistenceReport rep = existence_criteria(spec, opts);
    json j;
    j["s"] = rep.s;
    j["s_N"] = rep.s_N;
    j["criterion_i"] = rep.criterion_i;
    j["criterion_ii"] = rep.criterion_ii;
    j["alpha_witness"] = rep.alpha_witness;
    j["r_at_witness"] = rep.r_at_witness;
    j["nonintegrable_flag"] = rep.nonintegrable_flag;
    j["contact_exponent"] = rep.contact_exponent;
    j["flat_profile"] = rep.flat_profile;
    j["simplicity"] = rep.simplicity;
    j["is_principal_eigenvalue"] = rep.is_principal_eigenvalue;
    j["reason"] = rep.reason;
    results["existence"] = j;
    csv = "s,s_N,criterion_i,criterion_ii,nonintegrable\n" + fmt17(rep.s) + "," + fmt17(rep.s_N) +
          "," + (rep.criterion_i ? "1" : "0") + "," + (rep.criterion_ii ? "1" : "0") + "," +
          (rep.nonintegrable_flag ? "1" : "0") + "\n";
  } else if (cfg.command == "approx") {
    OperatorSpec spec = spec_from_scenario(cfg.scenario, res);
    SandwichTable table = sandwich_check(spec, cfg.options["levels"].get<int>(),
                                         cfg.options["eps0"].get<double>(), opts);
    csv = "k,epsilon,delta_max,s_lower,s_mid,s_upper,gap\n";
    json rows = json::array();
    for (const auto& r : table.rows) {
      csv += std::to_string(r.level) + "," + fmt17(r.epsilon) + "," + fmt17(r.delta_max) +
             "," + fmt17(r.s_lower) + "," + fmt17(r.s_mid) + "," + fmt17(r.s_upper) + "," +
             fmt17(r.gap) + "\n";
      json jr;
      jr["level"] = r.level;
      jr["epsilon"] = r.epsilon;
      jr["s_lower"] = r.s_lower;
      jr["s_mid"] = r.s_mid;
      jr["s_upper"] = r.s_upper;
      jr["gap"] = r.gap;
      jr["nonintegrable_flag"] = r.nonintegrable_flag;
      rows.push_back(jr);
    }
    results["approx"] = {{"sandwich_ok", table.sandwich_ok},
                         {"gaps_shrinking", table.gaps_shrinking},
                         {"rows", rows}};
    if (!table.sandwich_ok) exit_code = 2;
  } else if (cfg.command == "certify") {
    OperatorSpec spec = spec_from_scenario(cfg.scenario, res);
    EqualityReport rep = certify_equality(spec, cfg.options["tol"].get<double>(), opts);
    json j;
    j["lambda_p_est"] = rep.lambda_p_est;
    j["lambda_p_prime_est"] = rep.lambda_p_prime_est;
    j["s"] = rep.s;
    j["max_gap"] = rep.max_gap;
    j["used_approximation"] = rep.used_approximation;
    j["certified"] = rep.certified;
    j["note"] = rep.note;
    results["certify"] = j;
    csv = "lambda_p,lambda_p_prime,s,max_gap\n" + fmt17(rep.lambda_p_est) + "," +
          fmt17(rep.lambda_p_prime_est) + "," + fmt17(rep.s) + "," + fmt17(rep.max_gap) + "\n";
    if (!rep.certified) exit_code = 2;
  } else if (cfg.command == "sweep-rate") {
    OperatorSpec spec = spec_from_scenario(cfg.scenario, res);
    std::vector<double> scales = get_list(cfg.options, "options", "scales");
    SweepResult sw = sweep_dispersal_rate(spec, scales, opts, cfg.workers);
    results["sweep"] = sweep_json(sw);
    csv = sweep_csv(sw);
  } else if (cfg.command == "sweep-range") {
    OperatorSpec spec = spec_from_scenario(cfg.scenario, res);
    std::vector<double> sigmas = get_list(cfg.options, "options", "sigmas");
    SweepResult sw =
        sweep_dispersal_range(spec, sigmas, cfg.options["m"].get<double>(), opts, cfg.workers);
    results["sweep"] = sweep_json(sw);
    csv = sweep_csv(sw);
  } else if (cfg.command == "sweep-freq") {
    OperatorSpec spec = spec_from_scenario(cfg.scenario, res);
    std::vector<double> taus = get_list(cfg.options, "options", "taus");
    SweepResult sw = sweep_frequency(spec, taus, nullptr, opts, cfg.workers);
    json j = sweep_json(sw);
    j["frozen_average"] = sw.frozen_average;
    j["lower_bound_constant"] = sw.lower_bound_constant;
    results["sweep"] = j;
    csv = sweep_csv(sw);
  } else if (cfg.command == "local-eigen") {
    OperatorSpec spec = spec_from_scenario(cfg.scenario, res);
    LocalProblem lp = local_problem_from_spec(spec);
    SpectralResult sb = local_principal_eigen(lp, opts);
    results["local"] = spectral_to_json(sb);
    csv = "lambda_local\n" + fmt17(sb.s) + "\n";
  } else if (cfg.command == "zika") {
    if (!cfg.scenario.is_string() || !is_zika_preset(cfg.scenario.get<std::string>()))
      throw std::invalid_argument("zika: scenario must be one of Z-(i), Z-(ii), Z-(iii)");
    ZikaParams zp = make_zika_preset(cfg.scenario.get<std::string>(), res);
    Expr h0 = Expr::parse(cfg.options["h0"].get<std::string>());
    Expr vu0 = Expr::parse(cfg.options["vu0"].get<std::string>());
    Expr vi0 = Expr::parse(cfg.options["vi0"].get<std::string>());
    Eigen::VectorXd u0(3 * zp.grid.n());
    for (int p = 0; p < zp.grid.n(); ++p) {
      const Point& x = zp.grid.nodes[p];
      u0[3 * p + 0] = h0(x.x, x.y, 0.0);
      u0[3 * p + 1] = vu0(x.x, x.y, 0.0);
      u0[3 * p + 2] = vi0(x.x, x.y, 0.0);
    }
    ZikaClassification cls =
        classify_zika(zp, u0, cfg.options["periods"].get<int>(), opts);
    json j;
    j["verdict"] = cls.verdict_name;
    j["s_L0"] = cls.thresholds.s_L0;
    if (cls.thresholds.s_L1_defined) j["s_L1"] = cls.thresholds.s_L1;
    j["evidence"] = cls.evidence;
    j["evidence_note"] = cls.evidence_note;
    j["periods_run"] = cls.periods_run;
    results["zika"] = j;
    if (cls.final_period.knots() > 0)
      csv = state_csv(cls.final_period, zp.grid, 3, cfg.options["thin"].get<int>());
    else
      csv = "t,node,species,value\n";
  } else if (cfg.command == "stemcell") {
    if (!cfg.scenario.is_string() || !is_stemcell_preset(cfg.scenario.get<std::string>()))
      throw std::invalid_argument(
          "stemcell: scenario must be one of S-n0-decay, S-n0-neutral, S-n2-persist");
    StemCellParams sp = make_stemcell_preset(cfg.scenario.get<std::string>(), res);
    Expr q0 = Expr::parse(cfg.options["q0"].get<std::string>());
    Eigen::VectorXd Q0(sp.grid.n() * sp.l);
    for (int p = 0; p < sp.grid.n(); ++p)
      for (int i = 0; i < sp.l; ++i)
        Q0[p * sp.l + i] = q0(sp.grid.nodes[p].x, sp.grid.nodes[p].y, 0.0);
    StemCellClassification cls =
        classify_stemcell(sp, Q0, cfg.options["periods"].get<int>(), opts);
    json j;
    j["verdict"] = cls.verdict_name;
    j["s"] = cls.s;
    j["evidence"] = cls.evidence;
    j["evidence_note"] = cls.evidence_note;
    j["rate_fit"] = cls.rate_fit;
    j["c_pairing"] = cls.c_pairing;
    j["periods_run"] = cls.periods_run;
    results["stemcell"] = j;
    if (cls.final_period.knots() > 0)
      csv = state_csv(cls.final_period, sp.grid, sp.l, cfg.options["thin"].get<int>());
    else
      csv = "t,node,species,value\n";
  } else if (cfg.command == "convergence") {
    LinearIVP ivp;
    ivp.grid = build_spatial_grid_1d(0.0, 1.0, res.n);
    ivp.time = build_time_grid(res.steps);
    ivp.tau = 1.0;
    ivp.kernels = {1, 1, {kernel_uniform(1)}};
    Expr dx = Expr::parse(cfg.options["d"].get<std::string>());
    Expr ax = Expr::parse(cfg.options["a"].get<std::string>());
    Expr ux = Expr::parse(cfg.options["u0"].get<std::string>());
    ivp.d = [dx](const Point& x, double t) { return dx(x.x, x.y, t); };
    ivp.a = [ax](const Point& x, double t) { return ax(x.x, x.y, t); };
    ivp.u0 = [ux](const Point& x) { return ux(x.x, x.y, 0.0); };
    std::vector<double> sigmas = get_list(cfg.options, "options", "sigmas");
    IvpErrorTable table =
        nonlocal_to_local_ivp_error(ivp, sigmas, cfg.options["T"].get<double>());
    csv = "sigma,sup_error\n";
    json rows = json::array();
    for (const auto& r : table.rows) {
      csv += fmt17(r.sigma) + "," + fmt17(r.sup_error) + "\n";
      rows.push_back({{"sigma", r.sigma}, {"sup_error", r.sup_error}});
    }
    results["convergence"] = {{"rows", rows},
                              {"fitted_exponent", table.fitted_exponent},
                              {"strictly_decreasing", table.strictly_decreasing}};
  }

  auto t1 = std::chrono::steady_clock::now();

  std::ofstream(fs::path(out_dir) / "resolved-config.json") << dump_json(cfg.resolved());
  std::ofstream(fs::path(out_dir) / "results.json") << dump_json(results);
  std::ofstream(fs::path(out_dir) / "results.csv") << csv;
  // wall-clock data lives outside the deterministic outputs
  json timings;
  timings["total_seconds"] =
      std::chrono::duration_cast<std::chrono::duration<double>>(t1 - t0).count();
  std::ofstream(fs::path(out_dir) / "timings.json") << timings.dump() << "\n";
  return exit_code;
}

}  // namespace nls
