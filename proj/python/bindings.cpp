#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "nls/asymptotics.hpp"
#include "nls/cli_io.hpp"
#include "nls/local_limit.hpp"
#include "nls/models.hpp"
#include "nls/presets.hpp"
#include "nls/variational.hpp"

namespace py = pybind11;
using namespace nls;

namespace {

nlohmann::json scenario_json(const std::string& scenario) {
  if (!scenario.empty() && scenario.front() == '{') return nlohmann::json::parse(scenario);
  return nlohmann::json(scenario);
}

OperatorSpec spec_of(const std::string& scenario, int n, int steps) {
  return spec_from_scenario(scenario_json(scenario), Resolution{n, steps});
}

py::dict to_dict(const SpectralResult& sb) {
  py::dict d;
  d["s"] = sb.s;
  d["rho"] = sb.rho;
  d["residual"] = sb.residual;
  d["power_iters"] = sb.power_iters;
  d["converged"] = sb.converged;
  d["gap_estimate"] = sb.gap_estimate;
  d["is_principal_eigenvalue"] = sb.is_principal_eigenvalue;
  d["principal_reason"] = sb.principal_reason;
  d["cw_lower"] = sb.cw_lower;
  d["cw_upper"] = sb.cw_upper;
  return d;
}

py::dict to_dict(const SweepResult& sw) {
  py::dict d;
  d["parameter"] = sw.parameter;
  d["predicted_limit"] = sw.predicted_limit;
  d["provenance"] = sw.provenance;
  d["extrapolated"] = sw.extrapolated;
  d["target_gap"] = sw.target_gap;
  d["monotonicity_violations"] = sw.monotonicity_violations;
  py::list rows;
  for (const auto& r : sw.rows) {
    py::dict rd;
    rd["param"] = r.param;
    rd["s"] = r.s;
    rd["converged"] = r.converged;
    rd["refused"] = r.refused;
    rows.append(rd);
  }
  d["rows"] = rows;
  return d;
}

}  // namespace

PYBIND11_MODULE(_nlspec, m) {
  m.doc() = "Principal spectrum points of time-periodic cooperative nonlocal dispersal operators";

  m.def("preset_names", &preset_names);
  m.def("command_names", &command_names);

  m.def(
      "spectrum",
      [](const std::string& scenario, int n, int steps) {
        return to_dict(spectral_bound(spec_of(scenario, n, steps)));
      },
      py::arg("scenario"), py::arg("n") = 200, py::arg("steps") = 400,
      "Principal spectrum point of a preset or inline JSON scenario");

  m.def(
      "adjoint_spectrum",
      [](const std::string& scenario, int n, int steps) {
        return to_dict(adjoint_spectral_bound(spec_of(scenario, n, steps)));
      },
      py::arg("scenario"), py::arg("n") = 200, py::arg("steps") = 400);

  m.def(
      "existence",
      [](const std::string& scenario, int n, int steps) {
        ExistenceReport rep = existence_criteria(spec_of(scenario, n, steps));
        py::dict d;
        d["s"] = rep.s;
        d["s_N"] = rep.s_N;
        d["criterion_i"] = rep.criterion_i;
        d["criterion_ii"] = rep.criterion_ii;
        d["alpha_witness"] = rep.alpha_witness;
        d["nonintegrable_flag"] = rep.nonintegrable_flag;
        d["contact_exponent"] = rep.contact_exponent;
        d["simplicity"] = rep.simplicity;
        d["is_principal_eigenvalue"] = rep.is_principal_eigenvalue;
        d["reason"] = rep.reason;
        return d;
      },
      py::arg("scenario"), py::arg("n") = 200, py::arg("steps") = 400);

  m.def(
      "certify",
      [](const std::string& scenario, double tol, int n, int steps) {
        EqualityReport rep = certify_equality(spec_of(scenario, n, steps), tol);
        py::dict d;
        d["lambda_p"] = rep.lambda_p_est;
        d["lambda_p_prime"] = rep.lambda_p_prime_est;
        d["s"] = rep.s;
        d["max_gap"] = rep.max_gap;
        d["certified"] = rep.certified;
        d["used_approximation"] = rep.used_approximation;
        return d;
      },
      py::arg("scenario"), py::arg("tol") = 1e-6, py::arg("n") = 200, py::arg("steps") = 400);

  m.def(
      "lambda_local",
      [](const std::string& scenario, int n, int steps) {
        return local_principal_eigen(local_problem_from_spec(spec_of(scenario, n, steps))).s;
      },
      py::arg("scenario"), py::arg("n") = 200, py::arg("steps") = 400,
      "Principal eigenvalue of the matching local Dirichlet problem");

  m.def(
      "sweep_rate",
      [](const std::string& scenario, const std::vector<double>& scales, int n, int steps,
         int workers) {
        return to_dict(sweep_dispersal_rate(spec_of(scenario, n, steps), scales, {}, workers));
      },
      py::arg("scenario"), py::arg("scales"), py::arg("n") = 200, py::arg("steps") = 400,
      py::arg("workers") = 1);

  m.def(
      "sweep_range",
      [](const std::string& scenario, const std::vector<double>& sigmas, double m_exp, int n,
         int steps, int workers) {
        return to_dict(
            sweep_dispersal_range(spec_of(scenario, n, steps), sigmas, m_exp, {}, workers));
      },
      py::arg("scenario"), py::arg("sigmas"), py::arg("m") = 2.0, py::arg("n") = 200,
      py::arg("steps") = 400, py::arg("workers") = 1);

  m.def(
      "sweep_freq",
      [](const std::string& scenario, const std::vector<double>& taus, int n, int steps,
         int workers) {
        SweepResult sw = sweep_frequency(spec_of(scenario, n, steps), taus, nullptr, {}, workers);
        py::dict d = to_dict(sw);
        d["frozen_average"] = sw.frozen_average;
        d["lower_bound_constant"] = sw.lower_bound_constant;
        return d;
      },
      py::arg("scenario"), py::arg("taus"), py::arg("n") = 200, py::arg("steps") = 400,
      py::arg("workers") = 1);

  m.def(
      "classify_zika",
      [](const std::string& preset, int n, int steps, int periods) {
        ZikaParams zp = make_zika_preset(preset, Resolution{n, steps});
        Eigen::VectorXd u0(3 * zp.grid.n());
        for (int p = 0; p < zp.grid.n(); ++p) {
          u0[3 * p + 0] = 0.1;
          u0[3 * p + 1] = 0.5;
          u0[3 * p + 2] = 0.1;
        }
        ZikaClassification cls = classify_zika(zp, u0, periods);
        py::dict d;
        d["verdict"] = cls.verdict_name;
        d["s_L0"] = cls.thresholds.s_L0;
        if (cls.thresholds.s_L1_defined) d["s_L1"] = cls.thresholds.s_L1;
        d["evidence"] = cls.evidence;
        d["periods_run"] = cls.periods_run;
        return d;
      },
      py::arg("preset"), py::arg("n") = 100, py::arg("steps") = 200, py::arg("periods") = 200);

  m.def(
      "classify_stemcell",
      [](const std::string& preset, int n, int steps, int periods) {
        StemCellParams sp = make_stemcell_preset(preset, Resolution{n, steps});
        Eigen::VectorXd Q0 = Eigen::VectorXd::Ones(sp.grid.n() * sp.l);
        StemCellClassification cls = classify_stemcell(sp, Q0, periods);
        py::dict d;
        d["verdict"] = cls.verdict_name;
        d["s"] = cls.s;
        d["evidence"] = cls.evidence;
        d["rate_fit"] = cls.rate_fit;
        d["c_pairing"] = cls.c_pairing;
        d["periods_run"] = cls.periods_run;
        return d;
      },
      py::arg("preset"), py::arg("n") = 100, py::arg("steps") = 200, py::arg("periods") = 200);

  m.def(
      "run",
      [](const std::string& config, const std::string& out_dir) {
        return run(parse_config(config), out_dir);
      },
      py::arg("config"), py::arg("out_dir"),
      "Full dispatch: writes resolved-config.json, results.json, results.csv");

  m.attr("__version__") = "0.1.0";
}
