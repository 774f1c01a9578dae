#include "nls/presets.hpp"

#include <cmath>
#include <stdexcept>

#include "nls/floquet.hpp"

namespace nls {

namespace {

// distance from t to the nearest integer; periodic triangular profile
double perdist(double t) { return std::abs(t - std::round(t)); }

OperatorSpec base_raw_scalar(const Resolution& res) {
  OperatorSpec spec;
  spec.form = CouplingForm::Raw;
  spec.tau = 1.0;
  spec.grid = build_spatial_grid_1d(0.0, 1.0, res.n);
  spec.time = build_time_grid(res.steps);
  return spec;
}

MatrixFn scalar_fn(const std::function<double(const Point&, double)>& f) {
  return [f](const Point& x, double t) { return Eigen::MatrixXd::Constant(1, 1, f(x, t)); };
}

}  // namespace

bool is_operator_preset(const std::string& name) {
  return name == "SCEN-A" || name == "SCEN-B" || name == "SCEN-C" || name == "SCEN-D" ||
         name == "SCEN-E" || name == "SCEN-F" || name == "SCEN-G" || name == "SCEN-L" ||
         name == "SCEN-L2";
}

bool is_zika_preset(const std::string& name) {
  return name == "Z-(i)" || name == "Z-(ii)" || name == "Z-(iii)";
}

bool is_stemcell_preset(const std::string& name) {
  return name == "S-n0-decay" || name == "S-n0-neutral" || name == "S-n2-persist";
}

std::vector<std::string> preset_names() {
  return {"SCEN-A",  "SCEN-B",  "SCEN-C",  "SCEN-D",      "SCEN-E",        "SCEN-F",
          "SCEN-G",  "SCEN-L",  "SCEN-L2", "Z-(i)",       "Z-(ii)",        "Z-(iii)",
          "S-n0-decay", "S-n0-neutral", "S-n2-persist"};
}

OperatorSpec make_scenario(const std::string& name, const Resolution& res) {
  if (name == "SCEN-A" || name == "SCEN-C") {
    OperatorSpec spec = base_raw_scalar(res);
    spec.D = constant_field(Eigen::MatrixXd::Constant(1, 1, 1.0), spec.grid, spec.time);
    if (name == "SCEN-A")
      spec.A = constant_field(Eigen::MatrixXd::Zero(1, 1), spec.grid, spec.time);
    else
      spec.A = sample_field(
          scalar_fn([](const Point&, double t) { return std::sin(2.0 * M_PI * t); }), 1,
          spec.grid, spec.time);
    spec.kernels = {1, 1, {kernel_constant(1.0)}};
    spec.prepare();
    return spec;
  }
  if (name == "SCEN-B") {
    OperatorSpec spec = base_raw_scalar(res);
    spec.D = constant_field(Eigen::MatrixXd::Constant(1, 1, 1.0), spec.grid, spec.time);
    spec.A = constant_field(Eigen::MatrixXd::Zero(1, 1), spec.grid, spec.time);
    auto f = [](const Point& x) { return 1.0 + x.x; };
    spec.kernels = {1, 1, {kernel_rank_one(f, f)}};
    spec.prepare();
    return spec;
  }
  if (name == "SCEN-D") {
    OperatorSpec spec = base_raw_scalar(res);
    spec.D = constant_field(Eigen::MatrixXd::Identity(2, 2), spec.grid, spec.time);
    Eigen::MatrixXd A(2, 2);
    A << 0, 1, 1, 0;
    spec.A = constant_field(A, spec.grid, spec.time);
    spec.kernels = {2, 1, {kernel_constant(1.0), kernel_constant(1.0)}};
    spec.prepare();
    return spec;
  }
  if (name == "SCEN-E") {
    OperatorSpec spec = base_raw_scalar(res);
    spec.form = CouplingForm::Scaled;
    spec.C = Eigen::MatrixXd::Ones(1, 1);
    spec.m = 2.0;
    spec.sigma = 1.0;
    spec.D = constant_field(Eigen::MatrixXd::Constant(1, 1, 6.0), spec.grid, spec.time);
    spec.A = constant_field(Eigen::MatrixXd::Zero(1, 1), spec.grid, spec.time);
    spec.kernels = {1, 1, {kernel_uniform(1)}};
    spec.bc = BCMode::Dirichlet;
    spec.prepare();
    return spec;
  }
  if (name == "SCEN-F") {
    OperatorSpec spec = base_raw_scalar(res);
    spec.form = CouplingForm::Scaled;
    spec.C = Eigen::MatrixXd::Ones(1, 1);
    spec.m = 0.0;
    spec.sigma = 0.5;
    spec.D = constant_field(Eigen::MatrixXd::Constant(1, 1, 1.0), spec.grid, spec.time);
    spec.A = sample_field(scalar_fn([](const Point& x, double) {
                            return 4.0 - (x.x - 0.5) * (x.x - 0.5);
                          }),
                          1, spec.grid, spec.time);
    KernelSet base{1, 1, {kernel_uniform(1)}};
    spec.kernels = rescale_kernel(base, 0.5);
    spec.bc = BCMode::Dirichlet;
    spec.prepare();
    return spec;
  }
  if (name == "SCEN-G") {
    // symmetric 2x2: constant symmetric rates, one symmetric normalized kernel;
    // the frequency-sweep workhorse
    OperatorSpec spec = base_raw_scalar(res);
    spec.form = CouplingForm::Scaled;
    spec.m = 0.0;
    spec.sigma = 0.5;
    spec.C = Eigen::MatrixXd(2, 2);
    spec.C << 1.0, 0.3, 0.3, 1.0;
    spec.D = constant_field(Eigen::MatrixXd::Identity(2, 2), spec.grid, spec.time);
    spec.A = sample_field(
        [](const Point&, double t) {
          Eigen::MatrixXd a(2, 2);
          a(0, 0) = 0.6 + 0.4 * std::sin(2.0 * M_PI * t);
          a(1, 1) = 0.4 + 0.3 * std::cos(2.0 * M_PI * t);
          a(0, 1) = a(1, 0) = 0.3;
          return a;
        },
        2, spec.grid, spec.time);
    KernelSet base{2, 1, {kernel_uniform(1), kernel_uniform(1)}};
    spec.kernels = rescale_kernel(base, 0.5);
    spec.bc = BCMode::Raw;
    spec.prepare();
    return spec;
  }
  if (name == "SCEN-L") {
    // Lipschitz, non-smooth in t: triangular kink at t = 1/2 (and t = 0)
    OperatorSpec spec = base_raw_scalar(res);
    spec.D = constant_field(Eigen::MatrixXd::Constant(1, 1, 1.0), spec.grid, spec.time);
    spec.A = sample_field(
        scalar_fn([](const Point&, double t) { return 4.0 - 0.4 * perdist(t - 0.5); }), 1,
        spec.grid, spec.time);
    spec.kernels = {1, 1, {kernel_constant(1.0)}};
    spec.prepare();
    return spec;
  }
  if (name == "SCEN-L2") {
    OperatorSpec spec = base_raw_scalar(res);
    spec.D = constant_field(0.5 * Eigen::MatrixXd::Identity(2, 2), spec.grid, spec.time);
    spec.A = sample_field(
        [](const Point&, double t) {
          Eigen::MatrixXd a(2, 2);
          a(0, 0) = 1.0 - 0.4 * perdist(t - 0.5);
          a(1, 1) = 0.8 - 0.2 * perdist(t - 0.3);
          a(0, 1) = a(1, 0) = 0.5;
          return a;
        },
        2, spec.grid, spec.time);
    spec.kernels = {2, 1, {kernel_constant(1.0), kernel_constant(1.0)}};
    spec.prepare();
    return spec;
  }
  throw std::invalid_argument("unknown operator preset: " + name);
}

ZikaParams make_zika_preset(const std::string& name, const Resolution& res) {
  ZikaParams zp;
  zp.grid = build_spatial_grid_1d(0.0, 1.0, res.n);
  zp.time = build_time_grid(res.steps);
  zp.tau = 1.0;
  zp.sigma = 1.0;
  zp.m = 0.0;
  zp.kernels = {2, 1, {kernel_uniform(1), kernel_uniform(1)}};
  zp.H_u = [](const Point& x) { return 1.0 + 0.2 * std::cos(2.0 * M_PI * x.x); };
  zp.mu = [](const Point&, double) { return 1.0; };

  if (name == "Z-(i)") {
    zp.d1 = [](const Point&, double) { return 0.2; };
    zp.d2 = [](const Point&, double) { return 0.2; };
    zp.rho = [](const Point&, double) { return 0.3; };
    zp.sigma1 = [](const Point&, double) { return 2.0; };
    zp.sigma2 = [](const Point&, double) { return 2.0; };
    zp.beta = [](const Point&, double t) { return 1.2 * (1.0 + 0.3 * std::sin(2.0 * M_PI * t)); };
    return zp;
  }
  if (name == "Z-(ii)") {
    zp.d1 = [](const Point&, double) { return 0.2; };
    zp.d2 = [](const Point&, double) { return 0.2; };
    zp.rho = [](const Point&, double) { return 0.6; };
    zp.sigma1 = [](const Point&, double) { return 0.05; };
    zp.sigma2 = [](const Point&, double) { return 0.05; };
    zp.beta = [](const Point&, double t) { return 1.2 * (1.0 + 0.3 * std::sin(2.0 * M_PI * t)); };
    return zp;
  }
  if (name == "Z-(iii)") {
    zp.d1 = [](const Point&, double) { return 1.0; };
    zp.d2 = [](const Point&, double) { return 1.0; };
    zp.rho = [](const Point&, double) { return 0.6; };
    zp.sigma1 = [](const Point&, double) { return 0.5; };
    zp.sigma2 = [](const Point&, double) { return 0.5; };
    zp.beta = [](const Point&, double t) { return 0.05 * (1.0 + 0.3 * std::sin(2.0 * M_PI * t)); };
    return zp;
  }
  throw std::invalid_argument("unknown zika preset: " + name);
}

StemCellParams make_stemcell_preset(const std::string& name, const Resolution& res) {
  StemCellParams sp;
  sp.grid = build_spatial_grid_1d(0.0, 1.0, res.n);
  sp.time = build_time_grid(res.steps);
  sp.tau = 1.0;

  if (name == "S-n0-decay") {
    sp.l = 1;
    sp.c = Eigen::MatrixXd::Constant(1, 1, 1.0);
    sp.beta = {[](const Point&, double) { return 1.0; }};
    sp.kappa = {[](const Point&, double) { return 2.0; }};
    sp.kernels = {1, 1, {kernel_constant(1.0)}};
    sp.n_exp = 0.0;
    return sp;
  }
  if (name == "S-n0-neutral") {
    sp.l = 1;
    sp.c = Eigen::MatrixXd::Constant(1, 1, 1.4);
    sp.beta = {[](const Point&, double) { return 1.0; }};
    sp.kappa = {[](const Point&, double) { return 0.5; }};
    sp.kernels = {1, 1, {kernel_constant(1.0)}};
    sp.n_exp = 0.0;
    // shift the removal rate by the computed s so the spectrum point is 0
    double s0 = spectral_bound(stemcell_Ln_spec(sp)).s;
    double kappa_shifted = 0.5 + s0;
    if (!(kappa_shifted > 0.0))
      throw std::runtime_error("S-n0-neutral: shifted removal rate not positive");
    sp.kappa = {[kappa_shifted](const Point&, double) { return kappa_shifted; }};
    return sp;
  }
  if (name == "S-n2-persist") {
    sp.l = 2;
    sp.c = Eigen::MatrixXd(2, 2);
    sp.c << 1.0, 0.3, 0.3, 1.0;
    sp.beta = {[](const Point&, double t) { return 1.0 * (1.0 + 0.2 * std::sin(2.0 * M_PI * t)); },
               [](const Point&, double t) { return 0.8 * (1.0 + 0.2 * std::sin(2.0 * M_PI * t)); }};
    sp.kappa = {[](const Point&, double) { return 1.0; },
                [](const Point&, double) { return 1.0; }};
    sp.kernels = {2, 1, {kernel_constant(1.0), kernel_constant(1.0)}};
    sp.n_exp = 2.0;
    return sp;
  }
  throw std::invalid_argument("unknown stem cell preset: " + name);
}

}  // namespace nls
