// Acceptance suite: one pass/fail line per criterion, pinned tolerances.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "nls/approximation.hpp"
#include "nls/asymptotics.hpp"
#include "nls/cli_io.hpp"
#include "nls/local_limit.hpp"
#include "nls/models.hpp"
#include "nls/presets.hpp"
#include "nls/variational.hpp"

using namespace nls;

namespace {

int g_failed = 0;

void report(int num, bool ok, const std::string& detail) {
  std::printf("[criterion %02d] %s — %s\n", num, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failed;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::duration<double>>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void criterion_1() {
  bool ok = true;
  std::ostringstream note;
  struct Case {
    const char* name;
    double want;
    double tol;
  } cases[] = {{"SCEN-A", 1.0, 1e-6}, {"SCEN-B", 7.0 / 3.0, 2e-3}, {"SCEN-D", 2.0, 1e-6}};
  for (const auto& c : cases) {
    auto t0 = std::chrono::steady_clock::now();
    SpectralResult sb = spectral_bound(make_scenario(c.name, {200, 400}));
    double el = seconds_since(t0);
    bool good = std::abs(sb.s - c.want) <= c.tol && el < 5.0;
    ok = ok && good;
    note << c.name << " s=" << fmt(sb.s) << " (" << fmt(el) << "s) ";
  }
  report(1, ok, "closed-form spectra: " + note.str());
}

void criterion_2() {
  bool ok = true;
  std::ostringstream note;
  const char* presets[] = {"SCEN-A", "SCEN-B", "SCEN-C", "SCEN-D", "SCEN-E", "SCEN-F", "SCEN-G"};
  for (const char* name : presets) {
    Resolution res = std::string(name) == "SCEN-G" ? Resolution{100, 400} : Resolution{200, 400};
    SpectralResult sb = spectral_bound(make_scenario(name, res));
    bool identity =
        std::isfinite(sb.rho) &&
        std::abs(sb.s - 1.0 * std::log(sb.rho)) <= 1e-11 * std::max(1.0, std::abs(sb.s));
    bool resid = sb.residual <= 1e-6;
    ok = ok && identity && resid;
    note << name << " resid=" << fmt(sb.residual) << (identity && resid ? " " : " [BAD] ");
  }
  report(2, ok, "Floquet identity s = tau ln rho and residuals <= 1e-6: " + note.str());
}

OperatorSpec random_spec(std::mt19937& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int l = unif(rng) < 0.5 ? 1 : 2;
  int n = 25 + static_cast<int>(unif(rng) * 60);
  OperatorSpec spec;
  spec.form = CouplingForm::Raw;
  spec.tau = 0.5 + unif(rng);
  spec.grid = build_spatial_grid_1d(0.0, 1.0, n);
  spec.time = build_time_grid(64);
  spec.l = l;

  double osc = unif(rng) < 0.5 ? 0.3 * unif(rng) : 0.0;  // time-periodic half the time
  double base = 0.5 + unif(rng);
  Eigen::MatrixXd offd = Eigen::MatrixXd::Zero(l, l);
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < l; ++j) offd(i, j) = i == j ? 0.4 + unif(rng) : 0.3 * unif(rng);
  spec.D = sample_field(
      [offd](const Point&, double) { return offd; }, l, spec.grid, spec.time);
  double a0 = unif(rng) - 0.5, a1 = 0.4 * unif(rng);
  spec.A = sample_field(
      [l, a0, a1, osc](const Point& x, double t) {
        Eigen::MatrixXd v(l, l);
        for (int i = 0; i < l; ++i)
          for (int j = 0; j < l; ++j)
            v(i, j) = i == j ? a0 + a1 * std::cos(3.0 * x.x) + osc * std::sin(2.0 * M_PI * t)
                             : 0.2 * a1;
        return v;
      },
      l, spec.grid, spec.time);
  KernelSet ks;
  ks.l = l;
  ks.dim = 1;
  for (int j = 0; j < l; ++j) {
    double c0 = base, c1 = 0.5 * unif(rng);
    ks.kernels.push_back(kernel_rank_one(
        [c0, c1](const Point& x) { return c0 + c1 * std::sin(2.0 * x.x); },
        [c0, c1](const Point& y) { return 1.0 + c1 * (1.0 - y.x) * 0.5; }));
  }
  spec.kernels = ks;
  spec.prepare();
  return spec;
}

void criterion_3() {
  std::mt19937 rng(2024);
  SteppingOptions opts;
  opts.power_tol = 1e-13;
  opts.power_vec_tol = 1e-11;
  opts.power_cap = 200000;
  bool ok = true;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    OperatorSpec spec = random_spec(rng);
    Monodromy mono = build_monodromy(spec, opts);
    PowerResult pr = power_iteration(
        [&mono](const Eigen::VectorXd& x) { return (mono.M * x).eval(); }, spec.size(),
        opts.power_tol, opts.power_cap, true, opts.power_vec_tol);
    double s_power = spec.tau * (mono.log_scale + std::log(pr.rho));
    double s_dense = spec.tau * (mono.log_scale + std::log(dense_spectral_radius(mono.M)));
    double diff = std::abs(s_power - s_dense) / std::max(1.0, std::abs(s_dense));
    worst = std::max(worst, diff);
    ok = ok && pr.converged && diff <= 1e-8;
  }
  report(3, ok, "oracle equivalence on 20 randomized specs, worst relative gap " + fmt(worst));
}

void criterion_4() {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  bool ok = true;
  std::ostringstream note;
  const char* presets[] = {"SCEN-A", "SCEN-B", "SCEN-C", "SCEN-D", "SCEN-E", "SCEN-F", "SCEN-G"};
  for (const char* name : presets) {
    OperatorSpec spec = make_scenario(name, {100, 200});
    Monodromy mono = build_monodromy(spec);
    bool nonneg = mono.M.minCoeff() >= 0.0;
    for (int trial = 0; trial < 100 && nonneg; ++trial) {
      Eigen::VectorXd v(spec.size());
      for (int i = 0; i < v.size(); ++i) v[i] = unif(rng) < 0.4 ? unif(rng) : 0.0;
      if ((mono.M * v).minCoeff() < 0.0) nonneg = false;
    }
    // under irreducibility one period strictly positivizes every e_j: M strictly positive
    bool strict = mono.M.minCoeff() > 0.0;
    ok = ok && nonneg && strict;
    if (!nonneg || !strict) note << name << " [BAD] ";
  }
  // the period-map route itself on a few vectors
  OperatorSpec spec = make_scenario("SCEN-C", {80, 128});
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd v(spec.size());
    for (int i = 0; i < v.size(); ++i) v[i] = unif(rng) < 0.5 ? unif(rng) : 0.0;
    if (period_map_apply(spec, v).minCoeff() < 0.0) ok = false;
  }
  report(4, ok, "positivity of the period map, strict under irreducibility " + note.str());
}

void criterion_5() {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Resolution res{60, 64};
  OperatorSpec base = make_scenario("SCEN-F", res);
  double s0 = spectral_bound(base).s;
  bool ok = true;

  for (int trial = 0; trial < 50; ++trial) {
    double c = 0.5 * unif(rng), x0 = unif(rng), w = 0.05 + 0.4 * unif(rng);
    OperatorSpec pert = base.with_A(sample_field(
        [c, x0, w](const Point& x, double) {
          double bump = c * std::exp(-(x.x - x0) * (x.x - x0) / (w * w));
          return Eigen::MatrixXd::Constant(1, 1, 4.0 - (x.x - 0.5) * (x.x - 0.5) + bump);
        },
        1, base.grid, base.time));
    if (spectral_bound(pert).s < s0 - 1e-9) ok = false;
  }

  for (int trial = 0; trial < 20; ++trial) {
    double c = 0.5 * unif(rng), x0 = unif(rng), y0 = unif(rng);
    OperatorSpec pert = base;
    KernelSet ks = base.kernels;
    auto old_k = ks.kernels[0].k;
    ks.kernels[0].k = [old_k, c, x0, y0](const Point& x, const Point& y, double t) {
      return old_k(x, y, t) +
             c * std::exp(-5.0 * ((x.x - x0) * (x.x - x0) + (y.x - y0) * (y.x - y0)));
    };
    ks.kernels[0].convolution = false;
    ks.kernels[0].mass_normalized = false;
    pert.kernels = ks;
    pert.prepare();
    if (spectral_bound(pert).s < s0 - 1e-9) ok = false;
  }

  SpectralResult full = spectral_bound(base);
  double phimin = 1e300;
  for (const auto& u : full.eigenfunction.u) phimin = std::min(phimin, u.minCoeff());
  double C = 1.0 * 1.0 / phimin;  // dbar * kbar / min phi
  double worst_ratio = 0.0;
  for (int drop = 1; drop <= 10; ++drop) {
    int n1 = res.n - drop;
    OperatorSpec sub = base;
    sub.grid = build_spatial_grid_1d(0.0, static_cast<double>(n1) / res.n, n1);
    sub.D = constant_field(Eigen::MatrixXd::Constant(1, 1, 1.0), sub.grid, sub.time);
    sub.A = sample_field(
        [](const Point& x, double) {
          return Eigen::MatrixXd::Constant(1, 1, 4.0 - (x.x - 0.5) * (x.x - 0.5));
        },
        1, sub.grid, sub.time);
    sub.prepare();
    double s1 = spectral_bound(sub).s;
    double cut = static_cast<double>(drop) / res.n;
    if (s1 > s0 + 1e-9) ok = false;
    if (std::abs(s1 - s0) > C * cut) ok = false;
    worst_ratio = std::max(worst_ratio, std::abs(s1 - s0) / (C * cut));
  }
  report(5, ok,
         "monotonicity in A, kernel and domain; domain Lipschitz ratio <= " + fmt(worst_ratio));
}

void criterion_6() {
  bool ok = true;
  std::ostringstream note;
  for (const char* name : {"SCEN-L", "SCEN-L2"}) {
    OperatorSpec spec = make_scenario(name, {60, 800});
    SandwichTable table = sandwich_check(spec, 4, 0.02);
    bool flags = true;
    for (const auto& row : table.rows) flags = flags && row.nonintegrable_flag;
    double final_gap = table.rows.back().gap;
    bool good = table.sandwich_ok && table.gaps_shrinking && final_gap <= 5e-3 && flags;
    ok = ok && good;
    note << name << " final gap " << fmt(final_gap) << (good ? " " : " [BAD] ");
  }
  report(6, ok, "approximation sandwich over 4 levels: " + note.str());
}

void criterion_7() {
  EqualityReport a = certify_equality(make_scenario("SCEN-A", {200, 400}), 1e-6);
  EqualityReport d = certify_equality(make_scenario("SCEN-D", {200, 400}), 1e-6);
  EqualityReport l = certify_equality(make_scenario("SCEN-L", {60, 800}), 5e-3);
  bool ok = a.certified && d.certified && l.certified && l.used_approximation;
  report(7, ok,
         "variational equality gaps: smooth " + fmt(std::max(a.max_gap, d.max_gap)) +
             ", non-smooth " + fmt(l.max_gap));
}

void criterion_8() {
  auto t0 = std::chrono::steady_clock::now();
  OperatorSpec base = make_scenario("SCEN-F", {200, 400});
  SweepResult sw = sweep_dispersal_rate(base, {1e-3, 1e3}, {}, 2);
  double gap_small = std::abs(sw.rows[0].s - sw.predicted_limit);
  double el = seconds_since(t0);
  bool ok = gap_small <= 0.05 && sw.rows[1].s < -100.0 && el < 120.0;
  report(8, ok,
         "dispersal-rate limits: |s(1e-3) - max lambda_A| = " + fmt(gap_small) +
             ", s(1e3) = " + fmt(sw.rows[1].s) + " (" + fmt(el) + "s)");
}

void criterion_9() {
  auto t0 = std::chrono::steady_clock::now();
  OperatorSpec base = make_scenario("SCEN-E", {400, 400});
  LocalProblem lp = local_problem_from_spec(base);
  double lambda_local = local_principal_eigen(lp).s;
  SweepResult sw = sweep_dispersal_range(base, {0.2, 0.1, 0.05}, 2.0, {}, 2);
  double el = seconds_since(t0);

  bool local_ok = std::abs(lambda_local + M_PI * M_PI) <= 0.05;
  bool decreasing = true;
  double prev = 1e300;
  for (const auto& row : sw.rows) {
    double gap = std::abs(row.s - lambda_local);
    if (gap >= prev) decreasing = false;
    prev = gap;
  }
  double final_gap = std::abs(sw.rows.back().s - lambda_local);
  bool bound_ok = final_gap <= 0.5;
  bool ok = local_ok && decreasing && bound_ok && el < 300.0;
  report(9, ok,
         "local limit m=2: lambda_local = " + fmt(lambda_local) + ", gaps decreasing " +
             (decreasing ? "yes" : "no") + ", |s(0.05) - lambda_local| = " + fmt(final_gap) +
             " (bound 0.5; the continuum gap at sigma=0.05 is ~0.57, an O(sigma) Dirichlet" +
             " boundary layer with constant ~11.4, so this bound is not attainable)" +
             " (" + fmt(el) + "s)");
}

void criterion_10() {
  OperatorSpec base = make_scenario("SCEN-G", {100, 400});
  std::vector<double> taus = {0.01, 0.05, 0.1, 1.0, 10.0, 100.0, 1000.0};
  SweepResult sw = sweep_frequency(base, taus, nullptr, {}, 3);
  double tau005 = 0.0;
  for (const auto& row : sw.rows)
    if (std::abs(row.param - 0.05) < 1e-12) tau005 = row.s;
  double frozen_gap = std::abs(tau005 - sw.frozen_average);
  bool ok = sw.monotonicity_violations == 0 && frozen_gap <= 0.05 &&
            sw.rows.back().s >= sw.lower_bound_constant - 1e-9;
  report(10, ok,
         "frequency: monotone over 5 decades (violations " +
             std::to_string(sw.monotonicity_violations) + "), |s(0.05) - avg frozen| = " +
             fmt(frozen_gap) + ", s(1000) = " + fmt(sw.rows.back().s) +
             " >= " + fmt(sw.lower_bound_constant));
}

void criterion_11() {
  double sa = spectral_bound(make_scenario("SCEN-A", {200, 400})).s;
  double sc = spectral_bound(make_scenario("SCEN-C", {200, 400})).s;
  bool ok = std::abs(sa - sc) <= 1e-8;
  report(11, ok, "gauge invariance |s(SCEN-C) - s(SCEN-A)| = " + fmt(std::abs(sa - sc)));
}

void criterion_12() {
  bool ok = true;
  std::ostringstream note;
  struct Regime {
    const char* name;
    const char* want;
    double tol;
  } regimes[] = {{"Z-(i)", "endemic", 1e-3},
                 {"Z-(ii)", "vector_only", 1e-4},
                 {"Z-(iii)", "extinction", 1e-5}};
  for (const auto& r : regimes) {
    auto t0 = std::chrono::steady_clock::now();
    ZikaParams zp = make_zika_preset(r.name, {100, 200});
    Eigen::VectorXd u0(3 * zp.grid.n());
    for (int p = 0; p < zp.grid.n(); ++p) {
      u0[3 * p + 0] = 0.1;
      u0[3 * p + 1] = 0.5;
      u0[3 * p + 2] = 0.1;
    }
    ZikaClassification cls = classify_zika(zp, u0, 200);
    double el = seconds_since(t0);
    bool good = cls.verdict_name == r.want && cls.evidence <= r.tol && el < 300.0 &&
                cls.periods_run <= 200;
    ok = ok && good;
    note << r.name << "=" << cls.verdict_name << " ev=" << fmt(cls.evidence) << " ";
  }
  report(12, ok, "Zika trichotomy: " + note.str());
}

void criterion_13() {
  bool ok = true;
  std::ostringstream note;
  {
    StemCellParams sp = make_stemcell_preset("S-n0-decay", {100, 200});
    StemCellClassification cls =
        classify_stemcell(sp, Eigen::VectorXd::Ones(sp.grid.n()), 12);
    bool good = cls.verdict_name == "decay" && std::abs(cls.rate_fit + 2.0) <= 0.1;
    ok = ok && good;
    note << "decay rate " << fmt(cls.rate_fit) << " ";
  }
  {
    StemCellParams sp = make_stemcell_preset("S-n0-neutral", {100, 400});
    Eigen::VectorXd Q0(sp.grid.n());
    for (int p = 0; p < sp.grid.n(); ++p)
      Q0[p] = 1.0 + 0.5 * std::sin(M_PI * sp.grid.nodes[p].x);
    StemCellClassification cls = classify_stemcell(sp, Q0, 40);
    bool good = cls.verdict_name == "neutral" && cls.evidence <= 1e-3;
    ok = ok && good;
    note << "neutral |Q - c phi| " << fmt(cls.evidence) << " ";
  }
  {
    StemCellParams sp = make_stemcell_preset("S-n2-persist", {80, 200});
    int nl = sp.grid.n() * sp.l;
    Eigen::VectorXd Q1 = Eigen::VectorXd::Constant(nl, 0.2);
    Eigen::VectorXd Q2(nl);
    for (int i = 0; i < nl; ++i) Q2[i] = 1.5 + 0.5 * std::sin(3.0 * i);
    StemCellClassification c1 = classify_stemcell(sp, Q1, 300);
    StemCellClassification c2 = classify_stemcell(sp, Q2, 300);
    double d = 0.0;
    for (int k = 0; k < c1.attractor.knots(); ++k)
      d = std::max(d, (c1.attractor.u[k] - c2.attractor.u[k]).cwiseAbs().maxCoeff());
    bool good = c1.verdict_name == "persist" && c2.verdict_name == "persist" && d <= 1e-4;
    ok = ok && good;
    note << "attractor distance " << fmt(d);
  }
  report(13, ok, "stem cell dynamics: " + note.str());
}

void criterion_14() {
  LinearIVP ivp;
  ivp.grid = build_spatial_grid_1d(0.0, 1.0, 200);
  ivp.time = build_time_grid(200);
  ivp.tau = 1.0;
  ivp.kernels = {1, 1, {kernel_uniform(1)}};
  ivp.d = [](const Point&, double) { return 1.0; };
  ivp.a = [](const Point&, double t) { return 0.5 + 0.3 * std::cos(2.0 * M_PI * t); };
  ivp.u0 = [](const Point& x) { return std::sin(M_PI * x.x); };
  IvpErrorTable t = nonlocal_to_local_ivp_error(ivp, {0.2, 0.1, 0.05}, 1.0);
  std::ostringstream note;
  for (const auto& r : t.rows) note << fmt(r.sup_error) << " ";
  report(14, t.strictly_decreasing, "IVP sup errors strictly decreasing: " + note.str());
}

void criterion_15() {
  namespace fs = std::filesystem;
  fs::path tmp = fs::temp_directory_path() / "nls_acceptance_det";
  fs::remove_all(tmp);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  bool ok = true;
  {
    RunConfig cfg =
        parse_config(R"({"command":"spectrum","scenario":"SCEN-D","n":60,"steps":64})");
    run(cfg, (tmp / "a").string());
    run(cfg, (tmp / "b").string());
    ok = ok && slurp(tmp / "a" / "results.json") == slurp(tmp / "b" / "results.json");
  }
  {
    RunConfig cfg = parse_config(
        R"({"command":"sweep-rate","scenario":"SCEN-F","n":60,"steps":64,"workers":3,
            "options":{"scales":[1.0,0.1,0.01,10.0]}})");
    run(cfg, (tmp / "c").string());
    run(cfg, (tmp / "d").string());
    ok = ok && slurp(tmp / "c" / "results.json") == slurp(tmp / "d" / "results.json");
    ok = ok && slurp(tmp / "c" / "results.csv") == slurp(tmp / "d" / "results.csv");
  }
  fs::remove_all(tmp);
  report(15, ok, "byte-identical results across repeated runs (incl. parallel sweeps)");
}

}  // namespace

int main() {
  auto t0 = std::chrono::steady_clock::now();
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();
  criterion_12();
  criterion_13();
  criterion_14();
  criterion_15();
  std::printf("acceptance: %d/15 passed (%.1f s total)\n", 15 - g_failed,
              seconds_since(t0));
  return g_failed == 0 ? 0 : 1;
}
