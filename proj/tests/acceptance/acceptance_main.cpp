// Acceptance suite: one pass/fail line per criterion. Heavy experiment runs
// execute at the scales used throughout (2D: h = tau = 1e-2 on the unit
// square; 3D: n = 16). Exits nonzero if any criterion fails.
#include <cstdio>
#include <functional>
#include <future>
#include <string>
#include <vector>

#include "okflow/okflow.hpp"
#include "testing/oracles.hpp"

using namespace okflow;

namespace {

struct Criterion {
  int number;
  std::string label;
  bool pass;
  std::string detail;
};

std::vector<Criterion> g_results;

void record(int number, const std::string& label, bool pass,
            const std::string& detail) {
  g_results.push_back({number, label, pass, detail});
  std::printf("[%s] %d. %s — %s\n", pass ? "PASS" : "FAIL", number,
              label.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

RunConfig experiment_config(const std::string& preset, double kappa,
                            double t_end) {
  RunConfig cfg = parse_config_text("version=1\nexperiment=" + preset + "\n");
  cfg.kappa = kappa;
  cfg.t_end = t_end;
  cfg.output_stride = 1;
  return cfg;
}

std::vector<RunResult> sweep(const std::string& preset,
                             const std::vector<double>& kappas, double t_end) {
  std::vector<RunResult> results(kappas.size());
  std::vector<std::future<void>> futs;
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    if (futs.size() >= 2) {
      futs.front().get();
      futs.erase(futs.begin());
    }
    futs.push_back(std::async(std::launch::async, [&, i] {
      results[i] =
          run_simulation(experiment_config(preset, kappas[i], t_end), false)
              .result;
    }));
  }
  for (auto& f : futs) f.get();
  return results;
}

double max_mass_drift(const RunResult& run) {
  double drift = 0.0;
  for (const auto& rep : run.reports)
    drift = std::max(drift, std::abs(rep.mass - run.reports.front().mass));
  return drift;
}

double max_forced_mass_residual(const RunResult& run) {
  // windowed identity |(phi^n,1) - (phi^0,1) - tau sum (f,1)| at every time
  double worst = 0.0, acc = 0.0;
  for (std::size_t k = 1; k < run.reports.size(); ++k) {
    acc += run.reports[k].mass_balance_residual;
    worst = std::max(worst, std::abs(acc));
  }
  return worst;
}

double min_energy_slack(const RunResult& run) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < run.reports.size(); ++k)
    worst = std::min(worst, run.reports[k].energy_balance_slack);
  return worst;
}

double max_energy_rise(const RunResult& run) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < run.reports.size(); ++k)
    worst = std::max(worst,
                     run.reports[k].energy - run.reports[k - 1].energy);
  return worst;
}

// --- criteria -------------------------------------------------------------

void criterion_1_and_3a() {
  const std::vector<double> kappas = {0.0, 10.0, 100.0};
  const auto runs = sweep("exp1", kappas, 5.0);
  bool completed = true;
  double drift = 0.0, slack = std::numeric_limits<double>::infinity();
  double rise = -std::numeric_limits<double>::infinity();
  for (const auto& run : runs) {
    completed = completed && run.completed;
    drift = std::max(drift, max_mass_drift(run));
    slack = std::min(slack, min_energy_slack(run));
    rise = std::max(rise, max_energy_rise(run));
  }
  record(1, "mass conservation without forcing (500 steps, kappa sweep)",
         completed && drift <= 1e-11,
         "max |mass(t)-mass(0)| = " + fmt(drift) + " (tol 1e-11)");
  record(3, "energy-dissipation balance, unforced runs",
         completed && slack >= -1e-10 && rise <= 1e-10,
         "min per-step slack = " + fmt(slack) + ", max energy rise = " +
             fmt(rise) + " (tol -1e-10)");
}

void criterion_2_and_3b() {
  const std::vector<double> kappas = {0.0, 10.0, 100.0};
  const auto runs = sweep("exp2", kappas, 5.0);
  bool completed = true;
  double residual = 0.0, slack = std::numeric_limits<double>::infinity();
  for (const auto& run : runs) {
    completed = completed && run.completed;
    residual = std::max(residual, max_forced_mass_residual(run));
    slack = std::min(slack, min_energy_slack(run));
  }
  record(2, "forced mass balance identity (logistic source, kappa sweep)",
         completed && residual <= 1e-11,
         "max windowed residual = " + fmt(residual) + " (tol 1e-11)");
  record(3, "energy-dissipation balance, forced runs",
         completed && slack >= -1e-10,
         "min per-step slack = " + fmt(slack) + " (tol -1e-10)");
}

void criterion_4() {
  RunConfig cfg = parse_config_text("version=1\nexperiment=exp2\n");
  cfg.kappa = 100.0;
  cfg.tau = 1e-3;
  cfg.t_end = 0.5;
  cfg.levels = {1, 2, 3, 4};
  cfg.reference_level = 5;
  cfg.solver = "direct";
  const auto out = run_convergence(cfg, false);
  const auto& finest = out.rows.back();
  const bool pass = finest.eoc_phi >= 1.7 && finest.eoc_phi <= 2.3 &&
                    finest.eoc_mu >= 1.7 && finest.eoc_mu <= 2.3 &&
                    finest.eoc_nu >= 1.7 && finest.eoc_nu <= 2.3;
  record(4, "convergence rates of the squared norms (desk scale)", pass,
         "eoc(phi) = " + fmt(finest.eoc_phi) + ", eoc(mu) = " +
             fmt(finest.eoc_mu) + ", eoc(nu) = " + fmt(finest.eoc_nu) +
             " (band [1.7, 2.3])");
}

void criterion_5() {
  const std::vector<double> kappas = {0.0, 10.0, 100.0};
  const auto runs = sweep("exp1", kappas, 2.0);
  bool completed = true;
  std::vector<double> drops;
  for (const auto& run : runs) {
    completed = completed && run.completed;
    drops.push_back(run.reports.front().energy - run.reports.back().energy);
  }
  const bool ordered = drops[2] < drops[1] && drops[1] < drops[0];
  record(5, "repulsion strength damps the energy drop (T = 2)",
         completed && ordered,
         "E(0)-E(2): kappa=0: " + fmt(drops[0]) + ", kappa=10: " +
             fmt(drops[1]) + ", kappa=100: " + fmt(drops[2]) +
             " (strictly decreasing in kappa)");
}

void criterion_6() {
  double worst = 0.0;
  for (int dim : {2, 3}) {
    const auto mesh = build_structured_mesh(dim, dim == 2 ? 2 : 1);
    const FemSpace space(mesh);
    const Vec& c = space.weighted_mean_functional();
    const int n = mesh.n_vertices();
    ModelSpec spec = builtin_quartic_model();
    spec.kappa = 100.0;
    spec.forcing = logistic_forcing();

    SolveOptions direct;
    direct.method = SolveOptions::Method::direct;
    InverseLaplacianContext ctx(space, direct);
    const Vec q = 0.5 * oracles::random_vector(n, 1000 + dim);
    ctx.set_weight({q, mesh.level}, spec.mobility);

    const Vec v = oracles::random_vector(n, 2000 + dim);
    const auto [w_plain, l1] = oracles::dense_constrained_solve(
        oracles::dense_stiffness(mesh), c, oracles::dense_mass(mesh) * v);
    worst = std::max(worst,
                     (ctx.apply(v, false) - w_plain).lpNorm<Eigen::Infinity>());
    const auto [w_weighted, l2] = oracles::dense_constrained_solve(
        oracles::dense_weighted_stiffness(mesh, q, spec.mobility), c,
        oracles::dense_mass(mesh) * v);
    worst = std::max(
        worst, (ctx.apply(v, true) - w_weighted).lpNorm<Eigen::Infinity>());

    oracles::StepOracleParams params;
    params.eps2 = spec.epsilon_sq;
    params.kappa = spec.kappa;
    params.tau = 1e-2;
    params.psi1_d1 = spec.psi1_d1;
    params.psi1_d2 = spec.psi1_d2;
    params.psi2_d1 = spec.psi2_d1;
    params.mobility = spec.mobility;
    params.forcing = spec.forcing;
    const Vec phi_n = 0.5 * oracles::random_vector(n, 3000 + dim);
    const auto dense = oracles::dense_newton_step(mesh, params, phi_n);
    SchemeConfig sc;
    sc.tau = params.tau;
    Stepper stepper(space, spec, sc);
    const auto sparse = stepper.step({phi_n, mesh.level});
    worst = std::max(worst, (sparse.phi_next.values - dense.phi)
                                .lpNorm<Eigen::Infinity>());
    worst = std::max(worst, (sparse.mu_next.values - dense.mu)
                                .lpNorm<Eigen::Infinity>());
    worst = std::max(worst, (sparse.nu_next.values - dense.nu)
                                .lpNorm<Eigen::Infinity>());
    worst =
        std::max(worst, std::abs(sparse.lagrange_multiplier - dense.lambda));
  }
  record(6, "operators and one Newton step match dense brute force",
         worst <= 1e-9, "max deviation = " + fmt(worst) + " (tol 1e-9)");
}

void criterion_7() {
  bool pass = true;
  std::string detail;

  // constant state is a fixed point
  {
    const auto mesh = build_structured_mesh(2, 16);
    const FemSpace space(mesh);
    ModelSpec spec = builtin_quartic_model();
    spec.kappa = 100.0;
    SchemeConfig sc;
    sc.tau = 1e-2;
    Stepper stepper(space, spec, sc);
    const FieldVector phi0{Vec::Constant(mesh.n_vertices(), 0.3), mesh.level};
    const auto r = stepper.step(phi0);
    const double dev = (r.phi_next.values.array() - 0.3).abs().maxCoeff();
    pass = pass && dev <= 1e-12;
    detail += "fixed point " + fmt(dev) + " (1e-12)";

    // uniqueness probe
    const FieldVector wave = initial_field(mesh, InitialKind::cosine2d);
    const auto a = stepper.step(wave, NewtonGuess::previous_state);
    const auto b = stepper.step(wave, NewtonGuess::zero);
    const Vec d = a.phi_next.values - b.phi_next.values;
    const double vdist =
        std::sqrt(d.dot(space.mass() * d) + d.dot(space.stiffness() * d));
    pass = pass && vdist <= 1e-9;
    detail += ", uniqueness " + fmt(vdist) + " (1e-9)";

    // mean-free nonlocal variable
    const double numean =
        std::abs(space.weighted_mean_functional().dot(a.nu_next.values));
    pass = pass && numean <= 1e-11;
    detail += ", nu mean " + fmt(numean) + " (1e-11)";
  }

  // stiffness kernel on the production meshes
  {
    double kker = 0.0;
    for (int dim : {2, 3}) {
      const auto mesh = build_structured_mesh(dim, dim == 2 ? 100 : 16);
      const SparseMatrix K = assemble_stiffness(mesh);
      kker = std::max(kker,
                      (K * Vec::Ones(K.rows())).lpNorm<Eigen::Infinity>());
    }
    pass = pass && kker <= 1e-13;
    detail += ", |K 1| " + fmt(kker) + " (1e-13)";
  }

  // split consistency of the quartic model
  {
    const ModelSpec spec = builtin_quartic_model();
    double worst = 0.0;
    for (int i = 0; i <= 400; ++i) {
      const double x = -2.0 + 0.01 * i;
      const double quartic = 0.25 * (x * x - 1.0) * (x * x - 1.0);
      worst = std::max(worst, std::abs(spec.psi(x) - quartic));
      worst = std::max(worst, std::abs(spec.psi_d1(x) - (x * x * x - x)));
      const double h = 1e-6;
      const double fd = (spec.psi(x + h) - spec.psi(x - h)) / (2 * h);
      worst = std::max(worst,
                       std::abs(spec.psi_d1(x) - fd) / (1.0 + std::abs(fd)));
    }
    pass = pass && worst <= 1e-6;
    detail += ", split/derivative " + fmt(worst) + " (1e-6)";
  }

  record(7, "scheme invariant suite", pass, detail);
}

void criterion_8() {
  const ModelSpec spec = builtin_quartic_model();
  bool pass = true;
  std::string detail;

  // clamp identity inside the safe interval is exact
  {
    double worst = 0.0;
    for (double delta : {0.1, 0.01}) {
      const auto md = regularized_mobility(spec, delta);
      for (int i = 0; i <= 1000; ++i) {
        const double x = (-1.0 + delta) + i * (2.0 - 2.0 * delta) / 1000.0;
        worst = std::max(worst, std::abs(md(x) - spec.mobility(x)));
      }
    }
    pass = pass && worst == 0.0;
    detail += "clamp identity " + fmt(worst) + " (exact)";
  }

  // seam continuity of the clamped convex part
  {
    double worst = 0.0;
    const double h = 1e-7;
    for (double delta : {0.1, 0.01}) {
      const auto reg = regularized_potential(spec, delta);
      for (double seam : {1.0 - delta, delta - 1.0}) {
        worst = std::max(worst,
                         std::abs(reg.psi1(seam + h) - reg.psi1(seam - h) -
                                  2 * h * reg.psi1_d1(seam)));
        worst = std::max(worst, std::abs(reg.psi1_d1(seam + h) -
                                         reg.psi1_d1(seam - h) -
                                         2 * h * reg.psi1_d2(seam)));
      }
    }
    pass = pass && worst <= 1e-12;
    detail += ", seam continuity " + fmt(worst) + " (1e-12)";
  }

  // entropy range-control inequality at the sampled points
  {
    bool holds = true;
    for (double delta : {0.1, 0.01}) {
      const auto phi = entropy_function(spec, delta);
      const auto md = regularized_mobility(spec, delta);
      const double cap = std::max(md(1.0 - delta), md(delta - 1.0));
      for (double x : {1.2, 1.5, 2.0}) {
        const double excess = std::max(std::abs(x) - 1.0, 0.0);
        holds = holds && excess * excess <= 2.0 * phi(x) * cap * (1 + 1e-9);
      }
    }
    pass = pass && holds;
    detail += std::string(", entropy inequality ") + (holds ? "holds" : "FAILS");
  }

  // uniform closeness of the clamped mobility to the zero-extension
  {
    bool holds = true;
    for (double delta : {0.1, 0.01}) {
      const auto md = regularized_mobility(spec, delta);
      const double bound =
          std::max(spec.mobility(1.0 - delta), spec.mobility(delta - 1.0));
      for (int i = 0; i <= 6000; ++i) {
        const double x = -3.0 + i * 1e-3;
        const double extended = std::abs(x) <= 1.0 ? spec.mobility(x) : 0.0;
        holds = holds && std::abs(md(x) - extended) <= bound * (1 + 1e-12);
      }
    }
    pass = pass && holds;
    detail += std::string(", uniform bound ") + (holds ? "holds" : "FAILS");
  }

  record(8, "regularization suite", pass, detail);
}

void criterion_9() {
  RunConfig cfg = parse_config_text("version=1\nexperiment=exp3\n");
  cfg.kappa = 100.0;
  cfg.t_end = 0.5;  // 50 steps
  cfg.output_stride = 1;
  const auto run = run_simulation(cfg, false).result;

  const double drift = max_forced_mass_residual(run);
  const double slack = min_energy_slack(run);
  std::size_t peak = 0;
  for (std::size_t k = 0; k < run.reports.size(); ++k)
    if (run.reports[k].energy > run.reports[peak].energy) peak = k;
  const bool hump = peak >= 1 && peak + 1 < run.reports.size() &&
                    run.reports[peak].energy >
                        run.reports.front().energy + 1e-12 &&
                    run.reports.back().energy <
                        run.reports[peak].energy - 1e-12;
  const bool pass = run.completed && drift <= 1e-11 && slack >= -1e-10 && hump;
  record(9, "3D smoke: balances hold and the energy peaks then decays", pass,
         "mass residual " + fmt(drift) + " (1e-11), min slack " + fmt(slack) +
             " (-1e-10), energy peak at step " + std::to_string(peak) +
             " of " + std::to_string(run.reports.size() - 1));
}

}  // namespace

int main() {
  std::printf("acceptance suite\n================\n");
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_4();
  criterion_5();
  criterion_1_and_3a();
  criterion_2_and_3b();

  int failures = 0;
  for (const auto& r : g_results)
    if (!r.pass) ++failures;
  std::printf("================\n%zu checks, %d failed\n", g_results.size(),
              failures);
  return failures == 0 ? 0 : 1;
}
