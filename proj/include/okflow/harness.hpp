// harness.hpp
// Experiment orchestration: single runs with file output, the mesh-refinement
// convergence study, and repulsion-strength comparison sweeps. Independent
// simulations execute concurrently; each run writes into its own directory.
#pragma once

#include <cmath>
#include <filesystem>
#include <future>
#include <thread>

#include "okflow/config.hpp"
#include "okflow/output.hpp"

namespace okflow {

namespace detail {

inline int thread_budget(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 2;
}

// Runs the tasks concurrently, at most `budget` in flight.
template <typename Task>
void run_parallel(std::vector<Task>& tasks, int budget) {
  std::vector<std::future<void>> inflight;
  for (auto& task : tasks) {
    if (static_cast<int>(inflight.size()) >= budget) {
      inflight.front().get();
      inflight.erase(inflight.begin());
    }
    inflight.push_back(std::async(std::launch::async, std::ref(task)));
  }
  for (auto& f : inflight) f.get();
}

}  // namespace detail

struct SimulationOutput {
  RunResult result;
  std::filesystem::path directory;
};

inline SimulationOutput run_simulation(const RunConfig& cfg,
                                       bool write_files = true) {
  const ModelSpec spec = build_model(cfg);
  validate_model(spec);
  const SimplicialMesh mesh = build_structured_mesh(cfg.dim, cfg.n);
  const FemSpace space(mesh);
  const FieldVector phi0 = build_initial(cfg, mesh);
  const SchemeConfig sc = build_scheme_config(cfg);
  RunOptions options;
  options.linear = build_solver_options(cfg);
  options.entropy_delta = cfg.entropy_delta;

  const int n_steps =
      cfg.t_end > 0.0 ? static_cast<int>(std::llround(cfg.t_end / cfg.tau)) : 0;
  std::vector<StepObserver> observers;
  std::filesystem::path dir(cfg.output_dir);
  std::unique_ptr<SeriesWriter> series;
  if (write_files) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() +
                          "': " + ec.message());
    series = std::make_unique<SeriesWriter>((dir / "series.csv").string(),
                                            cfg.entropy_delta.has_value());
    const int stride = cfg.output_stride;
    SeriesWriter* series_ptr = series.get();
    observers.push_back([series_ptr, stride, n_steps, dir, &mesh](
                            int step, const StepReport& rep,
                            const FieldVector& phi, const FieldVector& mu,
                            const FieldVector& nu) {
      if (step % stride != 0 && step != n_steps) return;
      series_ptr->write(rep);
      write_vtk((dir / snapshot_name(step)).string(), mesh,
                {{"phi", &phi.values}, {"mu", &mu.values}, {"nu", &nu.values}});
    });
  }

  SimulationOutput out;
  out.directory = dir;
  out.result = run(space, spec, sc, phi0, observers, options);
  return out;
}

struct ConvergenceRow {
  int k = 0;
  int n = 0;
  double h = 0.0;
  double err_phi = 0.0, err_mu = 0.0, err_nu = 0.0;
  double eoc_phi = 0.0, eoc_mu = 0.0, eoc_nu = 0.0;  // NaN on the first row
};

struct ConvergenceOutput {
  std::vector<ConvergenceRow> rows;
  std::filesystem::path rates_csv;
};

// Lockstep convergence study: all levels and the reference advance together
// with identical time steps; coarse solutions are embedded into the
// reference space each step and measured with reference-mesh matrices.
inline ConvergenceOutput run_convergence(const RunConfig& cfg,
                                         bool write_files = true) {
  if (cfg.initial == "uniform3d")
    throw ConfigError(
        "converge: the random initial condition is not level-comparable; use "
        "an analytic initial condition");
  for (int k : cfg.levels)
    if (k > cfg.reference_level)
      throw ConfigError("converge: reference level must be at least as fine "
                        "as every study level");

  const ModelSpec spec = build_model(cfg);
  validate_model(spec);
  const SchemeConfig sc = build_scheme_config(cfg);
  const SolveOptions lin = build_solver_options(cfg);
  const int n_steps =
      static_cast<int>(std::llround(cfg.t_end / cfg.tau));

  struct Sim {
    int k = 0;
    // heap-held so FemSpace/Stepper back-pointers survive container moves
    std::unique_ptr<SimplicialMesh> mesh;
    std::unique_ptr<FemSpace> space;
    std::unique_ptr<Stepper> stepper;
    FieldVector phi, mu, nu;
    double err_phi = 0.0, err_mu = 0.0, err_nu = 0.0;
  };

  auto make_sim = [&](int k) {
    Sim sim;
    sim.k = k;
    RunConfig level_cfg = cfg;
    level_cfg.n = 1 << (k + 1);  // h ~ 2^-(k+1)
    level_cfg.dim = cfg.dim;
    sim.mesh = std::make_unique<SimplicialMesh>(
        build_structured_mesh(level_cfg.dim, level_cfg.n, k));
    sim.space = std::make_unique<FemSpace>(*sim.mesh);
    sim.stepper = std::make_unique<Stepper>(*sim.space, spec, sc);
    sim.phi = build_initial(level_cfg, *sim.mesh);
    return sim;
  };

  std::vector<Sim> sims;
  for (int k : cfg.levels) sims.push_back(make_sim(k));
  Sim ref = make_sim(cfg.reference_level);
  const SparseMatrix& M_ref = ref.space->mass();
  const SparseMatrix& K_ref = ref.space->stiffness();

  auto v_norm_sq = [&](const Vec& d) {
    return d.dot(M_ref * d) + d.dot(K_ref * d);
  };
  auto l2_norm_sq = [&](const Vec& d) { return d.dot(M_ref * d); };

  // initial phi error (nodal interpolants of the same analytic datum)
  for (auto& sim : sims) {
    const Vec d =
        transfer_to_fine(sim.phi, *sim.mesh, *ref.mesh).values - ref.phi.values;
    sim.err_phi = std::max(sim.err_phi, v_norm_sq(d));
  }

  const int budget = detail::thread_budget(cfg.threads);
  for (int step = 0; step < n_steps; ++step) {
    std::vector<std::function<void()>> tasks;
    auto advance = [](Sim& sim) {
      auto r = sim.stepper->step(sim.phi);
      sim.phi = std::move(r.phi_next);
      sim.mu = std::move(r.mu_next);
      sim.nu = std::move(r.nu_next);
    };
    for (auto& sim : sims) tasks.push_back([&sim, &advance] { advance(sim); });
    tasks.push_back([&ref, &advance] { advance(ref); });
    detail::run_parallel(tasks, budget);

    for (auto& sim : sims) {
      const Vec d_phi =
          transfer_to_fine(sim.phi, *sim.mesh, *ref.mesh).values - ref.phi.values;
      const Vec d_mu =
          transfer_to_fine(sim.mu, *sim.mesh, *ref.mesh).values - ref.mu.values;
      const Vec d_nu =
          transfer_to_fine(sim.nu, *sim.mesh, *ref.mesh).values - ref.nu.values;
      sim.err_phi = std::max(sim.err_phi, v_norm_sq(d_phi));
      sim.err_mu += cfg.tau * l2_norm_sq(d_mu);
      sim.err_nu = std::max(sim.err_nu, v_norm_sq(d_nu));
    }
  }

  ConvergenceOutput out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < sims.size(); ++i) {
    ConvergenceRow row;
    row.k = sims[i].k;
    row.n = sims[i].mesh->n;
    row.h = sims[i].mesh->h();
    row.err_phi = sims[i].err_phi;
    row.err_mu = sims[i].err_mu;
    row.err_nu = sims[i].err_nu;
    if (i == 0) {
      row.eoc_phi = row.eoc_mu = row.eoc_nu = nan;
    } else {
      const auto& prev = out.rows[i - 1];
      const double scale = std::log2(double(row.n) / prev.n);
      row.eoc_phi = std::log2(prev.err_phi / row.err_phi) / scale;
      row.eoc_mu = std::log2(prev.err_mu / row.err_mu) / scale;
      row.eoc_nu = std::log2(prev.err_nu / row.err_nu) / scale;
    }
    out.rows.push_back(row);
  }

  if (write_files) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + ec.message());
    out.rates_csv = std::filesystem::path(cfg.output_dir) / "rates.csv";
    std::ofstream csv(out.rates_csv);
    if (!csv) throw IoError("cannot open '" + out.rates_csv.string() + "'");
    csv << "k,n,h,err_phi,eoc_phi,err_mu,eoc_mu,err_nu,eoc_nu\n";
    for (const auto& row : out.rows) {
      csv << row.k << ',' << row.n << ',' << format_real(row.h) << ','
          << format_real(row.err_phi) << ',' << format_real(row.eoc_phi) << ','
          << format_real(row.err_mu) << ',' << format_real(row.eoc_mu) << ','
          << format_real(row.err_nu) << ',' << format_real(row.eoc_nu) << "\n";
    }
    if (!csv) throw IoError("write failed: rates.csv");
  }
  return out;
}

struct CompareOutput {
  std::vector<double> kappas;
  std::vector<SimulationOutput> runs;
  std::filesystem::path joined_csv;
  bool all_completed = true;
};

inline std::string kappa_label(double kappa) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", kappa);
  return buf;
}

// Same initial data and forcing for every repulsion strength in the list;
// per-run outputs land in kappa_<value>/ subdirectories plus one joined
// mass/energy table for cross-plots.
inline CompareOutput run_compare(const RunConfig& cfg,
                                 bool write_files = true) {
  if (cfg.kappa_list.empty())
    throw ConfigError("compare: kappa_list must not be empty");
  CompareOutput out;
  out.kappas = cfg.kappa_list;
  out.runs.resize(cfg.kappa_list.size());

  std::vector<std::function<void()>> tasks;
  std::vector<std::exception_ptr> errors(cfg.kappa_list.size());
  for (std::size_t i = 0; i < cfg.kappa_list.size(); ++i) {
    tasks.push_back([&, i] {
      try {
        RunConfig sub = cfg;
        sub.kappa = cfg.kappa_list[i];
        sub.output_dir = (std::filesystem::path(cfg.output_dir) /
                          ("kappa_" + kappa_label(sub.kappa)))
                             .string();
        out.runs[i] = run_simulation(sub, write_files);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  detail::run_parallel(tasks, detail::thread_budget(cfg.threads));
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);

  std::size_t min_rows = SIZE_MAX;
  for (const auto& run : out.runs) {
    out.all_completed = out.all_completed && run.result.completed;
    min_rows = std::min(min_rows, run.result.reports.size());
  }

  if (write_files) {
    out.joined_csv = std::filesystem::path(cfg.output_dir) / "compare.csv";
    std::ofstream csv(out.joined_csv);
    if (!csv) throw IoError("cannot open '" + out.joined_csv.string() + "'");
    csv << "t";
    for (double kappa : out.kappas) {
      const std::string label = kappa_label(kappa);
      csv << ",mass_kappa" << label << ",energy_kappa" << label;
    }
    csv << "\n";
    for (std::size_t row = 0; row < min_rows; ++row) {
      csv << format_real(out.runs[0].result.reports[row].time);
      for (const auto& run : out.runs) {
        const auto& rep = run.result.reports[row];
        csv << ',' << format_real(rep.mass) << ',' << format_real(rep.energy);
      }
      csv << "\n";
    }
    if (!csv) throw IoError("write failed: compare.csv");
  }
  return out;
}

}  // namespace okflow
