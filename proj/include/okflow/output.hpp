// output.hpp
// CSV time series and legacy ASCII VTK snapshots. All reals are printed with
// 17 significant digits so files round-trip to the in-memory doubles.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "okflow/diagnostics.hpp"
#include "okflow/mesh.hpp"

namespace okflow {

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class SeriesWriter {
 public:
  SeriesWriter(const std::string& path, bool with_entropy)
      : with_entropy_(with_entropy) {
    out_.open(path);
    if (!out_) throw IoError("cannot open series file '" + path + "'");
    out_ << "t,mass,energy,dissipation,forcing_work,mass_residual,"
            "energy_slack,newton_iters";
    if (with_entropy_) out_ << ",entropy";
    out_ << "\n";
    check(path);
  }

  void write(const StepReport& rep) {
    out_ << format_real(rep.time) << ',' << format_real(rep.mass) << ','
         << format_real(rep.energy) << ',' << format_real(rep.dissipation)
         << ',' << format_real(rep.forcing_work) << ','
         << format_real(rep.mass_balance_residual) << ','
         << format_real(rep.energy_balance_slack) << ','
         << rep.newton_iterations;
    if (with_entropy_) out_ << ',' << format_real(rep.entropy.value_or(0.0));
    out_ << "\n";
    out_.flush();
    check("series file");
  }

 private:
  void check(const std::string& what) {
    if (!out_) throw IoError("write failed: " + what);
  }
  std::ofstream out_;
  bool with_entropy_;
};

inline void write_vtk(
    const std::string& path, const SimplicialMesh& mesh,
    const std::vector<std::pair<std::string, const Vec*>>& point_scalars,
    const std::string& title = "okflow fields") {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open VTK file '" + path + "'");
  const int nv = mesh.n_vertices(), nc = mesh.n_cells();
  const int vpc = mesh.verts_per_cell();
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << nv << " double\n";
  for (const auto& v : mesh.vertices)
    out << format_real(v[0]) << ' ' << format_real(v[1]) << ' '
        << format_real(v[2]) << "\n";
  out << "CELLS " << nc << ' ' << nc * (vpc + 1) << "\n";
  for (const auto& cell : mesh.cells) {
    out << vpc;
    for (int i = 0; i < vpc; ++i) out << ' ' << cell[i];
    out << "\n";
  }
  out << "CELL_TYPES " << nc << "\n";
  const int vtk_type = mesh.dim == 2 ? 5 : 10;  // triangle / tetrahedron
  for (int c = 0; c < nc; ++c) out << vtk_type << "\n";
  out << "POINT_DATA " << nv << "\n";
  for (const auto& [name, values] : point_scalars) {
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (int i = 0; i < nv; ++i) out << format_real((*values)[i]) << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

inline std::string snapshot_name(int step_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fields_%05d.vtk", step_index);
  return buf;
}

}  // namespace okflow
