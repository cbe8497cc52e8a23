#include "tobuck/export.hpp"

#include <cstdio>
#include <fstream>
#include <string_view>

#include "tobuck/diagnostics.hpp"

namespace tobuck {

namespace {

void put(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v == 0.0 ? 0.0 : v);
  out += buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("io", "cannot open '" + path.string() + "' for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  f.close();
  if (!f) throw Error("io", "failed writing '" + path.string() + "'");
}

}  // namespace

VtkFields analysis_fields(const VoxelMesh& mesh, const DesignField& design, const DesignAnalysis& analysis) {
  VtkFields out;
  const auto n = static_cast<std::size_t>(mesh.element_count());
  std::vector<double> presence(n);
  for (std::size_t e = 0; e < n; ++e) presence[e] = design.presence[e];
  out.cell_scalars.emplace_back("presence", std::move(presence));
  if (design.values.size() == n) out.cell_scalars.emplace_back("level_set", design.values);
  if (analysis.dJ.values.size() == n) out.cell_scalars.emplace_back("dJ", analysis.dJ.values);
  if (analysis.dP.values.size() == n) out.cell_scalars.emplace_back("dlambda", analysis.dP.values);

  static constexpr std::string_view names3[] = {"sigma_xx", "sigma_yy", "sigma_zz", "sigma_xy", "sigma_xz", "sigma_yz"};
  static constexpr std::string_view names2[] = {"sigma_xx", "sigma_yy", "sigma_xy"};
  const auto& sigma = analysis.state.sigma;
  if (sigma.cols() == mesh.element_count()) {
    for (Index k = 0; k < sigma.rows(); ++k) {
      std::vector<double> comp(n);
      for (std::size_t e = 0; e < n; ++e) comp[e] = sigma(k, static_cast<Index>(e));
      out.cell_scalars.emplace_back(std::string(mesh.is_2d() ? names2[k] : names3[k]), std::move(comp));
    }
  }
  if (analysis.state.d.size() == mesh.dof_count()) out.point_vectors.emplace_back("displacement", analysis.state.d);
  if (analysis.buckling.found()) out.point_vectors.emplace_back("buckling_mode", analysis.buckling.mode);
  return out;
}

void export_vtk(const VoxelMesh& mesh, const DesignField& design, const VtkFields& fields,
                const std::filesystem::path& path) {
  const Index n_el = mesh.element_count();
  if (design.size() != n_el) throw InvalidArgument("export_vtk: design does not match the mesh");
  std::vector<Index> cells;
  for (Index e = 0; e < n_el; ++e)
    if (design.present(e)) cells.push_back(e);
  if (cells.empty()) warn("export_vtk: design has no present elements; writing an empty cell set");

  const int npe = mesh.nodes_per_element();
  const int dim = mesh.dim();
  std::string out;
  out.reserve(static_cast<std::size_t>(mesh.node_count()) * 64);
  out += "# vtk DataFile Version 3.0\ntobuck topology\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out += "POINTS " + std::to_string(mesh.node_count()) + " double\n";
  for (Index p = 0; p < mesh.node_count(); ++p) {
    const auto x = mesh.node_position(p);
    put(out, x[0]);
    out += ' ';
    put(out, x[1]);
    out += ' ';
    put(out, dim == 2 ? 0.0 : x[2]);
    out += '\n';
  }
  out += "CELLS " + std::to_string(cells.size()) + " " + std::to_string(cells.size() * (npe + 1)) + "\n";
  for (Index e : cells) {
    out += std::to_string(npe);
    for (Index node : mesh.element_nodes(e)) out += " " + std::to_string(node);
    out += '\n';
  }
  out += "CELL_TYPES " + std::to_string(cells.size()) + "\n";
  const std::string type = dim == 3 ? "12\n" : "9\n";
  for (std::size_t i = 0; i < cells.size(); ++i) out += type;

  if (!fields.cell_scalars.empty()) {
    out += "CELL_DATA " + std::to_string(cells.size()) + "\n";
    for (const auto& [name, values] : fields.cell_scalars) {
      if (values.size() != static_cast<std::size_t>(n_el))
        throw InvalidArgument("export_vtk: cell field '" + name + "' is not element-aligned");
      out += "SCALARS " + name + " double 1\nLOOKUP_TABLE default\n";
      for (Index e : cells) {
        put(out, values[static_cast<std::size_t>(e)]);
        out += '\n';
      }
    }
  }
  if (!fields.point_vectors.empty()) {
    out += "POINT_DATA " + std::to_string(mesh.node_count()) + "\n";
    for (const auto& [name, v] : fields.point_vectors) {
      if (v.size() != mesh.dof_count())
        throw InvalidArgument("export_vtk: point field '" + name + "' is not node-aligned");
      out += "VECTORS " + name + " double\n";
      for (Index p = 0; p < mesh.node_count(); ++p) {
        for (int a = 0; a < 3; ++a) {
          if (a) out += ' ';
          put(out, a < dim ? v[p * dim + a] : 0.0);
        }
        out += '\n';
      }
    }
  }
  write_file(path, out);
}

void export_history(const std::vector<HistoryRow>& history, const std::filesystem::path& path) {
  if (history.empty()) throw InvalidArgument("export_history: empty history");
  std::string out = std::string(kHistoryHeader) + "\n";
  for (const auto& r : history) {
    out += std::to_string(r.iter);
    for (double v : {r.v, r.J_over_J0, r.P_over_P0, r.lambda, r.g1, r.g2, r.mu1, r.mu2, r.gamma1, r.gamma2}) {
      out += ',';
      put(out, v);
    }
    out += ',' + std::to_string(r.inner_steps) + ',';
    put(out, r.wall_s);
    out += '\n';
  }
  write_file(path, out);
}

}  // namespace tobuck
