#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "tobuck/model.hpp"
#include "tobuck/optimizer.hpp"

namespace tobuck {

struct VtkFields {
  /// One value per element of the full grid; only present cells are written.
  std::vector<std::pair<std::string, std::vector<double>>> cell_scalars;
  /// Global DOF vectors, written as 3-component point vectors.
  std::vector<std::pair<std::string, Eigen::VectorXd>> point_vectors;
};

/// presence, level-set value, sensitivities and centre stress per cell;
/// displacement and buckling mode per point.
VtkFields analysis_fields(const VoxelMesh& mesh, const DesignField& design, const DesignAnalysis& analysis);

/// Legacy ASCII VTK unstructured grid holding every lattice point and the
/// present elements as hexahedra (3D) or quads (2D). Output is byte-stable.
void export_vtk(const VoxelMesh& mesh, const DesignField& design, const VtkFields& fields,
                const std::filesystem::path& path);

inline constexpr const char* kHistoryHeader =
    "iter,v,J_over_J0,P_over_P0,lambda,g1,g2,mu1,mu2,gamma1,gamma2,inner_steps,wall_s";

void export_history(const std::vector<HistoryRow>& history, const std::filesystem::path& path);

}  // namespace tobuck
