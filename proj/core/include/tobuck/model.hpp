#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace tobuck {

using Index = std::ptrdiff_t;

enum class Axis : int { x = 0, y = 1, z = 2 };

std::optional<Axis> parse_axis(std::string_view name);
char axis_name(Axis axis);

/// Isotropic linear thermo-elastic material.
struct Material {
  double E = 0.0;      ///< Young's modulus [Pa]
  double nu = 0.0;     ///< Poisson ratio
  double alpha = 0.0;  ///< thermal expansion coefficient [1/degC]

  /// Returns one message per violated invariant (empty when valid).
  std::vector<std::string> problems() const;
  void validate() const;
  bool operator==(const Material&) const = default;
};

/// An axis-aligned boundary face of the grid, optionally restricted to
/// inclusive node-index ranges along the other axes ("y-max" with x in
/// [8, 12] selects a patch at the centre of the top face).
struct FaceSelector {
  Axis axis = Axis::x;
  bool max_side = false;
  std::array<std::optional<std::array<int, 2>>, 3> ranges{};

  /// Parses "x-min", "y-max", ... ; throws InvalidArgument otherwise.
  static FaceSelector parse(std::string_view name);
  std::string name() const;

  bool operator==(const FaceSelector&) const = default;
};

struct Support {
  FaceSelector face;
  std::vector<Axis> axes;
  bool operator==(const Support&) const = default;
};

struct PointLoad {
  std::array<int, 3> node{};  ///< lattice coordinates (i, j, k)
  Axis axis = Axis::x;
  double magnitude = 0.0;  ///< [N]
  bool operator==(const PointLoad&) const = default;
};

/// Uniform traction `magnitude * direction` [Pa] over a selected face.
struct FacePressure {
  FaceSelector face;
  double magnitude = 0.0;
  std::array<double, 3> direction{};
  bool operator==(const FacePressure&) const = default;
};

struct LoadCase {
  std::vector<PointLoad> point_loads;
  std::vector<FacePressure> face_pressures;
  double delta_t = 0.0;  ///< uniform temperature rise above the reference [degC]
  bool operator==(const LoadCase&) const = default;
};

struct GridSpec {
  std::array<int, 3> dims{1, 1, 1};  ///< elements per axis; nz == 1 selects 2D plane stress
  std::array<double, 3> element_size{1.0, 1.0, 1.0};  ///< [m]
  double thickness = 1.0;                              ///< out-of-plane thickness in 2D [m]
  bool solid = false;  ///< with nz == 1, build one layer of bricks instead of plane-stress quads
  bool is_2d() const noexcept { return dims[2] == 1 && !solid; }
  bool operator==(const GridSpec&) const = default;
};

/// Structured grid of identical bricks (3D) or rectangles (2D plane stress).
/// Node (i, j, k) has index i + (nx+1) * (j + (ny+1) * k); DOF = node * dim + axis.
/// Local element node order follows the VTK hexahedron / quad convention.
class VoxelMesh {
 public:
  explicit VoxelMesh(const GridSpec& spec, std::vector<Index> fixed_dofs = {});

  const GridSpec& spec() const noexcept { return spec_; }
  bool is_2d() const noexcept { return spec_.is_2d(); }
  int dim() const noexcept { return is_2d() ? 2 : 3; }
  int nodes_per_element() const noexcept { return is_2d() ? 4 : 8; }
  int dofs_per_element() const noexcept { return nodes_per_element() * dim(); }
  int stress_components() const noexcept { return is_2d() ? 3 : 6; }

  Index element_count() const noexcept { return element_count_; }
  Index node_count() const noexcept { return node_count_; }
  Index dof_count() const noexcept { return node_count_ * dim(); }

  /// Node lattice extent per axis (nz + 1 in 3D, 1 in 2D).
  std::array<int, 3> node_dims() const noexcept;
  Index node_index(int i, int j, int k) const noexcept;
  std::array<int, 3> node_lattice(Index node) const noexcept;
  std::array<double, 3> node_position(Index node) const noexcept;

  Index element_index(int i, int j, int k) const noexcept;
  std::array<int, 3> element_lattice(Index e) const noexcept;
  std::array<double, 3> element_center(Index e) const noexcept;
  double element_volume() const noexcept;

  std::span<const Index> element_nodes(Index e) const noexcept;
  std::span<const Index> element_dofs(Index e) const noexcept;

  std::span<const Index> fixed_dofs() const noexcept { return fixed_dofs_; }
  bool is_fixed(Index dof) const noexcept { return fixed_mask_[dof] != 0; }

  /// Elements grouped so that no two elements in a group share a node.
  const std::vector<std::vector<Index>>& colors() const noexcept { return colors_; }

  /// Nodes on a boundary face (sorted, unique). Throws if the selector names
  /// the z axis of a 2D mesh or its ranges fall outside the lattice.
  std::vector<Index> nodes_on(const FaceSelector& face) const;

  /// Copy of the lattice with a different set of constrained DOFs.
  VoxelMesh with_fixed_dofs(std::vector<Index> fixed_dofs) const;

 private:
  GridSpec spec_;
  Index element_count_ = 0;
  Index node_count_ = 0;
  std::vector<Index> element_nodes_;
  std::vector<Index> element_dofs_;
  std::vector<Index> fixed_dofs_;
  std::vector<std::uint8_t> fixed_mask_;
  std::vector<std::vector<Index>> colors_;
};

/// Which elements are frozen as solid by default.
struct NonDesignOptions {
  bool protect_supports = true;
  bool protect_loads = true;
  bool operator==(const NonDesignOptions&) const = default;
};

/// Mesh with resolved constraints and loads.
struct GridModel {
  VoxelMesh mesh;
  Material material;
  LoadCase loads;
  Eigen::VectorXd structural_load;             ///< consistent nodal forces [N]
  std::vector<std::uint8_t> non_design_mask;   ///< per element
};

/// Resolves supports into fixed DOFs and loads into nodal forces. Face
/// pressures are lumped by tributary area. Loads landing on constrained DOFs
/// are dropped with a warning.
GridModel build_grid(const GridSpec& grid, const Material& material, const LoadCase& loads,
                     std::span<const Support> supports, const NonDesignOptions& non_design = {});

/// Per-element level-set values and the topology they induce.
struct DesignField {
  std::vector<double> values;
  std::vector<std::uint8_t> presence;
  std::vector<std::uint8_t> non_design_mask;
  double tau = 0.0;

  Index size() const noexcept { return static_cast<Index>(presence.size()); }
  bool present(Index e) const noexcept { return presence[static_cast<std::size_t>(e)] != 0; }
};

/// Every element present, values zero.
DesignField full_design(Index element_count, std::vector<std::uint8_t> non_design_mask = {});

/// count(presence) / N. Warns when the topology is empty.
double volume_fraction(const DesignField& design);

}  // namespace tobuck
