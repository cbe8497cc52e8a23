#include "tobuck/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "tobuck/diagnostics.hpp"

namespace tobuck {

std::optional<Axis> parse_axis(std::string_view name) {
  if (name == "x") return Axis::x;
  if (name == "y") return Axis::y;
  if (name == "z") return Axis::z;
  return std::nullopt;
}

char axis_name(Axis axis) { return "xyz"[static_cast<int>(axis)]; }

std::vector<std::string> Material::problems() const {
  std::vector<std::string> out;
  if (!(E > 0.0) || !std::isfinite(E)) out.push_back("material.E must be > 0 (got " + std::to_string(E) + ")");
  if (!(nu >= 0.0 && nu < 0.5))
    out.push_back("material.nu must satisfy 0 <= nu < 0.5 (got " + std::to_string(nu) + ")");
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    out.push_back("material.alpha must be >= 0 (got " + std::to_string(alpha) + ")");
  return out;
}

void Material::validate() const {
  auto p = problems();
  if (!p.empty()) throw InvalidArgument(p.front());
}

FaceSelector FaceSelector::parse(std::string_view name) {
  if (name.size() == 5 && name[1] == '-') {
    auto axis = parse_axis(name.substr(0, 1));
    auto side = name.substr(2);
    if (axis && (side == "min" || side == "max")) {
      FaceSelector f;
      f.axis = *axis;
      f.max_side = side == "max";
      return f;
    }
  }
  throw InvalidArgument("unknown face selector '" + std::string(name) +
                        "' (expected x-min, x-max, y-min, y-max, z-min or z-max)");
}

std::string FaceSelector::name() const {
  return std::string(1, axis_name(axis)) + (max_side ? "-max" : "-min");
}

// --- VoxelMesh -------------------------------------------------------------

namespace {

constexpr std::array<std::array<int, 3>, 8> kCorner = {{
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
}};

}  // namespace

VoxelMesh::VoxelMesh(const GridSpec& spec, std::vector<Index> fixed_dofs) : spec_(spec) {
  for (int a = 0; a < 3; ++a) {
    if (spec_.dims[a] < 1) throw InvalidArgument("grid needs at least one element per axis");
    if (!(spec_.element_size[a] > 0.0))
      throw InvalidArgument(std::string("element size along ") + "xyz"[a] + " must be > 0");
  }
  if (is_2d() && !(spec_.thickness > 0.0)) throw InvalidArgument("2D thickness must be > 0");

  const auto nd = node_dims();
  node_count_ = Index{nd[0]} * nd[1] * nd[2];
  element_count_ = Index{spec_.dims[0]} * spec_.dims[1] * (is_2d() ? 1 : spec_.dims[2]);

  const int npe = nodes_per_element();
  const int d = dim();
  element_nodes_.resize(static_cast<std::size_t>(element_count_ * npe));
  element_dofs_.resize(static_cast<std::size_t>(element_count_ * npe * d));
  colors_.assign(static_cast<std::size_t>(is_2d() ? 4 : 8), {});

  for (Index e = 0; e < element_count_; ++e) {
    const auto [i, j, k] = element_lattice(e);
    for (int a = 0; a < npe; ++a) {
      const auto& c = kCorner[static_cast<std::size_t>(a)];
      const Index n = node_index(i + c[0], j + c[1], k + c[2]);
      element_nodes_[static_cast<std::size_t>(e * npe + a)] = n;
      for (int q = 0; q < d; ++q) element_dofs_[static_cast<std::size_t>((e * npe + a) * d + q)] = n * d + q;
    }
    const int color = (i % 2) + 2 * (j % 2) + (is_2d() ? 0 : 4 * (k % 2));
    colors_[static_cast<std::size_t>(color)].push_back(e);
  }
  std::erase_if(colors_, [](const auto& c) { return c.empty(); });

  std::sort(fixed_dofs.begin(), fixed_dofs.end());
  fixed_dofs.erase(std::unique(fixed_dofs.begin(), fixed_dofs.end()), fixed_dofs.end());
  fixed_mask_.assign(static_cast<std::size_t>(dof_count()), 0);
  for (Index dof : fixed_dofs) {
    if (dof < 0 || dof >= dof_count())
      throw InvalidArgument("fixed DOF " + std::to_string(dof) + " out of range [0, " +
                            std::to_string(dof_count()) + ")");
    fixed_mask_[static_cast<std::size_t>(dof)] = 1;
  }
  fixed_dofs_ = std::move(fixed_dofs);
}

std::array<int, 3> VoxelMesh::node_dims() const noexcept {
  return {spec_.dims[0] + 1, spec_.dims[1] + 1, is_2d() ? 1 : spec_.dims[2] + 1};
}

Index VoxelMesh::node_index(int i, int j, int k) const noexcept {
  const auto nd = node_dims();
  return i + Index{nd[0]} * (j + Index{nd[1]} * k);
}

std::array<int, 3> VoxelMesh::node_lattice(Index node) const noexcept {
  const auto nd = node_dims();
  const int i = static_cast<int>(node % nd[0]);
  const int j = static_cast<int>((node / nd[0]) % nd[1]);
  const int k = static_cast<int>(node / (Index{nd[0]} * nd[1]));
  return {i, j, k};
}

std::array<double, 3> VoxelMesh::node_position(Index node) const noexcept {
  const auto l = node_lattice(node);
  return {l[0] * spec_.element_size[0], l[1] * spec_.element_size[1], l[2] * spec_.element_size[2]};
}

Index VoxelMesh::element_index(int i, int j, int k) const noexcept {
  return i + Index{spec_.dims[0]} * (j + Index{spec_.dims[1]} * k);
}

std::array<int, 3> VoxelMesh::element_lattice(Index e) const noexcept {
  const int nx = spec_.dims[0];
  const int ny = spec_.dims[1];
  return {static_cast<int>(e % nx), static_cast<int>((e / nx) % ny), static_cast<int>(e / (Index{nx} * ny))};
}

std::array<double, 3> VoxelMesh::element_center(Index e) const noexcept {
  const auto l = element_lattice(e);
  const auto& h = spec_.element_size;
  return {(l[0] + 0.5) * h[0], (l[1] + 0.5) * h[1], is_2d() ? 0.0 : (l[2] + 0.5) * h[2]};
}

double VoxelMesh::element_volume() const noexcept {
  const auto& h = spec_.element_size;
  return is_2d() ? h[0] * h[1] * spec_.thickness : h[0] * h[1] * h[2];
}

std::span<const Index> VoxelMesh::element_nodes(Index e) const noexcept {
  const auto npe = static_cast<std::size_t>(nodes_per_element());
  return {element_nodes_.data() + static_cast<std::size_t>(e) * npe, npe};
}

std::span<const Index> VoxelMesh::element_dofs(Index e) const noexcept {
  const auto n = static_cast<std::size_t>(dofs_per_element());
  return {element_dofs_.data() + static_cast<std::size_t>(e) * n, n};
}

std::vector<Index> VoxelMesh::nodes_on(const FaceSelector& face) const {
  const int a = static_cast<int>(face.axis);
  if (is_2d() && a == 2) throw InvalidArgument("face selector " + face.name() + " is not valid on a 2D mesh");
  const auto nd = node_dims();
  std::array<int, 3> lo{0, 0, 0};
  std::array<int, 3> hi{nd[0] - 1, nd[1] - 1, nd[2] - 1};
  for (int b = 0; b < 3; ++b) {
    if (!face.ranges[b]) continue;
    const auto [r0, r1] = *face.ranges[b];
    if (r0 > r1 || r0 < 0 || r1 > nd[b] - 1)
      throw InvalidArgument("range on " + std::string(1, "xyz"[b]) + " for selector " + face.name() +
                            " outside node lattice [0, " + std::to_string(nd[b] - 1) + "]");
    lo[b] = r0;
    hi[b] = r1;
  }
  lo[a] = hi[a] = face.max_side ? nd[a] - 1 : 0;
  std::vector<Index> nodes;
  for (int k = lo[2]; k <= hi[2]; ++k)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int i = lo[0]; i <= hi[0]; ++i) nodes.push_back(node_index(i, j, k));
  return nodes;
}

VoxelMesh VoxelMesh::with_fixed_dofs(std::vector<Index> fixed_dofs) const {
  return VoxelMesh(spec_, std::move(fixed_dofs));
}

// --- build_grid ------------------------------------------------------------

namespace {

// Consistent nodal forces of a uniform traction over the selected face.
void lump_pressure(const VoxelMesh& mesh, const FacePressure& p, Eigen::VectorXd& f,
                   std::vector<std::uint8_t>& loaded) {
  const auto face_nodes = mesh.nodes_on(p.face);
  std::set<Index> in_face(face_nodes.begin(), face_nodes.end());
  const int a = static_cast<int>(p.face.axis);
  const int d = mesh.dim();
  const auto nd = mesh.node_dims();
  const auto& h = mesh.spec().element_size;
  std::array<double, 3> traction{};
  for (int q = 0; q < 3; ++q) traction[q] = p.magnitude * p.direction[q];

  const int side = p.face.max_side ? nd[a] - 1 : 0;
  std::vector<int> tangential;
  for (int b = 0; b < d; ++b)
    if (b != a) tangential.push_back(b);

  auto accumulate = [&](std::span<const Index> patch, double area) {
    for (Index n : patch)
      if (!in_face.contains(n)) return;
    const double share = area / static_cast<double>(patch.size());
    for (Index n : patch) {
      loaded[static_cast<std::size_t>(n)] = 1;
      for (int q = 0; q < d; ++q) f[n * d + q] += traction[q] * share;
    }
  };

  if (mesh.is_2d()) {
    const int b = tangential[0];
    const double length = h[b] * mesh.spec().thickness;
    for (int s = 0; s + 1 < nd[b]; ++s) {
      std::array<int, 3> l0{0, 0, 0};
      l0[a] = side;
      l0[b] = s;
      auto l1 = l0;
      l1[b] = s + 1;
      const std::array<Index, 2> seg{mesh.node_index(l0[0], l0[1], 0), mesh.node_index(l1[0], l1[1], 0)};
      accumulate(seg, length);
    }
  } else {
    const int b = tangential[0];
    const int c = tangential[1];
    const double area = h[b] * h[c];
    for (int t = 0; t + 1 < nd[c]; ++t)
      for (int s = 0; s + 1 < nd[b]; ++s) {
        std::array<Index, 4> quad{};
        const std::array<std::array<int, 2>, 4> off{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
        for (std::size_t q = 0; q < 4; ++q) {
          std::array<int, 3> l{0, 0, 0};
          l[a] = side;
          l[b] = s + off[q][0];
          l[c] = t + off[q][1];
          quad[q] = mesh.node_index(l[0], l[1], l[2]);
        }
        accumulate(quad, area);
      }
  }
}

}  // namespace

GridModel build_grid(const GridSpec& grid, const Material& material, const LoadCase& loads,
                     std::span<const Support> supports, const NonDesignOptions& non_design) {
  material.validate();
  if (loads.delta_t < 0.0) throw InvalidArgument("delta_t must be >= 0");
  VoxelMesh lattice(grid);
  const int d = lattice.dim();

  std::vector<Index> fixed;
  for (const auto& s : supports) {
    const auto nodes = lattice.nodes_on(s.face);
    if (nodes.empty() || s.axes.empty())
      throw InvalidArgument("support selector " + s.face.name() + " resolves to no DOFs");
    for (Axis ax : s.axes) {
      if (static_cast<int>(ax) >= d)
        throw InvalidArgument("support axis z is not valid on a 2D mesh");
      for (Index n : nodes) fixed.push_back(n * d + static_cast<int>(ax));
    }
  }
  VoxelMesh mesh = lattice.with_fixed_dofs(std::move(fixed));

  Eigen::VectorXd f = Eigen::VectorXd::Zero(mesh.dof_count());
  std::vector<std::uint8_t> loaded(static_cast<std::size_t>(mesh.node_count()), 0);
  const auto nd = mesh.node_dims();
  for (const auto& pl : loads.point_loads) {
    const auto& l = pl.node;
    if (l[0] < 0 || l[1] < 0 || l[2] < 0 || l[0] >= nd[0] || l[1] >= nd[1] || l[2] >= nd[2])
      throw InvalidArgument("point load node outside the lattice");
    if (static_cast<int>(pl.axis) >= d) throw InvalidArgument("point load axis z is not valid on a 2D mesh");
    const Index n = mesh.node_index(l[0], l[1], l[2]);
    f[n * d + static_cast<int>(pl.axis)] += pl.magnitude;
    if (pl.magnitude != 0.0) loaded[static_cast<std::size_t>(n)] = 1;
  }
  for (const auto& p : loads.face_pressures) {
    if (mesh.nodes_on(p.face).empty()) throw InvalidArgument("pressure selector " + p.face.name() + " is empty");
    lump_pressure(mesh, p, f, loaded);
  }

  double dropped = 0.0;
  for (Index dof : mesh.fixed_dofs()) {
    dropped = std::max(dropped, std::abs(f[dof]));
    f[dof] = 0.0;
  }
  if (dropped > 0.0) warn("load applied on a constrained DOF was discarded");

  std::vector<std::uint8_t> mask(static_cast<std::size_t>(mesh.element_count()), 0);
  for (Index e = 0; e < mesh.element_count(); ++e) {
    bool frozen = false;
    for (Index n : mesh.element_nodes(e)) {
      if (non_design.protect_loads && loaded[static_cast<std::size_t>(n)]) frozen = true;
      if (non_design.protect_supports)
        for (int q = 0; q < d; ++q) frozen = frozen || mesh.is_fixed(n * d + q);
    }
    mask[static_cast<std::size_t>(e)] = frozen ? 1 : 0;
  }

  return GridModel{std::move(mesh), material, loads, std::move(f), std::move(mask)};
}

DesignField full_design(Index element_count, std::vector<std::uint8_t> non_design_mask) {
  DesignField d;
  const auto n = static_cast<std::size_t>(element_count);
  d.values.assign(n, 0.0);
  d.presence.assign(n, 1);
  d.non_design_mask = non_design_mask.empty() ? std::vector<std::uint8_t>(n, 0) : std::move(non_design_mask);
  if (d.non_design_mask.size() != n) throw InvalidArgument("non-design mask size mismatch");
  return d;
}

double volume_fraction(const DesignField& design) {
  if (design.presence.empty()) {
    warn("degenerate topology: design has no elements");
    return 0.0;
  }
  const auto count = std::count_if(design.presence.begin(), design.presence.end(), [](auto p) { return p != 0; });
  if (count == 0) warn("degenerate topology: no element is present");
  return static_cast<double>(count) / static_cast<double>(design.presence.size());
}

}  // namespace tobuck
