#include "tobuck/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tobuck/diagnostics.hpp"

namespace tobuck {

namespace {

using json = nlohmann::json;

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

// Walks a JSON document and records every problem instead of stopping at the first.
class Reader {
 public:
  std::vector<std::string> problems;

  void fail(std::string msg) { problems.push_back(std::move(msg)); }

  void reject_unknown(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, value] : obj.items()) {
      (void)value;
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        fail("unknown key '" + join(path, key) + "'");
    }
  }

  const json* object(const json& parent, const std::string& path, std::string_view key, bool required) {
    const auto it = parent.find(std::string(key));
    if (it == parent.end()) {
      if (required) fail("missing block '" + join(path, key) + "'");
      return nullptr;
    }
    if (!it->is_object()) {
      fail("'" + join(path, key) + "' must be an object");
      return nullptr;
    }
    return &*it;
  }

  const json* array(const json& parent, const std::string& path, std::string_view key, bool required) {
    const auto it = parent.find(std::string(key));
    if (it == parent.end()) {
      if (required) fail("missing key '" + join(path, key) + "'");
      return nullptr;
    }
    if (!it->is_array()) {
      fail("'" + join(path, key) + "' must be an array");
      return nullptr;
    }
    return &*it;
  }

  std::optional<double> number(const json& obj, const std::string& path, std::string_view key, bool required) {
    const auto it = obj.find(std::string(key));
    if (it == obj.end()) {
      if (required) fail("missing key '" + join(path, key) + "'");
      return std::nullopt;
    }
    return as_number(*it, join(path, key));
  }

  std::optional<double> as_number(const json& v, const std::string& where) {
    if (!v.is_number()) {
      fail("'" + where + "' must be a number");
      return std::nullopt;
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
      fail("'" + where + "' must be finite");
      return std::nullopt;
    }
    return x;
  }

  std::optional<long long> integer(const json& obj, const std::string& path, std::string_view key, bool required) {
    const auto it = obj.find(std::string(key));
    if (it == obj.end()) {
      if (required) fail("missing key '" + join(path, key) + "'");
      return std::nullopt;
    }
    if (!it->is_number_integer()) {
      fail("'" + join(path, key) + "' must be an integer");
      return std::nullopt;
    }
    return it->get<long long>();
  }

  std::optional<bool> boolean(const json& obj, const std::string& path, std::string_view key) {
    const auto it = obj.find(std::string(key));
    if (it == obj.end()) return std::nullopt;
    if (!it->is_boolean()) {
      fail("'" + join(path, key) + "' must be true or false");
      return std::nullopt;
    }
    return it->get<bool>();
  }

  std::optional<std::string> string(const json& obj, const std::string& path, std::string_view key, bool required) {
    const auto it = obj.find(std::string(key));
    if (it == obj.end()) {
      if (required) fail("missing key '" + join(path, key) + "'");
      return std::nullopt;
    }
    if (!it->is_string()) {
      fail("'" + join(path, key) + "' must be a string");
      return std::nullopt;
    }
    return it->get<std::string>();
  }

  template <std::size_t N>
  std::optional<std::array<double, N>> numbers(const json& obj, const std::string& path, std::string_view key,
                                               bool required) {
    const json* a = array(obj, path, key, required);
    if (!a) return std::nullopt;
    if (a->size() != N) {
      fail("'" + join(path, key) + "' must hold " + std::to_string(N) + " numbers");
      return std::nullopt;
    }
    std::array<double, N> out{};
    bool ok = true;
    for (std::size_t i = 0; i < N; ++i) {
      auto x = as_number((*a)[i], join(path, key) + "[" + std::to_string(i) + "]");
      if (x) out[i] = *x;
      else ok = false;
    }
    if (!ok) return std::nullopt;
    return out;
  }

  template <std::size_t N>
  std::optional<std::array<int, N>> integers(const json& obj, const std::string& path, std::string_view key,
                                             bool required) {
    const json* a = array(obj, path, key, required);
    if (!a) return std::nullopt;
    if (a->size() != N || !std::all_of(a->begin(), a->end(), [](const json& v) { return v.is_number_integer(); })) {
      fail("'" + join(path, key) + "' must hold " + std::to_string(N) + " integers");
      return std::nullopt;
    }
    std::array<int, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = (*a)[i].get<int>();
    return out;
  }
};

std::optional<Axis> read_axis(Reader& r, const json& v, const std::string& where) {
  if (v.is_string()) {
    if (auto a = parse_axis(v.get<std::string>())) return a;
  }
  r.fail("'" + where + "' must be one of \"x\", \"y\", \"z\"");
  return std::nullopt;
}

// Face name plus optional inclusive node ranges {"x": [lo, hi], ...}.
std::optional<FaceSelector> read_face(Reader& r, const json& obj, const std::string& path) {
  auto name = r.string(obj, path, "face", true);
  std::optional<FaceSelector> face;
  if (name) {
    try {
      face = FaceSelector::parse(*name);
    } catch (const InvalidArgument& e) {
      r.fail(join(path, "face") + ": " + e.what());
    }
  }
  if (const json* ranges = r.object(obj, path, "ranges", false)) {
    const std::string rpath = join(path, "ranges");
    r.reject_unknown(*ranges, rpath, {"x", "y", "z"});
    for (int b = 0; b < 3; ++b) {
      const std::string key(1, "xyz"[b]);
      if (!ranges->contains(key)) continue;
      auto range = r.integers<2>(*ranges, rpath, key, true);
      if (!range) continue;
      if (face && static_cast<int>(face->axis) == b) {
        r.fail("'" + join(rpath, key) + "' restricts the face normal axis");
        continue;
      }
      if (face) face->ranges[static_cast<std::size_t>(b)] = *range;
    }
  }
  return face;
}

void check_face(Reader& r, const FaceSelector& face, const GridSpec& grid, const std::string& where) {
  const bool is_2d = grid.is_2d();
  if (is_2d && face.axis == Axis::z) {
    r.fail(where + ": face " + face.name() + " does not exist on a 2D mesh");
    return;
  }
  for (int b = 0; b < 3; ++b) {
    const auto& range = face.ranges[static_cast<std::size_t>(b)];
    if (!range) continue;
    const int top = (is_2d && b == 2) ? 0 : grid.dims[static_cast<std::size_t>(b)];
    if ((*range)[0] > (*range)[1] || (*range)[0] < 0 || (*range)[1] > top)
      r.fail(where + ": range on " + std::string(1, "xyz"[b]) + " outside node lattice [0, " + std::to_string(top) +
             "]");
  }
}

void read_mesh(Reader& r, const json& root, ProblemSpec& spec) {
  const json* m = r.object(root, "", "mesh", true);
  if (!m) return;
  const std::string path = "mesh";
  r.reject_unknown(*m, path, {"dims", "element_size", "thickness", "solid", "supports", "non_design"});
  auto& grid = spec.mesh.grid;
  if (auto dims = r.integers<3>(*m, path, "dims", true)) {
    grid.dims = *dims;
    for (int a = 0; a < 3; ++a)
      if (grid.dims[static_cast<std::size_t>(a)] < 1)
        r.fail("mesh.dims[" + std::to_string(a) + "] must be >= 1 (got " + std::to_string(grid.dims[a]) + ")");
  }
  if (auto h = r.numbers<3>(*m, path, "element_size", true)) {
    grid.element_size = *h;
    for (int a = 0; a < 3; ++a)
      if (!(grid.element_size[static_cast<std::size_t>(a)] > 0.0))
        r.fail("mesh.element_size[" + std::to_string(a) + "] must be > 0");
  }
  if (auto t = r.number(*m, path, "thickness", false)) {
    grid.thickness = *t;
    if (!(*t > 0.0)) r.fail("mesh.thickness must be > 0");
  }
  if (auto b = r.boolean(*m, path, "solid")) grid.solid = *b;

  if (const json* supports = r.array(*m, path, "supports", true)) {
    if (supports->empty()) r.fail("mesh.supports must name at least one constrained face");
    for (std::size_t i = 0; i < supports->size(); ++i) {
      const std::string spath = "mesh.supports[" + std::to_string(i) + "]";
      const json& s = (*supports)[i];
      if (!s.is_object()) {
        r.fail("'" + spath + "' must be an object");
        continue;
      }
      r.reject_unknown(s, spath, {"face", "ranges", "axes"});
      Support sup;
      auto face = read_face(r, s, spath);
      if (const json* axes = r.array(s, spath, "axes", true)) {
        if (axes->empty()) r.fail("'" + spath + ".axes' must not be empty");
        for (std::size_t k = 0; k < axes->size(); ++k)
          if (auto a = read_axis(r, (*axes)[k], spath + ".axes[" + std::to_string(k) + "]")) sup.axes.push_back(*a);
      }
      if (face) {
        sup.face = *face;
        spec.mesh.supports.push_back(std::move(sup));
      }
    }
  }
  if (const json* nd = r.object(*m, path, "non_design", false)) {
    r.reject_unknown(*nd, "mesh.non_design", {"protect_supports", "protect_loads"});
    if (auto b = r.boolean(*nd, "mesh.non_design", "protect_supports")) spec.mesh.non_design.protect_supports = *b;
    if (auto b = r.boolean(*nd, "mesh.non_design", "protect_loads")) spec.mesh.non_design.protect_loads = *b;
  }
}

void read_material(Reader& r, const json& root, ProblemSpec& spec) {
  const json* m = r.object(root, "", "material", true);
  if (!m) return;
  r.reject_unknown(*m, "material", {"E", "nu", "alpha"});
  auto E = r.number(*m, "material", "E", true);
  auto nu = r.number(*m, "material", "nu", true);
  auto alpha = r.number(*m, "material", "alpha", true);
  if (E) spec.material.E = *E;
  if (nu) spec.material.nu = *nu;
  if (alpha) spec.material.alpha = *alpha;
  if (E && nu && alpha)
    for (auto& p : spec.material.problems()) r.fail(p);
}

void read_loads(Reader& r, const json& root, ProblemSpec& spec) {
  const json* l = r.object(root, "", "loads", true);
  if (!l) return;
  r.reject_unknown(*l, "loads", {"delta_t", "point_loads", "pressures"});
  if (auto dt = r.number(*l, "loads", "delta_t", false)) spec.loads.delta_t = *dt;

  if (const json* pts = r.array(*l, "loads", "point_loads", false)) {
    for (std::size_t i = 0; i < pts->size(); ++i) {
      const std::string path = "loads.point_loads[" + std::to_string(i) + "]";
      const json& p = (*pts)[i];
      if (!p.is_object()) {
        r.fail("'" + path + "' must be an object");
        continue;
      }
      r.reject_unknown(p, path, {"node", "axis", "magnitude"});
      PointLoad load;
      auto node = r.integers<3>(p, path, "node", true);
      std::optional<Axis> axis;
      if (auto it = p.find("axis"); it != p.end()) axis = read_axis(r, *it, path + ".axis");
      else r.fail("missing key '" + path + ".axis'");
      auto mag = r.number(p, path, "magnitude", true);
      if (node && axis && mag) {
        load.node = *node;
        load.axis = *axis;
        load.magnitude = *mag;
        spec.loads.point_loads.push_back(load);
      }
    }
  }
  if (const json* prs = r.array(*l, "loads", "pressures", false)) {
    for (std::size_t i = 0; i < prs->size(); ++i) {
      const std::string path = "loads.pressures[" + std::to_string(i) + "]";
      const json& p = (*prs)[i];
      if (!p.is_object()) {
        r.fail("'" + path + "' must be an object");
        continue;
      }
      r.reject_unknown(p, path, {"face", "ranges", "magnitude", "direction"});
      auto face = read_face(r, p, path);
      auto mag = r.number(p, path, "magnitude", true);
      auto dir = r.numbers<3>(p, path, "direction", true);
      if (face && mag && dir) spec.loads.face_pressures.push_back({*face, *mag, *dir});
    }
  }
}

void read_constraints(Reader& r, const json& root, ProblemSpec& spec) {
  const json* c = r.object(root, "", "constraints", true);
  if (!c) return;
  r.reject_unknown(*c, "constraints", {"a1", "a2", "v_target"});
  auto& out = spec.constraints;
  for (auto [key, slot] : {std::pair<const char*, std::optional<double>*>{"a1", &out.a1}, {"a2", &out.a2}}) {
    const auto it = c->find(key);
    if (it == c->end() || it->is_null()) continue;
    *slot = r.as_number(*it, std::string("constraints.") + key);
    if (*slot && !(**slot > 0.0)) r.fail(std::string("constraints.") + key + " must be > 0");
  }
  if (!out.a1 && !out.a2) r.fail("constraints: at least one of a1, a2 must be given");
  if (auto v = r.number(*c, "constraints", "v_target", true)) {
    out.v_target = *v;
    if (!(*v > 0.0 && *v <= 1.0)) r.fail("constraints.v_target must lie in (0, 1]");
  }
}

void read_solver(Reader& r, const json& root, ProblemSpec& spec) {
  const json* s = r.object(root, "", "solver", true);
  if (!s) return;
  const std::string path = "solver";
  r.reject_unknown(*s, path,
                   {"rel_tol", "eig_tol", "filter_radius", "ersatz_eps", "dv0", "linear", "max_iters", "seed"});
  auto& out = spec.solver;
  auto open_unit = [&](const char* key, double& slot) {
    if (auto x = r.number(*s, path, key, false)) {
      slot = *x;
      if (!(*x > 0.0 && *x < 1.0)) r.fail("solver." + std::string(key) + " must lie in (0, 1)");
    }
  };
  open_unit("rel_tol", out.rel_tol);
  open_unit("eig_tol", out.eig_tol);
  open_unit("ersatz_eps", out.ersatz_eps);
  open_unit("dv0", out.dv0);
  if (auto x = r.number(*s, path, "filter_radius", false)) {
    out.filter_radius = *x;
    if (!(*x >= 0.0)) r.fail("solver.filter_radius must be >= 0");
  }
  if (auto name = r.string(*s, path, "linear", false)) {
    try {
      out.linear = parse_linear_solver(*name);
    } catch (const InvalidArgument& e) {
      r.fail(std::string("solver.linear: ") + e.what());
    }
  }
  if (auto n = r.integer(*s, path, "max_iters", false)) {
    if (*n < 1 || *n > 100000000) r.fail("solver.max_iters must lie in [1, 1e8]");
    else out.max_iters = static_cast<int>(*n);
  }
  if (auto n = r.integer(*s, path, "seed", false)) {
    if (*n < 0) r.fail("solver.seed must be >= 0");
    else out.seed = static_cast<std::uint64_t>(*n);
  }
}

void read_output(Reader& r, const json& root, ProblemSpec& spec) {
  const json* o = r.object(root, "", "output", true);
  if (!o) return;
  r.reject_unknown(*o, "output", {"directory", "formats", "export_every"});
  if (auto d = r.string(*o, "output", "directory", false)) {
    if (d->empty()) r.fail("output.directory must not be empty");
    spec.output.directory = *d;
  }
  if (const json* f = r.array(*o, "output", "formats", false)) {
    spec.output.formats.clear();
    for (std::size_t i = 0; i < f->size(); ++i) {
      const json& v = (*f)[i];
      if (v.is_string() && (v == "vtk" || v == "csv")) spec.output.formats.push_back(v.get<std::string>());
      else r.fail("output.formats[" + std::to_string(i) + "] must be \"vtk\" or \"csv\"");
    }
  }
  if (auto n = r.integer(*o, "output", "export_every", false)) {
    if (*n < 0) r.fail("output.export_every must be >= 0");
    else spec.output.export_every = static_cast<int>(*n);
  }
}

void check_geometry(Reader& r, const ProblemSpec& spec) {
  const auto& grid = spec.mesh.grid;
  if (std::any_of(grid.dims.begin(), grid.dims.end(), [](int d) { return d < 1; })) return;
  for (std::size_t i = 0; i < spec.mesh.supports.size(); ++i) {
    const auto& s = spec.mesh.supports[i];
    const std::string where = "mesh.supports[" + std::to_string(i) + "]";
    check_face(r, s.face, grid, where);
    if (grid.is_2d())
      for (Axis a : s.axes)
        if (a == Axis::z) r.fail(where + ": axis z does not exist on a 2D mesh");
  }
  for (std::size_t i = 0; i < spec.loads.face_pressures.size(); ++i)
    check_face(r, spec.loads.face_pressures[i].face, grid, "loads.pressures[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < spec.loads.point_loads.size(); ++i) {
    const auto& p = spec.loads.point_loads[i];
    const bool is_2d = grid.is_2d();
    for (int b = 0; b < 3; ++b) {
      const int top = (is_2d && b == 2) ? 0 : grid.dims[static_cast<std::size_t>(b)];
      if (p.node[static_cast<std::size_t>(b)] < 0 || p.node[static_cast<std::size_t>(b)] > top)
        r.fail("loads.point_loads[" + std::to_string(i) + "].node lies outside the node lattice");
    }
    if (is_2d && p.axis == Axis::z)
      r.fail("loads.point_loads[" + std::to_string(i) + "]: axis z does not exist on a 2D mesh");
  }
}

json face_json(const FaceSelector& f) {
  json out = json::object();
  out["face"] = f.name();
  json ranges = json::object();
  for (int b = 0; b < 3; ++b)
    if (const auto& r = f.ranges[static_cast<std::size_t>(b)]) ranges[std::string(1, "xyz"[b])] = {(*r)[0], (*r)[1]};
  if (!ranges.empty()) out["ranges"] = ranges;
  return out;
}

}  // namespace

ProblemSpec parse_problem_text(std::string_view text) {
  json root;
  if (std::all_of(text.begin(), text.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
    root = json::object();
  } else {
    try {
      root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
      throw ConfigError({std::string("malformed JSON: ") + e.what()});
    }
  }
  if (!root.is_object()) throw ConfigError({"configuration must be a JSON object"});

  Reader r;
  ProblemSpec spec;
  r.reject_unknown(root, "", {"description", "mesh", "material", "loads", "constraints", "solver", "output"});
  if (auto d = r.string(root, "", "description", false)) spec.description = *d;
  read_mesh(r, root, spec);
  read_material(r, root, spec);
  read_loads(r, root, spec);
  read_constraints(r, root, spec);
  read_solver(r, root, spec);
  read_output(r, root, spec);
  check_geometry(r, spec);
  if (!r.problems.empty()) throw ConfigError(std::move(r.problems));
  return spec;
}

ProblemSpec parse_problem_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({"cannot read configuration file '" + path.string() + "'"});
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_problem_text(buf.str());
}

std::string serialize_problem(const ProblemSpec& spec) {
  json root = json::object();
  if (!spec.description.empty()) root["description"] = spec.description;

  json mesh = json::object();
  const auto& g = spec.mesh.grid;
  mesh["dims"] = g.dims;
  mesh["element_size"] = g.element_size;
  mesh["thickness"] = g.thickness;
  if (g.solid) mesh["solid"] = true;
  json supports = json::array();
  for (const auto& s : spec.mesh.supports) {
    json j = face_json(s.face);
    json axes = json::array();
    for (Axis a : s.axes) axes.push_back(std::string(1, axis_name(a)));
    j["axes"] = axes;
    supports.push_back(j);
  }
  mesh["supports"] = supports;
  mesh["non_design"] = {{"protect_supports", spec.mesh.non_design.protect_supports},
                        {"protect_loads", spec.mesh.non_design.protect_loads}};
  root["mesh"] = mesh;

  root["material"] = {{"E", spec.material.E}, {"nu", spec.material.nu}, {"alpha", spec.material.alpha}};

  json loads = json::object();
  loads["delta_t"] = spec.loads.delta_t;
  json points = json::array();
  for (const auto& p : spec.loads.point_loads)
    points.push_back({{"node", p.node}, {"axis", std::string(1, axis_name(p.axis))}, {"magnitude", p.magnitude}});
  loads["point_loads"] = points;
  json pressures = json::array();
  for (const auto& p : spec.loads.face_pressures) {
    json j = face_json(p.face);
    j["magnitude"] = p.magnitude;
    j["direction"] = p.direction;
    pressures.push_back(j);
  }
  loads["pressures"] = pressures;
  root["loads"] = loads;

  const auto& c = spec.constraints;
  root["constraints"] = {{"a1", c.a1 ? json(*c.a1) : json(nullptr)},
                         {"a2", c.a2 ? json(*c.a2) : json(nullptr)},
                         {"v_target", c.v_target}};

  const auto& s = spec.solver;
  root["solver"] = {{"rel_tol", s.rel_tol},
                    {"eig_tol", s.eig_tol},
                    {"filter_radius", s.filter_radius},
                    {"ersatz_eps", s.ersatz_eps},
                    {"dv0", s.dv0},
                    {"linear", std::string(to_string(s.linear))},
                    {"max_iters", s.max_iters},
                    {"seed", s.seed}};
  root["output"] = {{"directory", spec.output.directory},
                    {"formats", spec.output.formats},
                    {"export_every", spec.output.export_every}};
  return root.dump(2) + "\n";
}

OptimizationProblem build_problem(const ProblemSpec& spec) {
  GridModel grid = build_grid(spec.mesh.grid, spec.material, spec.loads, spec.mesh.supports, spec.mesh.non_design);
  OptimizationSettings settings;
  settings.a1 = spec.constraints.a1;
  settings.a2 = spec.constraints.a2;
  settings.v_target = spec.constraints.v_target;
  settings.dv0 = spec.solver.dv0;
  settings.filter_radius = spec.solver.filter_radius;
  settings.solver.rel_tol = spec.solver.rel_tol;
  settings.solver.max_iters = spec.solver.max_iters;
  settings.solver.ersatz_eps = spec.solver.ersatz_eps;
  settings.solver.kind = spec.solver.linear;
  settings.eigen.tol = spec.solver.eig_tol;
  settings.eigen.seed = spec.solver.seed;
  if (auto p = settings.problems(); !p.empty()) throw ConfigError(std::move(p));
  return OptimizationProblem{AnalysisModel(std::move(grid)), settings};
}

std::filesystem::path resolve_config_path(std::string_view name_or_path,
                                          const std::vector<std::filesystem::path>& fixture_dirs) {
  const std::filesystem::path given(name_or_path);
  if (std::filesystem::is_regular_file(given)) return given;
  for (const auto& dir : fixture_dirs) {
    for (const auto& candidate : {dir / given, dir / (std::string(name_or_path) + ".json")})
      if (std::filesystem::is_regular_file(candidate)) return candidate;
  }
  throw ConfigError({"no configuration file or fixture named '" + std::string(name_or_path) + "'"});
}

}  // namespace tobuck
