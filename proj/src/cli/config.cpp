#include <cmath>
#include <fstream>
#include <set>

#include "kbrw/cli.hpp"
#include "kbrw/error.hpp"
#include "kbrw/kinetic.hpp"
#include "kbrw/stationary.hpp"
#include "json_util.hpp"

namespace kbrw::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

Budgets parse_budgets(const json* b) {
  Budgets out;
  if (!b) return out;
  expect_object(*b, "budgets");
  reject_unknown(*b, {"n_replicas", "n_mc", "cap", "n_big", "n_W", "seeds"}, "budgets");
  out.n_replicas = get_count(*b, "n_replicas", out.n_replicas, "budgets");
  out.n_mc = get_count(*b, "n_mc", out.n_mc, "budgets");
  out.cap = get_count(*b, "cap", out.cap, "budgets");
  out.n_big = static_cast<int>(get_count(*b, "n_big", static_cast<std::size_t>(out.n_big), "budgets"));
  out.n_W = get_count(*b, "n_W", out.n_W, "budgets");
  out.seeds = get_count(*b, "seeds", out.seeds, "budgets");
  if (out.n_big > 24) throw ConfigError("budgets.n_big must be at most 24");
  return out;
}

Tolerances parse_tolerances(const json* t) {
  Tolerances out;
  if (!t) return out;
  expect_object(*t, "tolerances");
  reject_unknown(*t, {"atol", "sigma_level", "significance"}, "tolerances");
  out.atol = get_number(*t, "atol", out.atol, "tolerances");
  out.sigma_level = get_number(*t, "sigma_level", out.sigma_level, "tolerances");
  out.significance = get_number(*t, "significance", out.significance, "tolerances");
  if (!(out.atol >= 0.0)) throw ConfigError("tolerances.atol must be >= 0");
  if (out.sigma_level != 2.0 && out.sigma_level != 3.0 && out.sigma_level != 4.0) {
    throw ConfigError("tolerances.sigma_level must be 2, 3 or 4");
  }
  if (!(out.significance > 0.0 && out.significance < 1.0)) {
    throw ConfigError("tolerances.significance must lie in (0, 1)");
  }
  return out;
}

Orthogonal3 parse_matrix(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 9) throw ConfigError(where + " must be an array of 9 numbers");
  Orthogonal3::Entries e{};
  for (std::size_t i = 0; i < 9; ++i) {
    if (!v[i].is_number()) throw ConfigError(where + " must be an array of 9 numbers");
    e[i] = v[i].get<double>();
  }
  try {
    return Orthogonal3::from_entries(e, 1e-9);
  } catch (const Error& err) {
    throw ConfigError(where + ": " + err.what());
  }
}

Orthogonal3 parse_fixed_rotation(const json& v, const std::string& where) {
  if (v.is_string() && v.get<std::string>() == "identity") return Orthogonal3::identity();
  if (v.is_array()) return parse_matrix(v, where);
  if (v.is_object()) {
    if (v.contains("planar")) {
      reject_unknown(v, {"planar"}, where);
      return planar_rotation(get_number(v, "planar", 0.0, where));
    }
    if (v.contains("axis")) {
      reject_unknown(v, {"axis", "angle"}, where);
      const Vector3 axis = get_vector3(v.at("axis"), where + ".axis");
      if (!(norm(axis) > 0.0)) throw ConfigError(where + ".axis must be nonzero");
      return axis_rotation(axis, get_number(v, "angle", 0.0, where));
    }
  }
  throw ConfigError(where + " must be \"identity\", 9 entries, {\"planar\": theta} or {\"axis\", \"angle\"}");
}

RotationSpec parse_rotation_spec(const json* v, const std::string& where) {
  if (!v) return RotationSpec::fixed(Orthogonal3::identity());
  if (v->is_string()) {
    const auto s = v->get<std::string>();
    if (s == "uniform_planar") return RotationSpec::uniform_planar();
    if (s == "haar") return RotationSpec::haar();
  }
  return RotationSpec::fixed(parse_fixed_rotation(*v, where));
}

}  // namespace

RunConfig parse_config(const json& doc, std::optional<std::uint64_t> seed_override) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(doc, {"seed", "kernel", "command", "budgets", "tolerances", "output", "description"}, "config");
  RunConfig cfg;
  cfg.raw = doc;
  if (seed_override) {
    cfg.seed = *seed_override;
  } else {
    const json* s = find(doc, "seed");
    if (!s) throw ConfigError("config has no seed; pass one in the file or with --seed");
    if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<std::int64_t>() >= 0)) {
      throw ConfigError("seed must be a nonnegative integer");
    }
    cfg.seed = s->get<std::uint64_t>();
  }
  cfg.raw["seed"] = cfg.seed;
  const json* k = find(doc, "kernel");
  if (!k) throw ConfigError("config has no kernel block");
  expect_object(*k, "kernel");
  cfg.kernel = *k;
  if (const json* c = find(doc, "command")) {
    expect_object(*c, "command");
    cfg.command = *c;
  } else {
    cfg.command = json::object();
  }
  cfg.budgets = parse_budgets(find(doc, "budgets"));
  cfg.tolerances = parse_tolerances(find(doc, "tolerances"));
  if (const json* o = find(doc, "output")) {
    if (!o->is_string()) throw ConfigError("output must be a string path");
    cfg.output = o->get<std::string>();
  }
  build_kernel(cfg.kernel);  // surface kernel errors before any work starts
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return parse_config(doc, seed_override);
}

KernelModel build_kernel(const json& spec) {
  expect_object(spec, "kernel");
  const std::string name = get_string(spec, "name", "", "kernel");
  try {
    if (name == "dirichlet" || name == "independent_uniform" || name == "degenerate") {
      reject_unknown(spec, {"name", "alpha"}, "kernel");
      const double alpha = get_number(spec, "alpha", std::nan(""), "kernel");
      if (!std::isfinite(alpha)) throw ConfigError("kernel." + name + " needs a numeric alpha");
      if (name == "dirichlet") return dirichlet_scalar_kernel(alpha);
      if (name == "independent_uniform") return independent_uniform_kernel(alpha);
      return degenerate_kernel(alpha);
    }
    if (name == "isotropic") {
      reject_unknown(spec, {"name", "base", "shared"}, "kernel");
      const json* base = find(spec, "base");
      if (!base) throw ConfigError("kernel.isotropic needs a base kernel");
      return isotropic_kernel(build_kernel(*base), get_bool(spec, "shared", false, "kernel"));
    }
    if (name == "frame_dependent") {
      reject_unknown(spec, {"name"}, "kernel");
      return frame_dependent_kernel();
    }
    if (name == "atoms") {
      reject_unknown(spec, {"name", "label", "atoms"}, "kernel");
      const json* atoms = find(spec, "atoms");
      if (!atoms || !atoms->is_array() || atoms->empty()) throw ConfigError("kernel.atoms needs a nonempty atom list");
      std::vector<KernelAtom> list;
      for (std::size_t i = 0; i < atoms->size(); ++i) {
        const json& a = (*atoms)[i];
        const std::string where = "kernel.atoms[" + std::to_string(i) + "]";
        expect_object(a, where);
        reject_unknown(a, {"weight", "r1", "r2", "o1", "o2"}, where);
        KernelAtom atom;
        atom.weight = get_number(a, "weight", 1.0, where);
        atom.r1 = get_number(a, "r1", std::nan(""), where);
        atom.r2 = get_number(a, "r2", std::nan(""), where);
        if (!(atom.weight > 0.0 && std::isfinite(atom.weight))) throw ConfigError(where + ".weight must be positive");
        if (!(atom.r1 >= 0.0 && atom.r2 >= 0.0 && std::isfinite(atom.r1) && std::isfinite(atom.r2))) {
          throw ConfigError(where + " needs finite r1, r2 >= 0");
        }
        atom.o1 = parse_rotation_spec(find(a, "o1"), where + ".o1");
        atom.o2 = parse_rotation_spec(find(a, "o2"), where + ".o2");
        list.push_back(atom);
      }
      return atom_kernel(get_string(spec, "label", "atoms", "kernel"), std::move(list), false);
    }
  } catch (const Error& e) {
    throw ConfigError(std::string("kernel: ") + e.what());
  }
  throw ConfigError("unknown kernel name '" + name + "'");
}

CharFn build_datum(const json& spec) {
  expect_object(spec, "datum");
  const std::string type = get_string(spec, "type", "", "datum");
  try {
    if (type == "constant_one") {
      reject_unknown(spec, {"type"}, "datum");
      return constant_one();
    }
    if (type == "gaussian") {
      reject_unknown(spec, {"type", "scale"}, "datum");
      return gaussian_cf(get_number(spec, "scale", 1.0, "datum"));
    }
    if (type == "stable") {
      reject_unknown(spec, {"type", "alpha", "sigma"}, "datum");
      return stable_cf(get_number(spec, "alpha", std::nan(""), "datum"), get_number(spec, "sigma", 1.0, "datum"));
    }
    if (type == "stationary_file") {
      reject_unknown(spec, {"type", "path"}, "datum");
      const std::string path = get_string(spec, "path", "", "datum");
      std::ifstream in(path);
      if (!in) throw ConfigError("cannot read stationary solution " + path);
      json doc;
      try {
        doc = json::parse(in);
      } catch (const json::exception& e) {
        throw ConfigError("malformed stationary solution " + path + ": " + e.what());
      }
      return solution_from_json(doc).char_fn;
    }
  } catch (const Error& e) {
    throw ConfigError(std::string("datum: ") + e.what());
  }
  throw ConfigError("unknown datum type '" + type + "'");
}

std::vector<FourierPoint> build_grid(const json* spec) {
  if (!spec) return default_grid();
  if (!spec->is_array() || spec->empty()) throw ConfigError("grid must be a nonempty array of points");
  std::vector<FourierPoint> out;
  for (std::size_t i = 0; i < spec->size(); ++i) {
    const json& p = (*spec)[i];
    const std::string where = "grid[" + std::to_string(i) + "]";
    expect_object(p, where);
    if (p.contains("xi")) {
      reject_unknown(p, {"xi"}, where);
      out.push_back(frame_from_direction(get_vector3(p.at("xi"), where + ".xi")));
      continue;
    }
    reject_unknown(p, {"r", "o"}, where);
    const double r = get_number(p, "r", std::nan(""), where);
    if (!(r >= 0.0 && std::isfinite(r))) throw ConfigError(where + ".r must be finite and >= 0");
    const json* o = find(p, "o");
    out.push_back({r, o ? parse_fixed_rotation(*o, where + ".o") : Orthogonal3::identity()});
  }
  return out;
}

}  // namespace kbrw::cli
