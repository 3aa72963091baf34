#pragma once

// Strict TOML configuration. Every table rejects keys it does not know.
//
//   [time]        t_end, n_steps                         (required)
//   [diffusion]   dim = 1, sigma = 1.0 | [[..],[..]]
//   [kernel]      kind = zero | cosine_diff | tanh_attract | bounded_gauss | cosine_y; a, omega
//   [drift]       kind = zero | table; times, xs, values, sup_norm
//   [initial]     kind = gaussian | uniform | point_mass; mean, var, lo, hi, x0
//   [rng]         seed
//   [scheme]      kind = uniform | power | custom; r, c, alphas
//   [pde]         n_cells, coverage, substeps
//   [experiment]  per-experiment knobs, see ExperimentParams

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "seqmv/model.hpp"
#include "seqmv/weights.hpp"

namespace seqmv {

struct PdeSettings {
  std::size_t n_cells = 400;
  double coverage = 6.0;
  std::size_t substeps = 0;
};

struct ExperimentParams {
  std::optional<std::size_t> replicas;
  std::vector<std::size_t> i_list;
  std::vector<std::size_t> n_list;
  std::optional<std::size_t> n;
  double beta = 3.0;
  double r_max = 40.0;
  std::size_t table_points = 801;
  std::vector<double> r_values;
  double c = 1.0;
  std::size_t tail_m = 4;
  std::optional<std::size_t> spde_replicas;
  double min_separation = 0.10;
  std::size_t plateau_lo = 64;
  std::size_t plateau_hi = 512;
};

struct ParsedConfig {
  RawConfig raw;
  Config config;
  WeightScheme scheme = WeightScheme::uniform();
  PdeSettings pde;
  ExperimentParams experiment;
  std::string source;  // file contents, hashed into the run manifest

  ParsedConfig with_seed(std::uint64_t seed) const {
    ParsedConfig out = *this;
    out.raw.seed = seed;
    out.config = validate_config(out.raw);
    return out;
  }
};

namespace detail {

inline void reject_unknown(const toml::table& t, std::string_view section, std::initializer_list<std::string_view> keys) {
  for (const auto& [k, v] : t) {
    bool known = false;
    for (auto key : keys) known = known || k.str() == key;
    if (!known) {
      std::ostringstream os;
      os << "unknown key '" << (section.empty() ? "" : std::string(section) + ".") << k.str() << "'";
      if (const auto line = v.source().begin.line; line > 0) os << " (line " << line << ")";
      throw ConfigError(os.str());
    }
  }
}

inline std::string where(std::string_view section, std::string_view key) {
  return std::string(section) + "." + std::string(key);
}

inline std::optional<double> get_double(const toml::table& t, std::string_view section, std::string_view key) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  if (auto v = n->value<double>(); v && (n->is_floating_point() || n->is_integer())) return *v;
  throw ConfigError(where(section, key) + " must be a number");
}

inline double require_double(const toml::table& t, std::string_view section, std::string_view key) {
  auto v = get_double(t, section, key);
  if (!v) throw ConfigError(where(section, key) + " required");
  return *v;
}

inline std::optional<std::int64_t> get_int(const toml::table& t, std::string_view section, std::string_view key) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  if (!n->is_integer()) throw ConfigError(where(section, key) + " must be an integer");
  return n->value<std::int64_t>();
}

inline std::optional<std::size_t> get_count(const toml::table& t, std::string_view section, std::string_view key) {
  auto v = get_int(t, section, key);
  if (!v) return std::nullopt;
  if (*v < 0) throw ConfigError(where(section, key) + " must be nonnegative");
  return static_cast<std::size_t>(*v);
}

inline std::string get_string(const toml::table& t, std::string_view section, std::string_view key,
                              std::string fallback) {
  const toml::node* n = t.get(key);
  if (!n) return fallback;
  if (!n->is_string()) throw ConfigError(where(section, key) + " must be a string");
  return std::string(*n->value<std::string_view>());
}

inline std::vector<double> number_list(const toml::node& n, const std::string& name) {
  const toml::array* arr = n.as_array();
  if (!arr) throw ConfigError(name + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : *arr) {
    auto v = e.value<double>();
    if (!v || !(e.is_floating_point() || e.is_integer())) throw ConfigError(name + " must be an array of numbers");
    out.push_back(*v);
  }
  return out;
}

inline std::vector<double> get_list(const toml::table& t, std::string_view section, std::string_view key) {
  const toml::node* n = t.get(key);
  if (!n) return {};
  return number_list(*n, where(section, key));
}

inline std::vector<std::size_t> get_count_list(const toml::table& t, std::string_view section, std::string_view key) {
  std::vector<std::size_t> out;
  for (double v : get_list(t, section, key)) {
    if (!(v >= 0.0) || v != std::floor(v)) throw ConfigError(where(section, key) + " must hold nonnegative integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

inline const toml::table* section(const toml::table& root, std::string_view name) {
  const toml::node* n = root.get(name);
  if (!n) return nullptr;
  if (!n->is_table()) throw ConfigError(std::string(name) + " must be a table");
  return n->as_table();
}

}  // namespace detail

inline ParsedConfig parse_config_string(std::string_view text, std::string_view origin = "config") {
  using namespace detail;
  toml::table root;
  try {
    root = toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "parse error at line " << e.source().begin.line << ", column " << e.source().begin.column << ": "
       << e.description();
    throw ConfigError(os.str());
  }
  reject_unknown(root, "", {"time", "diffusion", "kernel", "drift", "initial", "rng", "scheme", "pde", "experiment"});

  ParsedConfig out;
  out.source = std::string(text);
  RawConfig& raw = out.raw;
  const toml::table empty;

  const toml::table* time = section(root, "time");
  const toml::table& tt = time ? *time : empty;
  reject_unknown(tt, "time", {"t_end", "n_steps"});
  raw.t_end = require_double(tt, "time", "t_end");
  const auto n_steps = get_count(tt, "time", "n_steps");
  if (!n_steps) throw ConfigError("time.n_steps required");
  raw.n_steps = *n_steps;

  if (const toml::table* d = section(root, "diffusion")) {
    reject_unknown(*d, "diffusion", {"dim", "sigma"});
    if (auto dim = get_int(*d, "diffusion", "dim")) raw.dim = static_cast<int>(*dim);
    if (raw.dim < 1 || raw.dim > kMaxDim) throw ConfigError("diffusion.dim must be 1 or 2");
    if (const toml::node* s = d->get("sigma")) {
      if (s->is_array()) {
        raw.sigma.clear();
        for (const auto& row : *s->as_array()) {
          const auto r = number_list(row, "diffusion.sigma rows");
          raw.sigma.insert(raw.sigma.end(), r.begin(), r.end());
        }
        if (raw.sigma.size() != static_cast<std::size_t>(raw.dim * raw.dim)) {
          throw ConfigError("diffusion.sigma must be a dim x dim matrix");
        }
      } else {
        const double v = require_double(*d, "diffusion", "sigma");
        raw.sigma.assign(static_cast<std::size_t>(raw.dim * raw.dim), 0.0);
        for (int c = 0; c < raw.dim; ++c) raw.sigma[static_cast<std::size_t>(c * raw.dim + c)] = v;
      }
    } else {
      raw.sigma.assign(static_cast<std::size_t>(raw.dim * raw.dim), 0.0);
      for (int c = 0; c < raw.dim; ++c) raw.sigma[static_cast<std::size_t>(c * raw.dim + c)] = 1.0;
    }
  }

  if (const toml::table* k = section(root, "kernel")) {
    const std::string kind = get_string(*k, "kernel", "kind", "zero");
    const double a = get_double(*k, "kernel", "a").value_or(1.0);
    if (kind == "zero") {
      reject_unknown(*k, "kernel", {"kind"});
      raw.kernel = ZeroKernel{};
    } else if (kind == "cosine_diff") {
      reject_unknown(*k, "kernel", {"kind", "a", "omega"});
      raw.kernel = CosineDiffKernel{a, get_double(*k, "kernel", "omega").value_or(1.0)};
    } else if (kind == "tanh_attract") {
      reject_unknown(*k, "kernel", {"kind", "a"});
      raw.kernel = TanhAttractKernel{a};
    } else if (kind == "bounded_gauss") {
      reject_unknown(*k, "kernel", {"kind", "a"});
      raw.kernel = BoundedGaussKernel{a};
    } else if (kind == "cosine_y") {
      reject_unknown(*k, "kernel", {"kind", "a"});
      raw.kernel = CosineYKernel{a};
    } else {
      throw ConfigError("unknown kernel.kind '" + kind +
                        "'; valid kinds: zero, cosine_diff, tanh_attract, bounded_gauss, cosine_y");
    }
  }

  if (const toml::table* b = section(root, "drift")) {
    const std::string kind = get_string(*b, "drift", "kind", "zero");
    if (kind == "zero") {
      reject_unknown(*b, "drift", {"kind"});
      raw.drift = ZeroDrift{};
    } else if (kind == "table") {
      reject_unknown(*b, "drift", {"kind", "times", "xs", "values", "sup_norm"});
      TabulatedDrift tab;
      tab.times = get_list(*b, "drift", "times");
      tab.xs = get_list(*b, "drift", "xs");
      if (const toml::node* v = b->get("values")) {
        if (!v->is_array()) throw ConfigError("drift.values must be an array of rows");
        for (const auto& row : *v->as_array()) {
          const auto r = number_list(row, "drift.values rows");
          tab.values.insert(tab.values.end(), r.begin(), r.end());
        }
      }
      tab.declared_sup = require_double(*b, "drift", "sup_norm");
      raw.drift = tab;
    } else {
      throw ConfigError("unknown drift.kind '" + kind + "'; valid kinds: zero, table");
    }
  }

  if (const toml::table* i = section(root, "initial")) {
    const std::string kind = get_string(*i, "initial", "kind", "gaussian");
    if (kind == "gaussian") {
      reject_unknown(*i, "initial", {"kind", "mean", "var"});
      raw.initial = GaussianLaw{get_double(*i, "initial", "mean").value_or(0.0),
                                get_double(*i, "initial", "var").value_or(1.0)};
    } else if (kind == "uniform") {
      reject_unknown(*i, "initial", {"kind", "lo", "hi"});
      raw.initial = UniformLaw{require_double(*i, "initial", "lo"), require_double(*i, "initial", "hi")};
    } else if (kind == "point_mass") {
      reject_unknown(*i, "initial", {"kind", "x0"});
      raw.initial = PointMassLaw{get_double(*i, "initial", "x0").value_or(0.0)};
    } else {
      throw ConfigError("unknown initial.kind '" + kind + "'; valid kinds: gaussian, uniform, point_mass");
    }
  }

  if (const toml::table* r = section(root, "rng")) {
    reject_unknown(*r, "rng", {"seed"});
    if (auto s = get_int(*r, "rng", "seed")) raw.seed = static_cast<std::uint64_t>(*s);
  }

  if (const toml::table* s = section(root, "scheme")) {
    const std::string kind = get_string(*s, "scheme", "kind", "uniform");
    if (kind == "uniform") {
      reject_unknown(*s, "scheme", {"kind"});
      out.scheme = WeightScheme::uniform();
    } else if (kind == "power") {
      reject_unknown(*s, "scheme", {"kind", "r", "c"});
      out.scheme =
          WeightScheme::power_law(require_double(*s, "scheme", "r"), get_double(*s, "scheme", "c").value_or(1.0));
    } else if (kind == "custom") {
      reject_unknown(*s, "scheme", {"kind", "alphas"});
      out.scheme = WeightScheme::custom(get_list(*s, "scheme", "alphas"));
    } else {
      throw ConfigError("unknown scheme.kind '" + kind + "'; valid kinds: uniform, power, custom");
    }
  }

  if (const toml::table* p = section(root, "pde")) {
    reject_unknown(*p, "pde", {"n_cells", "coverage", "substeps"});
    out.pde.n_cells = get_count(*p, "pde", "n_cells").value_or(out.pde.n_cells);
    out.pde.coverage = get_double(*p, "pde", "coverage").value_or(out.pde.coverage);
    out.pde.substeps = get_count(*p, "pde", "substeps").value_or(0);
    if (out.pde.n_cells < 3) throw ConfigError("pde.n_cells must be >= 3");
  }

  if (const toml::table* e = section(root, "experiment")) {
    reject_unknown(*e, "experiment",
                   {"replicas", "i_list", "n_list", "n", "beta", "r_max", "table_points", "r_values", "c", "tail_m",
                    "spde_replicas", "min_separation", "plateau_lo", "plateau_hi"});
    ExperimentParams& x = out.experiment;
    x.replicas = get_count(*e, "experiment", "replicas");
    x.i_list = get_count_list(*e, "experiment", "i_list");
    x.n_list = get_count_list(*e, "experiment", "n_list");
    x.n = get_count(*e, "experiment", "n");
    x.beta = get_double(*e, "experiment", "beta").value_or(x.beta);
    x.r_max = get_double(*e, "experiment", "r_max").value_or(x.r_max);
    x.table_points = get_count(*e, "experiment", "table_points").value_or(x.table_points);
    x.r_values = get_list(*e, "experiment", "r_values");
    x.c = get_double(*e, "experiment", "c").value_or(x.c);
    x.tail_m = get_count(*e, "experiment", "tail_m").value_or(x.tail_m);
    x.spde_replicas = get_count(*e, "experiment", "spde_replicas");
    x.min_separation = get_double(*e, "experiment", "min_separation").value_or(x.min_separation);
    x.plateau_lo = get_count(*e, "experiment", "plateau_lo").value_or(x.plateau_lo);
    x.plateau_hi = get_count(*e, "experiment", "plateau_hi").value_or(x.plateau_hi);
  }

  out.config = validate_config(raw);
  return out;
}

inline ParsedConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str(), path);
}

}  // namespace seqmv
