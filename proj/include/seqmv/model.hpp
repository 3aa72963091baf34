#pragma once

// Shared domain types: time grid, diffusion matrix, interaction kernels,
// external drift, initial laws and the validated run configuration.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "seqmv/rng.hpp"

namespace seqmv {

/// Largest spatial dimension any component supports.
inline constexpr int kMaxDim = 2;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Time

class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(double t_end, std::size_t n_steps) : t_end_(t_end), n_steps_(n_steps) {
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("time.t_end must be > 0");
    if (n_steps == 0) throw ConfigError("time.n_steps must be >= 1");
    dt_ = t_end / static_cast<double>(n_steps);
  }

  double t_end() const { return t_end_; }
  std::size_t n_steps() const { return n_steps_; }
  std::size_t n_points() const { return n_steps_ + 1; }
  double dt() const { return dt_; }
  double time(std::size_t k) const {
    return k == n_steps_ ? t_end_ : static_cast<double>(k) * dt_;
  }
  std::vector<double> times() const {
    std::vector<double> out(n_points());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = time(k);
    return out;
  }
  /// The same horizon with twice as many steps.
  TimeGrid refined() const { return TimeGrid(t_end_, 2 * n_steps_); }

  bool operator==(const TimeGrid&) const = default;

 private:
  double t_end_ = 1.0;
  std::size_t n_steps_ = 1;
  double dt_ = 1.0;
};

// ---------------------------------------------------------------------------
// Diffusion

struct DiffusionSpec {
  int dim = 1;
  std::vector<double> sigma;      // row-major dim x dim
  std::vector<double> sigma_inv;  // row-major dim x dim
  double sigma_inv_norm = 1.0;    // operator 2-norm of sigma^-1
  double kappa = 0.0;             // |sigma^-1|^2 |K|_inf^2

  /// out = sigma * z
  void apply_sigma(const double* z, double* out) const {
    for (int r = 0; r < dim; ++r) {
      double s = 0.0;
      for (int c = 0; c < dim; ++c) s += sigma[r * dim + c] * z[c];
      out[r] = s;
    }
  }
  /// |sigma^-1 v|^2
  double whitened_norm_sq(const double* v) const {
    double total = 0.0;
    for (int r = 0; r < dim; ++r) {
      double s = 0.0;
      for (int c = 0; c < dim; ++c) s += sigma_inv[r * dim + c] * v[c];
      total += s * s;
    }
    return total;
  }
  /// Scalar sigma for 1-D components (PDE, SPDE, moment oracle).
  double scalar() const { return sigma.at(0); }
};

inline DiffusionSpec make_diffusion(int dim, std::span<const double> sigma_row_major,
                                    double kernel_sup_norm) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("diffusion.dim must be 1 or 2");
  if (sigma_row_major.size() != static_cast<std::size_t>(dim * dim)) {
    throw ConfigError("diffusion.sigma must have dim*dim entries");
  }
  Eigen::MatrixXd s(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) {
      const double v = sigma_row_major[r * dim + c];
      if (!std::isfinite(v)) throw ConfigError("diffusion.sigma has a non-finite entry");
      s(r, c) = v;
    }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(s);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(dim - 1);
  if (!(smin > 0.0) || smax / smin > 1e12) throw ConfigError("sigma not invertible");
  const Eigen::MatrixXd inv = s.inverse();
  const Eigen::MatrixXd check = s * inv - Eigen::MatrixXd::Identity(dim, dim);
  if (check.cwiseAbs().maxCoeff() > 1e-12) throw ConfigError("sigma not invertible");

  DiffusionSpec d;
  d.dim = dim;
  d.sigma.assign(sigma_row_major.begin(), sigma_row_major.end());
  d.sigma_inv.resize(dim * dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) d.sigma_inv[r * dim + c] = inv(r, c);
  d.sigma_inv_norm = 1.0 / smin;
  d.kappa = d.sigma_inv_norm * d.sigma_inv_norm * kernel_sup_norm * kernel_sup_norm;
  return d;
}

// ---------------------------------------------------------------------------
// Interaction kernels. Multi-dimensional variants act componentwise except
// BoundedGauss, which is radial.

struct ZeroKernel {
  double operator()(double, double) const { return 0.0; }
  void eval(const double*, const double*, int dim, double* out) const {
    std::fill(out, out + dim, 0.0);
  }
  double sup_norm(int) const { return 0.0; }
};

/// K(x,y) = a cos(omega (x - y))
struct CosineDiffKernel {
  double a = 1.0;
  double omega = 1.0;
  double operator()(double x, double y) const { return a * std::cos(omega * (x - y)); }
  void eval(const double* x, const double* y, int dim, double* out) const {
    for (int c = 0; c < dim; ++c) out[c] = (*this)(x[c], y[c]);
  }
  double profile(double s) const { return a * std::cos(omega * s); }
  double sup_norm(int dim) const { return std::abs(a) * std::sqrt(static_cast<double>(dim)); }
};

/// K(x,y) = a tanh(y - x)
struct TanhAttractKernel {
  double a = 1.0;
  double operator()(double x, double y) const { return a * std::tanh(y - x); }
  void eval(const double* x, const double* y, int dim, double* out) const {
    for (int c = 0; c < dim; ++c) out[c] = (*this)(x[c], y[c]);
  }
  double profile(double s) const { return a * std::tanh(s); }
  double sup_norm(int dim) const { return std::abs(a) * std::sqrt(static_cast<double>(dim)); }
};

/// K(x,y) = a (y - x) exp(-|y - x|^2 / 2)
struct BoundedGaussKernel {
  double a = 1.0;
  double operator()(double x, double y) const {
    const double s = y - x;
    return a * s * std::exp(-0.5 * s * s);
  }
  void eval(const double* x, const double* y, int dim, double* out) const {
    double r2 = 0.0;
    for (int c = 0; c < dim; ++c) r2 += (y[c] - x[c]) * (y[c] - x[c]);
    const double g = a * std::exp(-0.5 * r2);
    for (int c = 0; c < dim; ++c) out[c] = g * (y[c] - x[c]);
  }
  double profile(double s) const { return a * s * std::exp(-0.5 * s * s); }
  double sup_norm(int) const { return std::abs(a) * std::exp(-0.5); }
};

/// K(x,y) = a cos(y); independent of x.
struct CosineYKernel {
  double a = 1.0;
  double operator()(double, double y) const { return a * std::cos(y); }
  void eval(const double*, const double* y, int dim, double* out) const {
    for (int c = 0; c < dim; ++c) out[c] = a * std::cos(y[c]);
  }
  double sup_norm(int dim) const { return std::abs(a) * std::sqrt(static_cast<double>(dim)); }
};

using KernelVariant =
    std::variant<ZeroKernel, CosineDiffKernel, TanhAttractKernel, BoundedGaussKernel, CosineYKernel>;

/// Kernels of the form K(x,y) = k(y - x) admit a Toeplitz quadrature.
template <class K>
concept TranslationInvariantKernel = requires(const K& k, double s) {
  { k.profile(s) } -> std::convertible_to<double>;
};

struct KernelSpec {
  KernelVariant variant;
  double sup_norm = 0.0;
  int dim = 1;
};

inline KernelSpec make_kernel(KernelVariant variant, int dim = 1) {
  KernelSpec k;
  k.variant = variant;
  k.dim = dim;
  k.sup_norm = std::visit([dim](const auto& kern) { return kern.sup_norm(dim); }, variant);
  return k;
}

inline std::string kernel_name(const KernelSpec& k) {
  return std::visit(
      [](const auto& kern) -> std::string {
        using T = std::decay_t<decltype(kern)>;
        if constexpr (std::is_same_v<T, ZeroKernel>) return "zero";
        else if constexpr (std::is_same_v<T, CosineDiffKernel>) return "cosine_diff";
        else if constexpr (std::is_same_v<T, TanhAttractKernel>) return "tanh_attract";
        else if constexpr (std::is_same_v<T, BoundedGaussKernel>) return "bounded_gauss";
        else return "cosine_y";
      },
      k.variant);
}

inline bool is_zero_kernel(const KernelSpec& k) {
  return std::holds_alternative<ZeroKernel>(k.variant) ||
         std::visit([](const auto& kern) { return kern.sup_norm(1) == 0.0; }, k.variant);
}

inline double kernel_eval(const KernelSpec& k, double x, double y) {
  return std::visit([&](const auto& kern) { return kern(x, y); }, k.variant);
}

inline void kernel_eval(const KernelSpec& k, std::span<const double> x, std::span<const double> y,
                        std::span<double> out) {
  const int dim = static_cast<int>(out.size());
  std::visit([&](const auto& kern) { kern.eval(x.data(), y.data(), dim, out.data()); }, k.variant);
}

/// A weighted atom of a (possibly signed) discrete measure.
struct Atom {
  std::array<double, kMaxDim> point{};
  double weight = 0.0;
};

/// (K * nu)(x) = sum_j w_j K(x, y_j). Probability weights are required unless
/// `signed_measure` is set.
inline std::vector<double> kernel_convolve_measure(const KernelSpec& k, std::span<const Atom> atoms,
                                                   std::span<const double> x,
                                                   bool signed_measure = false) {
  const int dim = static_cast<int>(x.size());
  double mass = 0.0;
  for (const Atom& a : atoms) {
    if (!std::isfinite(a.weight)) throw Error("kernel_convolve_measure: non-finite weight");
    mass += a.weight;
  }
  if (!signed_measure && !atoms.empty() && std::abs(mass - 1.0) > 1e-12) {
    throw Error("kernel_convolve_measure: weights must sum to 1 for a probability measure");
  }
  std::vector<double> out(dim, 0.0);
  std::array<double, kMaxDim> term{};
  for (const Atom& a : atoms) {
    kernel_eval(k, x, std::span<const double>(a.point.data(), dim), std::span<double>(term.data(), dim));
    for (int c = 0; c < dim; ++c) out[c] += a.weight * term[c];
  }
  return out;
}

// ---------------------------------------------------------------------------
// External drift b(t, x)

struct ZeroDrift {
  double operator()(double, double) const { return 0.0; }
  double sup_norm() const { return 0.0; }
};

/// Bilinear table over (times x positions); clamped outside its range.
struct TabulatedDrift {
  std::vector<double> times;
  std::vector<double> xs;
  std::vector<double> values;  // row-major [time][x]
  double declared_sup = 0.0;

  double operator()(double t, double x) const {
    const auto bracket = [](const std::vector<double>& g, double v) {
      if (g.size() == 1 || v <= g.front()) return std::pair<std::size_t, double>{0, 0.0};
      if (v >= g.back()) return std::pair<std::size_t, double>{g.size() - 2, 1.0};
      const auto it = std::upper_bound(g.begin(), g.end(), v);
      const std::size_t hi = static_cast<std::size_t>(it - g.begin());
      const std::size_t lo = hi - 1;
      return std::pair<std::size_t, double>{lo, (v - g[lo]) / (g[hi] - g[lo])};
    };
    const auto [it, ft] = bracket(times, t);
    const auto [ix, fx] = bracket(xs, x);
    const std::size_t nx = xs.size();
    const auto at = [&](std::size_t a, std::size_t b) {
      return values[std::min(a, times.size() - 1) * nx + std::min(b, nx - 1)];
    };
    const double v0 = (1 - fx) * at(it, ix) + fx * at(it, ix + 1);
    const double v1 = (1 - fx) * at(it + 1, ix) + fx * at(it + 1, ix + 1);
    return (1 - ft) * v0 + ft * v1;
  }
  double sup_norm() const { return declared_sup; }
};

using DriftSpec = std::variant<ZeroDrift, TabulatedDrift>;

inline double drift_eval(const DriftSpec& b, double t, double x) {
  return std::visit([&](const auto& d) { return d(t, x); }, b);
}
inline double drift_sup(const DriftSpec& b) {
  return std::visit([](const auto& d) { return d.sup_norm(); }, b);
}
inline bool is_zero_drift(const DriftSpec& b) { return std::holds_alternative<ZeroDrift>(b); }

// ---------------------------------------------------------------------------
// Initial laws (product law over components when dim > 1)

struct GaussianLaw {
  double mean = 0.0;
  double var = 1.0;
};
struct UniformLaw {
  double lo = 0.0;
  double hi = 1.0;
};
struct PointMassLaw {
  double x0 = 0.0;
};

using InitialLaw = std::variant<GaussianLaw, UniformLaw, PointMassLaw>;

inline double law_mean(const InitialLaw& law) {
  return std::visit(
      [](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, GaussianLaw>) return l.mean;
        else if constexpr (std::is_same_v<T, UniformLaw>) return 0.5 * (l.lo + l.hi);
        else return l.x0;
      },
      law);
}

inline double law_variance(const InitialLaw& law) {
  return std::visit(
      [](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, GaussianLaw>) return l.var;
        else if constexpr (std::is_same_v<T, UniformLaw>) return (l.hi - l.lo) * (l.hi - l.lo) / 12.0;
        else return 0.0;
      },
      law);
}

/// One component drawn from the law.
inline double law_sample(const InitialLaw& law, RandomStream& stream) {
  return std::visit(
      [&](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, GaussianLaw>) return l.mean + std::sqrt(l.var) * stream.normal();
        else if constexpr (std::is_same_v<T, UniformLaw>) return l.lo + (l.hi - l.lo) * stream.uniform();
        else return l.x0;
      },
      law);
}

inline double gaussian_cdf(double x, double mean, double var) {
  return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * var));
}

/// CDF of the law. A point mass is represented by Gaussian(x0, smoothing^2),
/// which is how grids see it.
inline double law_cdf(const InitialLaw& law, double x, double point_mass_smoothing = 0.0) {
  return std::visit(
      [&](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, GaussianLaw>) return gaussian_cdf(x, l.mean, l.var);
        else if constexpr (std::is_same_v<T, UniformLaw>) return std::clamp((x - l.lo) / (l.hi - l.lo), 0.0, 1.0);
        else {
          if (point_mass_smoothing <= 0.0) return x < l.x0 ? 0.0 : 1.0;
          return gaussian_cdf(x, l.x0, point_mass_smoothing * point_mass_smoothing);
        }
      },
      law);
}

inline double law_density(const InitialLaw& law, double x, double point_mass_smoothing = 0.0) {
  return std::visit(
      [&](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        const auto gauss = [](double z, double m, double v) {
          return std::exp(-0.5 * (z - m) * (z - m) / v) / std::sqrt(2.0 * std::numbers::pi * v);
        };
        if constexpr (std::is_same_v<T, GaussianLaw>) return gauss(x, l.mean, l.var);
        else if constexpr (std::is_same_v<T, UniformLaw>) return (x >= l.lo && x <= l.hi) ? 1.0 / (l.hi - l.lo) : 0.0;
        else {
          if (point_mass_smoothing <= 0.0) throw Error("point mass has no density");
          return gauss(x, l.x0, point_mass_smoothing * point_mass_smoothing);
        }
      },
      law);
}

// ---------------------------------------------------------------------------
// Configuration

/// Parsed but unchecked configuration.
struct RawConfig {
  double t_end = 0.0;
  std::size_t n_steps = 0;
  int dim = 1;
  std::vector<double> sigma{1.0};
  KernelVariant kernel = ZeroKernel{};
  DriftSpec drift = ZeroDrift{};
  InitialLaw initial = GaussianLaw{};
  std::uint64_t seed = 0;
};

struct Config {
  TimeGrid time;
  DiffusionSpec diffusion;
  KernelSpec kernel;
  DriftSpec drift;
  InitialLaw initial;
  RngContract rng;
  /// Normals summed (and rescaled) per Euler step. A run with 2 here and a
  /// run on the refined grid with 1 share their Brownian paths.
  std::size_t brownian_substeps = 1;

  int dim() const { return diffusion.dim; }
  double drift_bound() const { return kernel.sup_norm + drift_sup(drift); }
};

inline Config validate_config(const RawConfig& raw) {
  Config cfg;
  cfg.time = TimeGrid(raw.t_end, raw.n_steps);
  cfg.kernel = make_kernel(raw.kernel, raw.dim);
  std::visit(
      [](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, CosineDiffKernel>) {
          if (!std::isfinite(k.a) || !std::isfinite(k.omega)) throw ConfigError("kernel parameters must be finite");
        } else if constexpr (!std::is_same_v<T, ZeroKernel>) {
          if (!std::isfinite(k.a)) throw ConfigError("kernel.a must be finite");
        }
      },
      raw.kernel);
  cfg.diffusion = make_diffusion(raw.dim, raw.sigma, cfg.kernel.sup_norm);

  if (const auto* tab = std::get_if<TabulatedDrift>(&raw.drift)) {
    if (raw.dim != 1) throw ConfigError("tabulated drift requires dim = 1");
    if (tab->times.empty() || tab->xs.empty() || tab->values.size() != tab->times.size() * tab->xs.size()) {
      throw ConfigError("drift table shape must be len(times) x len(xs)");
    }
    if (!std::is_sorted(tab->times.begin(), tab->times.end()) || !std::is_sorted(tab->xs.begin(), tab->xs.end())) {
      throw ConfigError("drift table axes must be increasing");
    }
    for (double v : tab->values) {
      if (!std::isfinite(v)) throw ConfigError("drift table has a non-finite value");
      if (std::abs(v) > tab->declared_sup) throw ConfigError("drift.sup_norm is not an upper bound on the table");
    }
  }
  cfg.drift = raw.drift;

  std::visit(
      [](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, GaussianLaw>) {
          if (!(l.var > 0.0) || !std::isfinite(l.mean)) throw ConfigError("initial.var must be > 0");
        } else if constexpr (std::is_same_v<T, UniformLaw>) {
          if (!(l.hi > l.lo)) throw ConfigError("initial.hi must exceed initial.lo");
        } else {
          if (!std::isfinite(l.x0)) throw ConfigError("initial.x0 must be finite");
        }
      },
      raw.initial);
  cfg.initial = raw.initial;
  cfg.rng = RngContract{raw.seed};
  return cfg;
}

/// Same configuration on a different time grid.
inline Config with_time(Config cfg, TimeGrid grid) {
  cfg.time = grid;
  return cfg;
}

/// Pair of configurations on dt and dt/2 driven by the same Brownian paths.
inline std::pair<Config, Config> coupled_dt_pair(const Config& cfg) {
  Config coarse = cfg;
  coarse.brownian_substeps = 2;
  Config fine = with_time(cfg, cfg.time.refined());
  fine.brownian_substeps = 1;
  return {coarse, fine};
}

}  // namespace seqmv
