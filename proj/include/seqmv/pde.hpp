#pragma once

// Explicit finite-volume solver for the 1-D nonlinear Fokker-Planck equation
//   d_t rho = 1/2 sigma^2 d_xx rho - d_x( rho (b + K*rho) )
// on a truncated interval with no-flux walls.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "seqmv/model.hpp"

namespace seqmv {

class CflError : public Error {
 public:
  using Error::Error;
};

struct Grid1D {
  double x_min = -1.0;
  double x_max = 1.0;
  std::size_t n_cells = 2;
  double dx = 1.0;

  double center(std::size_t j) const { return x_min + (static_cast<double>(j) + 0.5) * dx; }
  double face(std::size_t j) const { return x_min + static_cast<double>(j) * dx; }
  bool contains(double x) const { return x >= x_min && x <= x_max; }
};

inline Grid1D make_grid(double x_min, double x_max, std::size_t n_cells) {
  if (!(x_max > x_min) || n_cells < 2) throw ConfigError("grid needs x_max > x_min and n_cells >= 2");
  return Grid1D{x_min, x_max, n_cells, (x_max - x_min) / static_cast<double>(n_cells)};
}

/// Standard deviation of the free diffusion at time T started from the initial law.
inline double terminal_spread(const Config& cfg) {
  const double s = cfg.diffusion.scalar();
  return std::sqrt(law_variance(cfg.initial) + s * s * cfg.time.t_end());
}

/// Symmetric grid around the initial mean: `coverage` standard deviations of
/// the terminal spread on each side plus the maximal drift displacement.
inline Grid1D grid_for(const Config& cfg, std::size_t n_cells, double coverage = 6.0) {
  const double half = coverage * terminal_spread(cfg) + cfg.drift_bound() * cfg.time.t_end();
  const double m = law_mean(cfg.initial);
  return make_grid(m - half, m + half, n_cells);
}

/// Throws unless the grid spans at least 8 terminal standard deviations
/// (4 on each side of the drift-displaced initial mean).
inline void validate_coverage(const Config& cfg, const Grid1D& grid) {
  const double sd = terminal_spread(cfg);
  const double shift = cfg.drift_bound() * cfg.time.t_end();
  const double m = law_mean(cfg.initial);
  if (m - 4.0 * sd - shift < grid.x_min || m + 4.0 * sd + shift > grid.x_max) {
    std::ostringstream os;
    os << "grid [" << grid.x_min << ", " << grid.x_max << "] does not cover 8 standard deviations ("
       << sd << ") around the initial mean plus drift displacement " << shift;
    throw ConfigError(os.str());
  }
}

class MeanFieldSolution {
 public:
  MeanFieldSolution(Grid1D grid, TimeGrid time, std::size_t substeps)
      : grid_(grid),
        time_(time),
        substeps_(substeps),
        density_(time.n_points() * grid.n_cells, 0.0),
        velocity_(time.n_points() * grid.n_cells, 0.0) {}

  const Grid1D& grid() const { return grid_; }
  const TimeGrid& time() const { return time_; }
  std::size_t substeps() const { return substeps_; }
  double max_mass_error() const { return max_mass_error_; }

  std::span<const double> density_slice(std::size_t k) const {
    return {density_.data() + k * grid_.n_cells, grid_.n_cells};
  }
  std::span<const double> velocity_slice(std::size_t k) const {
    return {velocity_.data() + k * grid_.n_cells, grid_.n_cells};
  }
  std::span<double> density_slice(std::size_t k) { return {density_.data() + k * grid_.n_cells, grid_.n_cells}; }
  std::span<double> velocity_slice(std::size_t k) { return {velocity_.data() + k * grid_.n_cells, grid_.n_cells}; }

  /// Linear interpolation between cell centers, constant in the two edge
  /// half-cells. Density is 0 outside the grid.
  double density_at_slice(std::size_t k, double x) const {
    if (!grid_.contains(x)) return 0.0;
    return interpolate(density_slice(k), x);
  }

  /// Velocity on slice k; positions off the grid are clamped to the edge value
  /// and flagged.
  double velocity_at_slice(std::size_t k, double x, bool& clamped) const {
    clamped = !grid_.contains(x);
    return interpolate(velocity_slice(k), std::clamp(x, grid_.x_min, grid_.x_max));
  }

  double density_at(double t, double x) const {
    return blend_in_time(t, [&](std::size_t k) { return density_at_slice(k, x); });
  }

  double velocity_at(double t, double x, std::size_t* clamp_counter = nullptr) const {
    bool clamped = false;
    const double v = blend_in_time(t, [&](std::size_t k) {
      bool c = false;
      const double out = velocity_at_slice(k, x, c);
      clamped = clamped || c;
      return out;
    });
    if (clamped && clamp_counter) ++*clamp_counter;
    return v;
  }

  /// Quadrature of f against slice k, normalised by the slice mass.
  template <class F>
  double expect(std::size_t k, F&& f) const {
    const auto rho = density_slice(k);
    double num = 0.0;
    double mass = 0.0;
    for (std::size_t j = 0; j < grid_.n_cells; ++j) {
      num += f(grid_.center(j)) * rho[j];
      mass += rho[j];
    }
    return num / mass;
  }

  double mass(std::size_t k) const {
    double m = 0.0;
    for (double r : density_slice(k)) m += r;
    return m * grid_.dx;
  }

  void set_max_mass_error(double e) { max_mass_error_ = e; }

  void write_csv(std::ostream& os) const {
    os << "t,x,rho,v\n";
    os.precision(17);
    for (std::size_t k = 0; k < time_.n_points(); ++k) {
      const auto rho = density_slice(k);
      const auto vel = velocity_slice(k);
      for (std::size_t j = 0; j < grid_.n_cells; ++j) {
        os << time_.time(k) << ',' << grid_.center(j) << ',' << rho[j] << ',' << vel[j] << '\n';
      }
    }
  }

 private:
  double interpolate(std::span<const double> values, double x) const {
    const double s = (x - grid_.x_min) / grid_.dx - 0.5;
    if (s <= 0.0) return values.front();
    const double last = static_cast<double>(grid_.n_cells - 1);
    if (s >= last) return values.back();
    // snap queries that land on a center up to rounding
    const double nearest = std::round(s);
    if (std::abs(s - nearest) < 1e-9) return values[static_cast<std::size_t>(nearest)];
    const auto j = static_cast<std::size_t>(s);
    const double f = s - static_cast<double>(j);
    return (1.0 - f) * values[j] + f * values[j + 1];
  }

  template <class F>
  double blend_in_time(double t, F&& at_slice) const {
    double s = std::clamp(t / time_.dt(), 0.0, static_cast<double>(time_.n_steps()));
    if (std::abs(s - std::round(s)) < 1e-9) s = std::round(s);
    const auto k = static_cast<std::size_t>(s);
    const double f = s - static_cast<double>(k);
    if (k >= time_.n_steps() || f == 0.0) return at_slice(std::min(k, time_.n_steps()));
    return (1.0 - f) * at_slice(k) + f * at_slice(k + 1);
  }

  Grid1D grid_;
  TimeGrid time_;
  std::size_t substeps_;
  std::vector<double> density_;
  std::vector<double> velocity_;
  double max_mass_error_ = 0.0;
};

enum class VelocityQuadrature { Auto, Generic };

/// v_j = sum_l K(x_j, y_l) rho_l dx on the cell centers.
class VelocityEvaluator {
 public:
  VelocityEvaluator(const KernelSpec& kernel, const Grid1D& grid,
                    VelocityQuadrature mode = VelocityQuadrature::Auto)
      : kernel_(kernel), grid_(grid), mode_(mode) {
    const std::size_t n = grid.n_cells;
    centers_.resize(n);
    for (std::size_t j = 0; j < n; ++j) centers_[j] = grid.center(j);
    if (mode_ == VelocityQuadrature::Generic) return;
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, CosineDiffKernel>) {
            cos_.resize(n);
            sin_.resize(n);
            for (std::size_t j = 0; j < n; ++j) {
              cos_[j] = std::cos(k.omega * centers_[j]);
              sin_[j] = std::sin(k.omega * centers_[j]);
            }
          } else if constexpr (std::is_same_v<T, CosineYKernel>) {
            cos_.resize(n);
            for (std::size_t j = 0; j < n; ++j) cos_[j] = std::cos(centers_[j]);
          } else if constexpr (TranslationInvariantKernel<T>) {
            // profile(y - x) for offsets (l - j) dx, l - j in [-(n-1), n-1]
            toeplitz_.resize(2 * n - 1);
            for (std::size_t m = 0; m < 2 * n - 1; ++m) {
              const double offset = (static_cast<double>(m) - static_cast<double>(n - 1)) * grid.dx;
              toeplitz_[m] = k.profile(offset);
            }
          }
        },
        kernel_.variant);
  }

  void evaluate(std::span<const double> rho, std::span<double> v) const {
    const std::size_t n = grid_.n_cells;
    const double dx = grid_.dx;
    if (mode_ == VelocityQuadrature::Generic) {
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l < n; ++l) s += kernel_eval(kernel_, centers_[j], centers_[l]) * rho[l];
        v[j] = s * dx;
      }
      return;
    }
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, ZeroKernel>) {
            std::fill(v.begin(), v.end(), 0.0);
          } else if constexpr (std::is_same_v<T, CosineDiffKernel>) {
            double cc = 0.0;
            double ss = 0.0;
            for (std::size_t l = 0; l < n; ++l) {
              cc += cos_[l] * rho[l];
              ss += sin_[l] * rho[l];
            }
            cc *= dx;
            ss *= dx;
            for (std::size_t j = 0; j < n; ++j) v[j] = k.a * (cos_[j] * cc + sin_[j] * ss);
          } else if constexpr (std::is_same_v<T, CosineYKernel>) {
            double cc = 0.0;
            for (std::size_t l = 0; l < n; ++l) cc += cos_[l] * rho[l];
            std::fill(v.begin(), v.end(), k.a * cc * dx);
          } else {
            for (std::size_t j = 0; j < n; ++j) {
              const double* row = toeplitz_.data() + (n - 1 - j);
              double s = 0.0;
              for (std::size_t l = 0; l < n; ++l) s += row[l] * rho[l];
              v[j] = s * dx;
            }
          }
        },
        kernel_.variant);
  }

 private:
  KernelSpec kernel_;
  Grid1D grid_;
  VelocityQuadrature mode_;
  std::vector<double> centers_;
  std::vector<double> cos_;
  std::vector<double> sin_;
  std::vector<double> toeplitz_;
};

struct NfpOptions {
  std::size_t substeps = 0;  // 0 = smallest count satisfying the CFL guard
  VelocityQuadrature quadrature = VelocityQuadrature::Auto;
};

/// Smallest number of substeps per shared time step for which the explicit
/// update keeps every coefficient nonnegative with a 0.4 safety factor.
inline std::size_t cfl_substeps(double dt, double dx, double sigma_sq, double speed) {
  const double rate = sigma_sq / (dx * dx) + 2.0 * speed / dx;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(dt * rate / 0.4 - 1e-12)));
}

/// Cell averages of the initial law; a point mass becomes Gaussian(x0, (3 dx)^2).
inline std::vector<double> initial_cell_averages(const InitialLaw& law, const Grid1D& grid) {
  const double smoothing = 3.0 * grid.dx;
  std::vector<double> rho(grid.n_cells);
  double mass = 0.0;
  for (std::size_t j = 0; j < grid.n_cells; ++j) {
    const double m = law_cdf(law, grid.face(j + 1), smoothing) - law_cdf(law, grid.face(j), smoothing);
    rho[j] = m / grid.dx;
    mass += m;
  }
  if (std::abs(mass - 1.0) > 1e-6) {
    throw ConfigError("initial law loses more than 1e-6 mass outside the PDE grid");
  }
  for (double& r : rho) r /= mass;
  return rho;
}

inline MeanFieldSolution solve_nfp(const Config& cfg, const Grid1D& grid, NfpOptions opts = {}) {
  if (cfg.dim() != 1) throw ConfigError("the mean-field solver is one-dimensional");
  const double sigma = cfg.diffusion.scalar();
  const double sigma_sq = sigma * sigma;
  const double speed = cfg.drift_bound();
  const double dt = cfg.time.dt();
  const double dx = grid.dx;

  std::size_t substeps = opts.substeps;
  if (substeps == 0) {
    substeps = cfl_substeps(dt, dx, sigma_sq, speed);
  } else {
    const double h = dt / static_cast<double>(substeps);
    const bool ok = h <= 0.4 * dx * dx / sigma_sq + 1e-15 &&
                    (speed == 0.0 || h <= 0.4 * dx / speed + 1e-15) &&
                    h * (sigma_sq / (dx * dx) + 2.0 * speed / dx) <= 1.0;
    if (!ok) {
      std::ostringstream os;
      os << "CFL violation: dt/substeps = " << h << " with dx = " << dx << "; use substeps >= "
         << cfl_substeps(dt, dx, sigma_sq, speed) << " or fewer cells / more time steps";
      throw CflError(os.str());
    }
  }
  const double h = dt / static_cast<double>(substeps);
  const double lambda = h / dx;
  const double diff = 0.5 * sigma_sq / dx;

  MeanFieldSolution sol(grid, cfg.time, substeps);
  const std::size_t n = grid.n_cells;
  VelocityEvaluator velocity(cfg.kernel, grid, opts.quadrature);

  std::vector<double> rho = initial_cell_averages(cfg.initial, grid);
  std::vector<double> next(n);
  std::vector<double> v(n);
  std::vector<double> u_face(n + 1, 0.0);  // face j sits between cells j-1 and j
  const bool has_drift = !is_zero_drift(cfg.drift);

  const auto store = [&](std::size_t k) {
    std::copy(rho.begin(), rho.end(), sol.density_slice(k).begin());
    velocity.evaluate(rho, sol.velocity_slice(k));
  };
  store(0);
  double max_mass_error = std::abs(sol.mass(0) - 1.0);

  for (std::size_t k = 0; k < cfg.time.n_steps(); ++k) {
    for (std::size_t s = 0; s < substeps; ++s) {
      const double t = cfg.time.time(k) + static_cast<double>(s) * h;
      velocity.evaluate(rho, v);
      if (has_drift) {
        for (std::size_t j = 0; j < n; ++j) v[j] += drift_eval(cfg.drift, t, grid.center(j));
      }
      for (std::size_t f = 1; f < n; ++f) u_face[f] = 0.5 * (v[f - 1] + v[f]);
      // Nonnegative-coefficient form of the upwind flux difference.
      for (std::size_t j = 0; j < n; ++j) {
        const double ur = u_face[j + 1];  // right face (0 at the wall)
        const double ul = u_face[j];      // left face (0 at the wall)
        const double dr = j + 1 < n ? diff : 0.0;
        const double dl = j > 0 ? diff : 0.0;
        const double ur_pos = std::max(ur, 0.0);
        const double ur_neg = std::min(ur, 0.0);
        const double ul_pos = std::max(ul, 0.0);
        const double ul_neg = std::min(ul, 0.0);
        double value = rho[j] * (1.0 - lambda * (dr + dl + ur_pos - ul_neg));
        if (j + 1 < n) value += rho[j + 1] * lambda * (dr - ur_neg);
        if (j > 0) value += rho[j - 1] * lambda * (dl + ul_pos);
        next[j] = value;
      }
      rho.swap(next);
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!(rho[j] >= 0.0)) throw Error("negative density after step; CFL guard failed");
    }
    store(k + 1);
    max_mass_error = std::max(max_mass_error, std::abs(sol.mass(k + 1) - 1.0));
  }
  sol.set_max_mass_error(max_mass_error);
  if (max_mass_error > 1e-8) throw Error("mass conservation violated beyond 1e-8");
  return sol;
}

struct VelocityRegularity {
  double v_t = 0.0;                // sup over time and orders 0..m
  std::vector<double> per_order;   // sup over time of max |d^q v|
};

/// Finite-difference diagnostic sup_t max_{q<=m} |d^q v_t|_inf.
inline VelocityRegularity velocity_regularity(const MeanFieldSolution& sol, int m) {
  if (m < 0 || m > 4) throw Error("velocity_regularity: order must be in [0, 4]");
  VelocityRegularity out;
  out.per_order.assign(m + 1, 0.0);
  const double dx = sol.grid().dx;
  for (std::size_t k = 0; k < sol.time().n_points(); ++k) {
    const auto v = sol.velocity_slice(k);
    std::vector<double> d(v.begin(), v.end());
    for (int q = 0; q <= m; ++q) {
      for (double x : d) out.per_order[q] = std::max(out.per_order[q], std::abs(x));
      if (q == m || d.size() < 3) break;
      std::vector<double> next(d.size() - 2);
      for (std::size_t j = 1; j + 1 < d.size(); ++j) next[j - 1] = (d[j + 1] - d[j - 1]) / (2.0 * dx);
      d.swap(next);
    }
  }
  for (double x : out.per_order) out.v_t = std::max(out.v_t, x);
  return out;
}

}  // namespace seqmv
