#pragma once

// H^{-beta} quadratic forms through the Bessel kernel G_beta = (1 - Laplace)^{-beta} delta_0:
//   |nu|^2_{H^-beta} = iint G_beta(x - y) nu(dx) nu(dy).
// G_beta is tabulated on a radial grid with value and slope, and evaluated by
// cubic Hermite interpolation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>

#include "seqmv/entropy.hpp"
#include "seqmv/parallel.hpp"
#include "seqmv/pde.hpp"
#include "seqmv/simulate.hpp"

namespace seqmv {

class BesselTable {
 public:
  BesselTable(double beta, int dim, double r_max, std::vector<double> values, std::vector<double> slopes)
      : beta_(beta), dim_(dim), r_max_(r_max), values_(std::move(values)), slopes_(std::move(slopes)) {
    step_ = r_max_ / static_cast<double>(values_.size() - 1);
    inv_step_ = 1.0 / step_;
  }

  double beta() const { return beta_; }
  int dim() const { return dim_; }
  double r_max() const { return r_max_; }
  std::size_t n_points() const { return values_.size(); }
  double step() const { return step_; }
  double at_zero() const { return values_.front(); }
  double node(std::size_t j) const { return values_[j]; }
  std::span<const double> values() const { return values_; }

  /// G_beta(r) for r >= 0; zero beyond r_max (certified tail).
  double operator()(double r) const {
    if (r >= r_max_) return 0.0;
    const double t = r * inv_step_;
    const auto j = static_cast<std::size_t>(t);
    const double s = t - static_cast<double>(j);
    const double s2 = s * s;
    const double om = 1.0 - s;
    const double h00 = (1.0 + 2.0 * s) * om * om;
    const double h10 = s * om * om;
    const double h01 = s2 * (3.0 - 2.0 * s);
    const double h11 = s2 * (s - 1.0);
    return h00 * values_[j] + h01 * values_[j + 1] + step_ * (h10 * slopes_[j] + h11 * slopes_[j + 1]);
  }

  /// dG/dr by differentiating the Hermite interpolant.
  double slope(double r) const {
    if (r >= r_max_) return 0.0;
    const double t = r * inv_step_;
    const auto j = static_cast<std::size_t>(t);
    const double s = t - static_cast<double>(j);
    const double d00 = 6.0 * s * s - 6.0 * s;
    const double d10 = 3.0 * s * s - 4.0 * s + 1.0;
    const double d01 = -d00;
    const double d11 = 3.0 * s * s - 2.0 * s;
    return (d00 * values_[j] + d01 * values_[j + 1]) * inv_step_ + d10 * slopes_[j] + d11 * slopes_[j + 1];
  }

  /// Largest certified quadrature error over the nodes (absolute).
  double quadrature_error = 0.0;
  /// Largest interpolation error observed at sampled interval midpoints.
  double interpolation_error = 0.0;

 private:
  double beta_;
  int dim_;
  double r_max_;
  double step_ = 1.0;
  double inv_step_ = 1.0;
  std::vector<double> values_;
  std::vector<double> slopes_;
};

namespace detail {

struct QuadValue {
  double value = 0.0;
  double error = 0.0;
};

/// (1/pi) int_0^inf (1+xi^2)^-beta cos(xi r) dxi and its r-derivative.
class BesselQuadrature1d {
 public:
  explicit BesselQuadrature1d(double beta) : beta_(beta), cos_(1e-14), sin_(1e-14) {}

  QuadValue value(double r) {
    const auto f = [this](double xi) { return std::pow(1.0 + xi * xi, -beta_) / std::numbers::pi; };
    if (r == 0.0) {
      boost::math::quadrature::exp_sinh<double> es;
      double err = 0.0;
      const double v = es.integrate(f, 1e-15, &err);
      return {v, err * std::abs(v)};
    }
    const auto [v, rel] = cos_.integrate(f, r);
    return {v, rel * std::abs(v)};
  }

  QuadValue slope(double r) {
    if (r == 0.0) return {0.0, 0.0};
    const auto f = [this](double xi) { return -xi * std::pow(1.0 + xi * xi, -beta_) / std::numbers::pi; };
    const auto [v, rel] = sin_.integrate(f, r);
    return {v, rel * std::abs(v)};
  }

 private:
  double beta_;
  boost::math::quadrature::ooura_fourier_cos<double> cos_;
  boost::math::quadrature::ooura_fourier_sin<double> sin_;
};

/// Hankel transform (1/2pi) int_0^inf (1+rho^2)^-beta J0(rho r) rho drho by
/// Gauss-Legendre panels of width min(1, pi/r); the error estimate compares
/// 10- and 20-point rules on every panel.
class BesselQuadrature2d {
 public:
  explicit BesselQuadrature2d(double beta) : beta_(beta) {}

  QuadValue value(double r) const {
    const auto f = [this, r](double rho) {
      return std::pow(1.0 + rho * rho, -beta_) * boost::math::cyl_bessel_j(0, rho * r) * rho;
    };
    return transform(f, r, 2.0 * beta_ - 1.0, 1e-12);
  }

  QuadValue slope(double r) const {
    if (r == 0.0) return {0.0, 0.0};
    const auto f = [this, r](double rho) {
      return -std::pow(1.0 + rho * rho, -beta_) * boost::math::cyl_bessel_j(1, rho * r) * rho * rho;
    };
    return transform(f, r, 2.0 * beta_ - 2.0, 1e-10);
  }

 private:
  template <class F>
  QuadValue transform(const F& f, double r, double decay, double tail) const {
    // integrand <= rho^(-decay) since |J| <= 1
    const double upper = std::max(20.0, std::pow(tail * 2.0 * std::numbers::pi * (decay - 1.0), -1.0 / (decay - 1.0)));
    const double width = r > 0.0 ? std::min(1.0, std::numbers::pi / r) : 1.0;
    double coarse = 0.0;
    double fine = 0.0;
    for (double a = 0.0; a < upper; a += width) {
      const double b = std::min(a + width, upper);
      coarse += boost::math::quadrature::gauss<double, 10>::integrate(f, a, b);
      fine += boost::math::quadrature::gauss<double, 20>::integrate(f, a, b);
    }
    return {fine / (2.0 * std::numbers::pi), std::abs(fine - coarse) / (2.0 * std::numbers::pi)};
  }

  double beta_;
};

}  // namespace detail

/// Tabulates G_beta on [0, r_max] with n_points nodes.
inline BesselTable tabulate_bessel(double beta, int dim, double r_max, std::size_t n_points) {
  if (dim != 1 && dim != 2) throw Error("tabulate_bessel: dimension must be 1 or 2");
  if (!(beta > 0.5 * dim + 2.0)) throw Error("tabulate_bessel: beta must exceed d/2 + 2");
  if (!(r_max >= 20.0)) throw Error("tabulate_bessel: r_max must be >= 20");
  if (n_points < 3) throw Error("tabulate_bessel: need at least 3 nodes");
  const double h = r_max / static_cast<double>(n_points - 1);
  std::vector<double> values(n_points);
  std::vector<double> slopes(n_points);
  double quad_err = 0.0;

  const auto fill = [&](auto& quad) {
    for (std::size_t j = 0; j < n_points; ++j) {
      const double r = static_cast<double>(j) * h;
      const auto v = quad.value(r);
      const auto s = quad.slope(r);
      values[j] = v.value;
      slopes[j] = s.value;
      quad_err = std::max(quad_err, v.error);
    }
    return [&quad](double r) { return quad.value(r).value; };
  };

  BesselTable* table_ptr = nullptr;
  std::vector<double> midpoints_err;
  double interp_err = 0.0;
  if (dim == 1) {
    detail::BesselQuadrature1d quad(beta);
    auto direct = fill(quad);
    BesselTable table(beta, dim, r_max, values, slopes);
    for (std::size_t j = 0; j + 1 < n_points; j += std::max<std::size_t>(1, n_points / 64)) {
      const double r = (static_cast<double>(j) + 0.5) * h;
      interp_err = std::max(interp_err, std::abs(table(r) - direct(r)));
    }
    table.quadrature_error = quad_err;
    table.interpolation_error = interp_err;
    if (quad_err > 1e-8 * table.at_zero()) throw Error("tabulate_bessel: quadrature did not converge");
    return table;
  }
  detail::BesselQuadrature2d quad(beta);
  auto direct = fill(quad);
  BesselTable table(beta, dim, r_max, values, slopes);
  for (std::size_t j = 0; j + 1 < n_points; j += std::max<std::size_t>(1, n_points / 16)) {
    const double r = (static_cast<double>(j) + 0.5) * h;
    interp_err = std::max(interp_err, std::abs(table(r) - direct(r)));
  }
  (void)table_ptr;
  table.quadrature_error = quad_err;
  table.interpolation_error = interp_err;
  if (quad_err > 1e-8 * table.at_zero()) throw Error("tabulate_bessel: quadrature did not converge");
  return table;
}

/// (G * rho)(x) on the PDE cells, its slope, and the self-energy iint G rho rho.
class DensityPotential {
 public:
  DensityPotential(const BesselTable& table, const Grid1D& grid, std::span<const double> rho)
      : table_(&table), grid_(grid), rho_(rho.begin(), rho.end()) {
    if (table.dim() != 1) throw Error("density potentials are one-dimensional");
    const std::size_t n = grid.n_cells;
    std::vector<double> g(n);
    std::vector<double> gp(n);
    for (std::size_t m = 0; m < n; ++m) {
      g[m] = table(static_cast<double>(m) * grid.dx);
      gp[m] = table.slope(static_cast<double>(m) * grid.dx);
    }
    conv_.assign(n, 0.0);
    conv_slope_.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      double sp = 0.0;
      for (std::size_t l = 0; l < n; ++l) {
        const std::size_t m = j > l ? j - l : l - j;
        s += g[m] * rho_[l];
        // d/dx G(|x - y|) = G'(|x - y|) sign(x - y)
        sp += (j > l ? gp[m] : (j < l ? -gp[m] : 0.0)) * rho_[l];
      }
      conv_[j] = s * grid.dx;
      conv_slope_[j] = sp * grid.dx;
    }
    for (std::size_t j = 0; j < n; ++j) {
      self_ += rho_[j] * conv_[j];
      mass_ += rho_[j];
    }
    self_ *= grid.dx;
    mass_ *= grid.dx;
  }

  double self_energy() const { return self_; }
  double mass() const { return mass_; }

  /// (G * rho)(x); Hermite interpolation between cell centers, direct sum elsewhere.
  double operator()(double x) const {
    const double s = (x - grid_.x_min) / grid_.dx - 0.5;
    const double last = static_cast<double>(grid_.n_cells - 1);
    if (s < 0.0 || s >= last) return direct(x);
    const auto j = static_cast<std::size_t>(s);
    const double t = s - static_cast<double>(j);
    const double om = 1.0 - t;
    const double h00 = (1.0 + 2.0 * t) * om * om;
    const double h10 = t * om * om;
    const double h01 = t * t * (3.0 - 2.0 * t);
    const double h11 = t * t * (t - 1.0);
    return h00 * conv_[j] + h01 * conv_[j + 1] + grid_.dx * (h10 * conv_slope_[j] + h11 * conv_slope_[j + 1]);
  }

  double direct(double x) const {
    double s = 0.0;
    for (std::size_t l = 0; l < grid_.n_cells; ++l) s += (*table_)(std::abs(x - grid_.center(l))) * rho_[l];
    return s * grid_.dx;
  }

  const Grid1D& grid() const { return grid_; }

 private:
  const BesselTable* table_;
  Grid1D grid_;
  std::vector<double> rho_;
  std::vector<double> conv_;
  std::vector<double> conv_slope_;
  double self_ = 0.0;
  double mass_ = 0.0;
};

/// Atoms (weights w_i) plus an optional density part with weight `density_weight`.
struct SignedMeasureRep {
  int dim = 1;
  std::vector<double> points;  // n_atoms * dim
  std::vector<double> weights;
  const DensityPotential* density = nullptr;
  double density_weight = 0.0;
  double time = 0.0;

  std::size_t n_atoms() const { return weights.size(); }
  double total_mass() const {
    double m = 0.0;
    for (double w : weights) m += w;
    if (density) m += density_weight * density->mass();
    return m;
  }
};

/// mu^N - rho_bar: weights 1/N on the atoms and -1 on the density.
inline SignedMeasureRep empirical_minus_density(std::span<const double> points, const DensityPotential& density,
                                                double time = 0.0) {
  SignedMeasureRep rep;
  rep.points.assign(points.begin(), points.end());
  rep.weights.assign(points.size(), 1.0 / static_cast<double>(points.size()));
  rep.density = &density;
  rep.density_weight = -1.0;
  rep.time = time;
  if (std::abs(rep.total_mass()) > 1e-10) throw Error("signed measure does not have zero total mass");
  return rep;
}

struct NormResult {
  double value = 0.0;
  bool clamped = false;  // tiny negative rounding set to 0
};

inline double pair_distance(const double* a, const double* b, int dim) {
  if (dim == 1) return std::abs(a[0] - b[0]);
  double s = 0.0;
  for (int c = 0; c < dim; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
  return std::sqrt(s);
}

inline NormResult finish_norm(double total) {
  if (total >= 0.0) return {total, false};
  if (total >= -1e-10) return {0.0, true};
  throw Error("negative H^-beta norm beyond tolerance; quadrature inconsistency");
}

inline NormResult hminus_norm_sq(const SignedMeasureRep& rep, const BesselTable& table) {
  if (rep.dim != table.dim()) throw Error("hminus_norm_sq: dimension mismatch");
  if (rep.density && rep.dim != 1) throw Error("hminus_norm_sq: density parts are one-dimensional");
  const std::size_t n = rep.n_atoms();
  const int d = rep.dim;
  double diag = 0.0;
  double off = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    diag += rep.weights[i] * rep.weights[i];
    const double* xi = rep.points.data() + i * d;
    double row = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) row += rep.weights[j] * table(pair_distance(xi, rep.points.data() + j * d, d));
    off += rep.weights[i] * row;
  }
  double total = diag * table.at_zero() + 2.0 * off;
  if (rep.density) {
    double cross = 0.0;
    for (std::size_t i = 0; i < n; ++i) cross += rep.weights[i] * (*rep.density)(rep.points[i]);
    total += 2.0 * rep.density_weight * cross + rep.density_weight * rep.density_weight * rep.density->self_energy();
  }
  return finish_norm(total);
}

struct InitialFormulaCheck {
  double mc_estimate = 0.0;
  double mc_std_err = 0.0;
  double exact_value = 0.0;  // (G(0) - A) / N
  double a_value = 0.0;      // iint G rho0 rho0
  std::size_t n = 0;
  std::size_t n_replicas = 0;
};

/// E|mu^N_0 - rho_0|^2 by Monte Carlo against (1/N)(G(0) - A).
inline InitialFormulaCheck initial_formula_check(const Config& cfg, const BesselTable& table, const Grid1D& grid,
                                                 std::size_t n, std::size_t n_replicas, unsigned threads = 1) {
  if (cfg.dim() != 1) throw Error("initial_formula_check: one-dimensional only");
  const std::vector<double> rho0 = initial_cell_averages(cfg.initial, grid);
  const DensityPotential pot(table, grid, rho0);
  std::vector<double> samples(n_replicas);
  parallel_for(n_replicas, threads, [&](std::size_t r) {
    std::vector<double> pts(n);
    for (std::size_t i = 0; i < n; ++i) {
      RandomStream init = cfg.rng.stream(r, i + 1, StreamTag::Init);
      pts[i] = law_sample(cfg.initial, init);
    }
    samples[r] = hminus_norm_sq(empirical_minus_density(pts, pot), table).value;
  });
  const MeanSe m = mean_and_se(samples);
  InitialFormulaCheck out;
  out.mc_estimate = m.mean;
  out.mc_std_err = m.std_err;
  out.a_value = pot.self_energy();
  out.exact_value = (table.at_zero() - out.a_value) / static_cast<double>(n);
  out.n = n;
  out.n_replicas = n_replicas;
  return out;
}

struct EmpiricalRate {
  std::vector<std::size_t> n_values;
  std::vector<double> mean_sup;
  std::vector<double> std_err;
  RateFit fit;
  double clamp_fraction = 0.0;
};

/// E[ sup_k |mu^N_{t_k} - rho_bar_{t_k}|^2_{H^-beta} ] for every N in the
/// ladder, with mu^N the uniform empirical measure of the first N particles of
/// one sequential run per replica.
inline EmpiricalRate empirical_rate_experiment(const Config& cfg, const WeightScheme& scheme,
                                               const MeanFieldSolution& mf, const BesselTable& table,
                                               std::span<const std::size_t> n_list, std::size_t n_replicas,
                                               unsigned threads = 1) {
  check_meanfield(cfg, mf);
  if (!is_zero_drift(cfg.drift)) throw Error("empirical_rate_experiment: requires b = 0");
  std::vector<std::size_t> ladder(n_list.begin(), n_list.end());
  std::sort(ladder.begin(), ladder.end());
  if (ladder.empty() || ladder.front() < 1) throw Error("empirical_rate_experiment: bad N ladder");
  const std::size_t n_max = ladder.back();
  const std::size_t K = cfg.time.n_points();

  std::vector<DensityPotential> potentials;
  potentials.reserve(K);
  for (std::size_t k = 0; k < K; ++k) potentials.emplace_back(table, mf.grid(), mf.density_slice(k));

  std::vector<std::vector<double>> sup(n_replicas, std::vector<double>(ladder.size(), 0.0));
  std::vector<std::size_t> outside(n_replicas, 0);
  const double g0 = table.at_zero();
  parallel_for(n_replicas, threads, [&](std::size_t r) {
    const TrajectoryStore store = simulate_sequential(cfg, scheme, n_max, r);
    std::vector<double> x(n_max);
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t s = 0; s < n_max; ++s) {
        x[s] = store.at(s, k);
        if (!mf.grid().contains(x[s])) ++outside[r];
      }
      const DensityPotential& pot = potentials[k];
      double pairs = 0.0;  // sum_{i<j<=n} G(x_i - x_j)
      double cross = 0.0;  // sum_{i<=n} (G*rho)(x_i)
      std::size_t q = 0;
      for (std::size_t n = 1; n <= n_max; ++n) {
        const double xn = x[n - 1];
        double row = 0.0;
        for (std::size_t j = 0; j + 1 < n; ++j) row += table(std::abs(xn - x[j]));
        pairs += row;
        cross += pot(xn);
        if (n == ladder[q]) {
          const double nn = static_cast<double>(n);
          const double value =
              finish_norm((nn * g0 + 2.0 * pairs) / (nn * nn) - 2.0 * cross / nn + pot.self_energy()).value;
          sup[r][q] = std::max(sup[r][q], value);
          ++q;
        }
      }
    }
  });

  EmpiricalRate out;
  std::size_t total_outside = 0;
  for (std::size_t r = 0; r < n_replicas; ++r) total_outside += outside[r];
  out.clamp_fraction = static_cast<double>(total_outside) / static_cast<double>(n_replicas * K * n_max);
  if (out.clamp_fraction > 1e-3) throw Error("empirical_rate_experiment: particles left the PDE grid too often");
  std::vector<double> xs;
  for (std::size_t q = 0; q < ladder.size(); ++q) {
    std::vector<double> col(n_replicas);
    for (std::size_t r = 0; r < n_replicas; ++r) col[r] = sup[r][q];
    const MeanSe m = mean_and_se(col);
    out.n_values.push_back(ladder[q]);
    out.mean_sup.push_back(m.mean);
    out.std_err.push_back(m.std_err);
    xs.push_back(static_cast<double>(ladder[q]));
  }
  if (ladder.size() >= 3) out.fit = fit_rate(xs, out.mean_sup);
  return out;
}

}  // namespace seqmv
