#pragma once

// Monte Carlo estimates of the incremental relative entropies
//   R_i(T) = 1/2 E sum_k |sigma^-1 Delta^i_k|^2 dt     (i.i.d. initial data, R_i(0) = 0)
// where Delta^i_k is the drift mismatch of particle i at the left endpoint t_k.
// The left-endpoint sum is the exact relative entropy of the Euler chain.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "seqmv/parallel.hpp"
#include "seqmv/pde.hpp"
#include "seqmv/simulate.hpp"

namespace seqmv {

struct EnergyEstimate {
  std::size_t i = 0;
  double estimate = 0.0;  // nats
  double std_err = 0.0;
  std::size_t n_replicas = 0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<double> x;
  std::vector<double> y;
};

/// Ordinary least squares y = intercept + slope * x.
inline RateFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("fit_line: need matching series of length >= 2");
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t q = 0; q < x.size(); ++q) {
    mx += x[q];
    my += y[q];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t q = 0; q < x.size(); ++q) {
    sxx += (x[q] - mx) * (x[q] - mx);
    sxy += (x[q] - mx) * (y[q] - my);
    syy += (y[q] - my) * (y[q] - my);
  }
  if (sxx == 0.0) throw Error("fit_line: abscissae are all equal");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
  fit.x.assign(x.begin(), x.end());
  fit.y.assign(y.begin(), y.end());
  return fit;
}

/// Least squares on (log x, log y); x and y keep their original scale.
inline RateFit fit_rate(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3) throw Error("fit_rate: need at least 3 pairs");
  std::vector<double> lx(x.size());
  std::vector<double> ly(y.size());
  for (std::size_t q = 0; q < x.size(); ++q) {
    if (!(x[q] > 0.0) || !(y[q] > 0.0)) throw Error("fit_rate: values must be positive");
    lx[q] = std::log(x[q]);
    ly[q] = std::log(y[q]);
  }
  RateFit fit = fit_line(lx, ly);
  fit.x.assign(x.begin(), x.end());
  fit.y.assign(y.begin(), y.end());
  return fit;
}

/// Per-replica energies 1/2 sum_k |sigma^-1 Delta^i_k|^2 dt for i = 1..n.
struct IncrementSamples {
  std::size_t n_particles = 0;
  std::vector<std::vector<double>> energy;  // [replica][i - 1]
  std::size_t lookups = 0;
  std::size_t clamped = 0;

  std::size_t n_replicas() const { return energy.size(); }

  EnergyEstimate estimate(std::size_t i) const {
    std::vector<double> col(energy.size());
    for (std::size_t r = 0; r < energy.size(); ++r) col[r] = energy[r][i - 1];
    const MeanSe m = mean_and_se(col);
    return {i, m.mean, m.std_err, energy.size()};
  }

  double clamp_fraction() const {
    return lookups == 0 ? 0.0 : static_cast<double>(clamped) / static_cast<double>(lookups);
  }
};

inline void check_meanfield(const Config& cfg, const MeanFieldSolution& mf) {
  if (!(mf.time() == cfg.time)) throw Error("meanfield time grid does not match the configuration");
  if (cfg.dim() != 1) throw Error("entropy estimators are one-dimensional");
}

/// One sequential system per replica serves every i (common random numbers).
inline IncrementSamples simulate_increments(const Config& cfg, const WeightScheme& scheme,
                                            const MeanFieldSolution& mf, std::size_t n_particles,
                                            std::size_t n_replicas, unsigned threads = 1,
                                            SimOptions opts = {}) {
  check_meanfield(cfg, mf);
  IncrementSamples out;
  out.n_particles = n_particles;
  out.energy.assign(n_replicas, std::vector<double>(n_particles, 0.0));
  std::vector<std::size_t> lookups(n_replicas, 0);
  std::vector<std::size_t> clamped(n_replicas, 0);
  const double half_dt = 0.5 * cfg.time.dt();
  parallel_for(n_replicas, threads, [&](std::size_t r) {
    auto& e = out.energy[r];
    auto observer = [&](std::size_t i, std::size_t k, const double* x, const double* inter) {
      bool c = false;
      const double delta = inter[0] - mf.velocity_at_slice(k, x[0], c);
      ++lookups[r];
      if (c) ++clamped[r];
      e[i - 1] += half_dt * cfg.diffusion.whitened_norm_sq(&delta);
    };
    simulate_sequential(cfg, scheme, n_particles, r, opts, observer);
  });
  for (std::size_t r = 0; r < n_replicas; ++r) {
    out.lookups += lookups[r];
    out.clamped += clamped[r];
  }
  return out;
}

inline std::vector<EnergyEstimate> estimate_Ri(const Config& cfg, const WeightScheme& scheme,
                                               const MeanFieldSolution& mf, std::span<const std::size_t> i_list,
                                               std::size_t n_replicas, unsigned threads = 1) {
  if (i_list.empty()) return {};
  for (std::size_t i : i_list) {
    if (i < 2) throw Error("estimate_Ri: indices must be >= 2");
  }
  const std::size_t n = *std::max_element(i_list.begin(), i_list.end());
  const IncrementSamples samples = simulate_increments(cfg, scheme, mf, n, n_replicas, threads);
  std::vector<EnergyEstimate> out;
  for (std::size_t i : i_list) out.push_back(samples.estimate(i));
  return out;
}

/// R_1 = 1/2 E sum_k |sigma^-1 v_k(X^1_k)|^2 dt  (bounded by kappa T / 2).
inline EnergyEstimate estimate_R1(const Config& cfg, const MeanFieldSolution& mf, std::size_t n_replicas,
                                  unsigned threads = 1) {
  const IncrementSamples samples =
      simulate_increments(cfg, WeightScheme::uniform(), mf, 1, n_replicas, threads);
  return samples.estimate(1);
}

struct GlobalEntropy {
  std::vector<std::size_t> n_values;
  std::vector<double> s_n;
  std::vector<double> std_err;
  std::vector<EnergyEstimate> increments;  // i = 1..max N
};

/// S_N = R_1 + sum_{i=2}^N R_i on shared replicas, for each N in the ladder.
inline GlobalEntropy global_entropy_from(const IncrementSamples& samples, std::span<const std::size_t> ladder) {
  GlobalEntropy out;
  for (std::size_t i = 1; i <= samples.n_particles; ++i) out.increments.push_back(samples.estimate(i));
  for (std::size_t n : ladder) {
    if (n < 1 || n > samples.n_particles) throw Error("global entropy: ladder exceeds simulated N");
    std::vector<double> per_replica(samples.n_replicas());
    for (std::size_t r = 0; r < samples.n_replicas(); ++r) {
      per_replica[r] = pairwise_sum(std::span<const double>(samples.energy[r].data(), n));
    }
    const MeanSe m = mean_and_se(per_replica);
    out.n_values.push_back(n);
    out.s_n.push_back(m.mean);
    out.std_err.push_back(m.std_err);
  }
  return out;
}

inline GlobalEntropy estimate_global_entropy(const Config& cfg, const WeightScheme& scheme,
                                             const MeanFieldSolution& mf, std::span<const std::size_t> ladder,
                                             std::size_t n_replicas, unsigned threads = 1) {
  if (ladder.empty()) return {};
  const std::size_t n = *std::max_element(ladder.begin(), ladder.end());
  return global_entropy_from(simulate_increments(cfg, scheme, mf, n, n_replicas, threads), ladder);
}

/// sum_{j=0}^{m-1} R_{N-j}; increments[i - 1] holds R_i.
inline double estimate_tail_entropy(std::span<const double> increments, std::size_t n, std::size_t m) {
  if (m > n) throw Error("estimate_tail_entropy: m must not exceed N");
  if (n > increments.size()) throw Error("estimate_tail_entropy: N exceeds the increment list");
  double s = 0.0;
  for (std::size_t j = 0; j < m; ++j) s += increments[n - j - 1];
  return s;
}

struct IidBenchmark {
  std::vector<EnergyEstimate> rhat;  // benchmark increments per i
  double variance_integral = 0.0;    // V
  double variance_std_err = 0.0;
  std::size_t clamped = 0;
  std::size_t lookups = 0;

  /// (i - 1) R_iid(i) and its standard error.
  std::pair<double, double> scaled(std::size_t q) const {
    const double f = static_cast<double>(rhat[q].i - 1);
    return {f * rhat[q].estimate, f * rhat[q].std_err};
  }
};

/// Sampling-barrier benchmark: Delta-hat built from i-1 independent limit
/// copies evaluated at one more independent copy, plus the two-sample estimate
/// of V = 1/2 sum_k E|sigma^-1 (K(X, X') - v_k(X))|^2 dt on separate streams.
inline IidBenchmark iid_benchmark(const Config& cfg, const MeanFieldSolution& mf, std::span<const std::size_t> i_list,
                                  std::size_t n_replicas, unsigned threads = 1, std::size_t pairs_per_replica = 16) {
  check_meanfield(cfg, mf);
  if (i_list.empty()) return {};
  std::vector<std::size_t> sorted(i_list.begin(), i_list.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() < 2) throw Error("iid_benchmark: indices must be >= 2");
  const std::size_t n_pred = sorted.back() - 1;
  const std::size_t M = cfg.time.n_steps();
  const double half_dt = 0.5 * cfg.time.dt();

  std::vector<std::vector<double>> energy(n_replicas, std::vector<double>(sorted.size(), 0.0));
  std::vector<double> v_samples(n_replicas, 0.0);
  std::vector<std::size_t> clamped(n_replicas, 0);
  std::vector<std::size_t> lookups(n_replicas, 0);

  parallel_for(n_replicas, threads, [&](std::size_t r) {
    const IidResult pred = simulate_iid_limit(cfg, mf, n_pred, r, kPrimaryFamily);
    const IidResult eval = simulate_iid_limit(cfg, mf, 1, r, kEvaluationFamily);
    const IidResult left = simulate_iid_limit(cfg, mf, pairs_per_replica, r, kVarLeftFamily);
    const IidResult right = simulate_iid_limit(cfg, mf, pairs_per_replica, r, kVarRightFamily);
    clamped[r] = pred.clamped + eval.clamped + left.clamped + right.clamped;
    lookups[r] = pred.lookups + eval.lookups + left.lookups + right.lookups;
    auto& e = energy[r];
    for (std::size_t k = 0; k < M; ++k) {
      const double x = eval.store.at(0, k);
      bool c = false;
      const double v = mf.velocity_at_slice(k, x, c);
      double sum = 0.0;
      std::size_t q = 0;
      for (std::size_t j = 1; j <= n_pred && q < sorted.size(); ++j) {
        sum += kernel_eval(cfg.kernel, x, pred.store.at(j - 1, k));
        while (q < sorted.size() && sorted[q] - 1 == j) {
          const double delta = sum / static_cast<double>(j) - v;
          e[q] += half_dt * cfg.diffusion.whitened_norm_sq(&delta);
          ++q;
        }
      }
    }
    double vs = 0.0;
    for (std::size_t p = 0; p < pairs_per_replica; ++p) {
      for (std::size_t k = 0; k < M; ++k) {
        const double x = left.store.at(p, k);
        bool c = false;
        const double delta = kernel_eval(cfg.kernel, x, right.store.at(p, k)) - mf.velocity_at_slice(k, x, c);
        vs += half_dt * cfg.diffusion.whitened_norm_sq(&delta);
      }
    }
    v_samples[r] = vs / static_cast<double>(pairs_per_replica);
  });

  IidBenchmark out;
  for (std::size_t q = 0; q < sorted.size(); ++q) {
    std::vector<double> col(n_replicas);
    for (std::size_t r = 0; r < n_replicas; ++r) col[r] = energy[r][q];
    const MeanSe m = mean_and_se(col);
    out.rhat.push_back({sorted[q], m.mean, m.std_err, n_replicas});
  }
  const MeanSe v = mean_and_se(v_samples);
  out.variance_integral = v.mean;
  out.variance_std_err = v.std_err;
  for (std::size_t r = 0; r < n_replicas; ++r) {
    out.clamped += clamped[r];
    out.lookups += lookups[r];
  }
  return out;
}

}  // namespace seqmv
