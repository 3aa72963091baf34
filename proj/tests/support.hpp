#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "seqmv/model.hpp"

namespace seqmv::testing {

inline Config make_config(KernelVariant kernel, double t_end = 1.0, std::size_t n_steps = 50,
                          InitialLaw initial = GaussianLaw{}, std::uint64_t seed = 1, int dim = 1) {
  RawConfig raw;
  raw.t_end = t_end;
  raw.n_steps = n_steps;
  raw.dim = dim;
  raw.sigma = dim == 1 ? std::vector<double>{1.0} : std::vector<double>{1.0, 0.0, 0.0, 1.0};
  raw.kernel = kernel;
  raw.initial = initial;
  raw.seed = seed;
  return validate_config(raw);
}

inline double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double se_of(const std::vector<double>& x) {
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Sup distance between the empirical cdf of `samples` and `cdf`.
template <class Cdf>
double ks_distance(std::vector<double> samples, Cdf&& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
  }
  return d;
}

}  // namespace seqmv::testing
