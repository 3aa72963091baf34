#pragma once

// Step-size schemes for the recursively weighted predecessor measure
//   mu^i = (1 - alpha_i) mu^{i-1} + alpha_i delta_{X^i},   alpha_1 = 1,
// the expanded weights w_{i,k}, and the effective sample size 1/sum_k w_{i,k}^2.
//
// Index convention: a WeightTable stores quantities at its own index i. The
// predecessor measure seen by particle i is table(i - 1).

#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "seqmv/model.hpp"

namespace seqmv {

enum class SchemeKind { Uniform, PowerLaw, Custom };

class WeightScheme {
 public:
  static WeightScheme uniform(std::size_t max_index = kUnbounded) {
    WeightScheme s;
    s.kind_ = SchemeKind::Uniform;
    s.max_index_ = max_index;
    return s;
  }

  /// alpha_1 = 1 and alpha_i = min(1, c i^-r) for i >= 2.
  static WeightScheme power_law(double r, double c, std::size_t max_index = kUnbounded) {
    if (!(r > 0.0) || !(c > 0.0) || !std::isfinite(r) || !std::isfinite(c)) {
      throw ConfigError("power-law scheme needs r > 0 and c > 0");
    }
    WeightScheme s;
    s.kind_ = SchemeKind::PowerLaw;
    s.r_ = r;
    s.c_ = c;
    s.max_index_ = max_index;
    // c i^-r > 1 for i < c^(1/r); those steps are clamped to 1.
    s.clamped_ = c > std::pow(2.0, r);
    return s;
  }

  static WeightScheme custom(std::vector<double> alphas) {
    if (alphas.empty() || alphas.front() != 1.0) throw ConfigError("custom scheme requires alpha_1 = 1");
    for (double a : alphas) {
      if (!(a > 0.0 && a <= 1.0)) throw ConfigError("custom scheme step sizes must lie in (0, 1]");
    }
    WeightScheme s;
    s.kind_ = SchemeKind::Custom;
    s.max_index_ = alphas.size();
    s.alphas_ = std::move(alphas);
    return s;
  }

  SchemeKind kind() const { return kind_; }
  double r() const { return r_; }
  double c() const { return c_; }
  std::size_t max_index() const { return max_index_; }
  /// True when some PowerLaw steps were clamped to 1.
  bool clamped() const { return clamped_; }

  double alpha(std::size_t i) const {
    if (i < 1 || i > max_index_) throw Error("step size index out of range");
    switch (kind_) {
      case SchemeKind::Uniform:
        return 1.0 / static_cast<double>(i);
      case SchemeKind::PowerLaw:
        return i == 1 ? 1.0 : std::min(1.0, c_ * std::pow(static_cast<double>(i), -r_));
      case SchemeKind::Custom:
        return alphas_[i - 1];
    }
    return 1.0;
  }

  /// Stable identifier recorded in trajectory stores.
  std::string id() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind_) {
      case SchemeKind::Uniform:
        os << "uniform";
        break;
      case SchemeKind::PowerLaw:
        os << "power(r=" << r_ << ",c=" << c_ << ")";
        break;
      case SchemeKind::Custom: {
        os << "custom[";
        for (std::size_t i = 0; i < alphas_.size(); ++i) os << (i ? "," : "") << alphas_[i];
        os << "]";
        break;
      }
    }
    return os.str();
  }

  static constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

 private:
  SchemeKind kind_ = SchemeKind::Uniform;
  double r_ = 1.0;
  double c_ = 1.0;
  std::size_t max_index_ = kUnbounded;
  bool clamped_ = false;
  std::vector<double> alphas_;
};

struct WeightTable {
  std::size_t index = 0;
  std::vector<double> weights;  // w_{i,1..i}
  double theta = 1.0;           // sum of squared weights
  double n_eff = 1.0;           // 1 / theta
  double first_weight = 1.0;    // w_{i,1}
};

/// Expanded weights of mu^i via the backward recurrence
/// w_{i,k} = alpha_k * prod_{j=k+1}^{i} (1 - alpha_j).
inline WeightTable weights_for(const WeightScheme& scheme, std::size_t i) {
  if (i < 1) throw Error("weights_for: index must be >= 1");
  if (i > scheme.max_index()) throw Error("weights_for: index exceeds scheme.max_index");
  WeightTable t;
  t.index = i;
  t.weights.assign(i, 0.0);
  if (scheme.kind() == SchemeKind::Uniform) {
    const double w = 1.0 / static_cast<double>(i);
    std::fill(t.weights.begin(), t.weights.end(), w);
    t.theta = w;
    t.n_eff = static_cast<double>(i);
    t.first_weight = w;
    return t;
  }
  double survival = 1.0;
  for (std::size_t k = i; k >= 1; --k) {
    t.weights[k - 1] = scheme.alpha(k) * survival;
    survival *= 1.0 - scheme.alpha(k);
  }
  double theta = 0.0;
  for (double w : t.weights) theta += w * w;
  t.theta = theta;
  t.n_eff = 1.0 / theta;
  t.first_weight = t.weights.front();
  return t;
}

struct ThetaNeff {
  double theta = 1.0;
  double n_eff = 1.0;
};

inline ThetaNeff theta_and_neff(const WeightScheme& scheme, std::size_t i) {
  const WeightTable t = weights_for(scheme, i);
  return {t.theta, t.n_eff};
}

struct ThresholdPoint {
  std::size_t i = 0;
  double first_weight = 1.0;
  double theta = 1.0;
  double n_eff = 1.0;
};

/// Series i = 1..i_max using the O(1) updates
///   w_{i,1} = (1 - alpha_i) w_{i-1,1},   theta_i = (1 - alpha_i)^2 theta_{i-1} + alpha_i^2.
inline std::vector<ThresholdPoint> threshold_diagnostics(const WeightScheme& scheme, std::size_t i_max) {
  if (i_max < 2) throw Error("threshold_diagnostics: i_max must be >= 2");
  std::vector<ThresholdPoint> out;
  out.reserve(i_max);
  double first = 1.0;
  double theta = 1.0;
  out.push_back({1, first, theta, 1.0});
  for (std::size_t i = 2; i <= i_max; ++i) {
    const double a = scheme.alpha(i);
    first *= 1.0 - a;
    theta = (1.0 - a) * (1.0 - a) * theta + a * a;
    if (scheme.kind() == SchemeKind::Uniform) {
      first = 1.0 / static_cast<double>(i);
      theta = first;
    }
    out.push_back({i, first, theta, 1.0 / theta});
  }
  return out;
}

/// Bracket for c* = prod_{j>=2} (1 - alpha_j) of a power-law scheme with r > 1:
/// the direct product to `terms`, and a lower bound obtained from
/// sum_{j>J} alpha_j <= c J^(1-r) / (r-1) and -log(1-a) <= a / (1-a).
struct FirstWeightLimit {
  double partial_product = 1.0;
  double lower_bound = 0.0;
  std::size_t terms = 0;
};

inline FirstWeightLimit first_weight_limit(const WeightScheme& scheme, std::size_t terms) {
  if (scheme.kind() != SchemeKind::PowerLaw || !(scheme.r() > 1.0)) {
    throw Error("first_weight_limit: requires a power-law scheme with r > 1");
  }
  FirstWeightLimit out;
  out.terms = terms;
  double prod = 1.0;
  for (std::size_t j = 2; j <= terms; ++j) prod *= 1.0 - scheme.alpha(j);
  out.partial_product = prod;
  const double tail_alpha = scheme.c() * std::pow(static_cast<double>(terms), 1.0 - scheme.r()) / (scheme.r() - 1.0);
  const double next = scheme.alpha(terms + 1);
  out.lower_bound = prod * std::exp(-tail_alpha / (1.0 - next));
  return out;
}

}  // namespace seqmv
