#pragma once

// Euler-Maruyama simulators for three particle systems sharing one limit:
//   sequential  dX^i = [b + K*mu^{i-1}(X^i)] dt + sigma dB^i   (mu^{i-1} from predecessors)
//   classical   dX^i = [b + K*mu^N(X^i)] dt + sigma dB^i       (all particles, self included)
//   i.i.d.      dX^i = [b + v_t(X^i)] dt + sigma dB^i          (frozen field v = K*rho_bar)
//
// Particle i (1-based) draws its initial point from stream (replica, i, Init)
// and its increments from (replica, i, Brownian).

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <type_traits>
#include <vector>

#include "seqmv/model.hpp"
#include "seqmv/pde.hpp"
#include "seqmv/trajectory.hpp"
#include "seqmv/weights.hpp"

namespace seqmv {

class SimulationError : public Error {
 public:
  using Error::Error;
};

struct SimOptions {
  /// Use the O(N) weighted loop even where a trigonometric fast path exists.
  bool force_generic = false;
  /// Incremented once per kernel evaluation (or running-sum update on the fast path).
  std::uint64_t* kernel_evals = nullptr;
};

namespace detail {

inline void euler_step(const Config& cfg, double t, const double* x, const double* interaction,
                       RandomStream& bm, double sqrt_dt, double* out) {
  const int d = cfg.dim();
  const double dt = cfg.time.dt();
  std::array<double, kMaxDim> z{};
  std::array<double, kMaxDim> noise{};
  if (cfg.brownian_substeps == 1) {
    for (int c = 0; c < d; ++c) z[c] = bm.normal();
  } else {
    for (std::size_t l = 0; l < cfg.brownian_substeps; ++l)
      for (int c = 0; c < d; ++c) z[c] += bm.normal();
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.brownian_substeps));
    for (int c = 0; c < d; ++c) z[c] *= scale;
  }
  cfg.diffusion.apply_sigma(z.data(), noise.data());
  const double b = d == 1 ? drift_eval(cfg.drift, t, x[0]) : 0.0;
  for (int c = 0; c < d; ++c) {
    out[c] = x[c] + (b + interaction[c]) * dt + sqrt_dt * noise[c];
    if (!std::isfinite(out[c])) {
      std::ostringstream os;
      os << "non-finite position at t = " << t;
      throw SimulationError(os.str());
    }
  }
}

enum class FastPath { None, Zero, CosineDiff, CosineY };

inline FastPath fast_path_for(const KernelSpec& k, bool force_generic) {
  if (std::holds_alternative<ZeroKernel>(k.variant)) return FastPath::Zero;
  if (force_generic) return FastPath::None;
  if (std::holds_alternative<CosineDiffKernel>(k.variant)) return FastPath::CosineDiff;
  if (std::holds_alternative<CosineYKernel>(k.variant)) return FastPath::CosineY;
  return FastPath::None;
}

inline void count(const SimOptions& o, std::uint64_t n) {
  if (o.kernel_evals) *o.kernel_evals += n;
}

}  // namespace detail

/// Observer hook receiving (particle i, step k, X^i_k, interaction drift
/// K*mu^{i-1}(X^i_k)) for every left endpoint k = 0..M-1.
struct NoObserver {
  void operator()(std::size_t, std::size_t, const double*, const double*) const {}
};

/// Builds the sequential system one particle at a time. For the trigonometric
/// kernels it carries running sums of (cos, sin)(omega X^j_k) through the
/// recursion mu^i = (1 - alpha_i) mu^{i-1} + alpha_i delta_{X^i}.
class SequentialEngine {
 public:
  SequentialEngine(const Config& cfg, const WeightScheme& scheme, std::uint64_t replica,
                   SimOptions opts = {})
      : cfg_(cfg),
        scheme_(scheme),
        replica_(replica),
        opts_(opts),
        path_(detail::fast_path_for(cfg.kernel, opts.force_generic)) {
    const std::size_t cells = cfg.time.n_points() * static_cast<std::size_t>(cfg.dim());
    if (path_ == detail::FastPath::CosineDiff || path_ == detail::FastPath::CosineY) {
      cos_sum_.assign(cells, 0.0);
    }
    if (path_ == detail::FastPath::CosineDiff) sin_sum_.assign(cells, 0.0);
    cos_buf_.resize(cells);
    sin_buf_.resize(cells);
  }

  TrajectoryStore empty_store() const {
    return TrajectoryStore(cfg_.time, cfg_.dim(), scheme_.id(), cfg_.rng.master_seed, replica_);
  }

  /// Replays the running-sum recursion over particles already in `store`.
  void rebuild(const TrajectoryStore& store) {
    levels_ = 0;
    for (std::size_t s = 0; s < store.n_particles(); ++s) {
      if (path_ == detail::FastPath::CosineDiff || path_ == detail::FastPath::CosineY) {
        fill_trig(store.path(s));
        absorb(s + 1);
        detail::count(opts_, cfg_.time.n_points());
      }
      levels_ = s + 1;
    }
  }

  /// Simulates particle store.n_particles() + 1 and appends it.
  template <class Observer = NoObserver>
  void advance(TrajectoryStore& store, Observer&& observer = {}) {
    const std::size_t i = store.n_particles() + 1;
    if (levels_ != i - 1) throw Error("sequential engine out of sync with the store");
    const int d = cfg_.dim();
    const std::size_t M = cfg_.time.n_steps();
    const double sqrt_dt = std::sqrt(cfg_.time.dt());
    RandomStream init = cfg_.rng.stream(replica_, i, StreamTag::Init);
    RandomStream bm = cfg_.rng.stream(replica_, i, StreamTag::Brownian);

    std::vector<double> weights;
    if (path_ == detail::FastPath::None && i >= 2) weights = weights_for(scheme_, i - 1).weights;
    if (i > scheme_.max_index()) throw Error("particle index exceeds scheme.max_index");

    const std::span<double> out = store.append_particle();
    for (int c = 0; c < d; ++c) out[c] = law_sample(cfg_.initial, init);

    std::array<double, kMaxDim> inter{};
    std::array<double, kMaxDim> term{};
    for (std::size_t k = 0; k < M; ++k) {
      const double* x = out.data() + k * d;
      const std::size_t base = k * d;
      inter.fill(0.0);
      switch (path_) {
        case detail::FastPath::Zero:
          break;
        case detail::FastPath::CosineDiff: {
          const auto& kern = std::get<CosineDiffKernel>(cfg_.kernel.variant);
          for (int c = 0; c < d; ++c) {
            cos_buf_[base + c] = std::cos(kern.omega * x[c]);
            sin_buf_[base + c] = std::sin(kern.omega * x[c]);
            if (i >= 2) inter[c] = kern.a * (cos_buf_[base + c] * cos_sum_[base + c] + sin_buf_[base + c] * sin_sum_[base + c]);
          }
          break;
        }
        case detail::FastPath::CosineY: {
          const auto& kern = std::get<CosineYKernel>(cfg_.kernel.variant);
          for (int c = 0; c < d; ++c) {
            cos_buf_[base + c] = std::cos(x[c]);
            if (i >= 2) inter[c] = kern.a * cos_sum_[base + c];
          }
          break;
        }
        case detail::FastPath::None: {
          for (std::size_t j = 1; j < i; ++j) {
            kernel_eval(cfg_.kernel, std::span<const double>(x, d),
                        std::span<const double>(store.point(j - 1, k), d), std::span<double>(term.data(), d));
            for (int c = 0; c < d; ++c) inter[c] += weights[j - 1] * term[c];
          }
          detail::count(opts_, i - 1);
          break;
        }
      }
      observer(i, k, x, inter.data());
      detail::euler_step(cfg_, cfg_.time.time(k), x, inter.data(), bm, sqrt_dt, out.data() + (k + 1) * d);
    }

    if (path_ == detail::FastPath::CosineDiff || path_ == detail::FastPath::CosineY) {
      const double* x = out.data() + M * d;
      for (int c = 0; c < d; ++c) {
        if (path_ == detail::FastPath::CosineDiff) {
          const double omega = std::get<CosineDiffKernel>(cfg_.kernel.variant).omega;
          cos_buf_[M * d + c] = std::cos(omega * x[c]);
          sin_buf_[M * d + c] = std::sin(omega * x[c]);
        } else {
          cos_buf_[M * d + c] = std::cos(x[c]);
        }
      }
      absorb(i);
    }
    levels_ = i;
  }

 private:
  void fill_trig(std::span<const double> path) {
    if (path_ == detail::FastPath::CosineDiff) {
      const double omega = std::get<CosineDiffKernel>(cfg_.kernel.variant).omega;
      for (std::size_t q = 0; q < path.size(); ++q) {
        cos_buf_[q] = std::cos(omega * path[q]);
        sin_buf_[q] = std::sin(omega * path[q]);
      }
    } else {
      for (std::size_t q = 0; q < path.size(); ++q) cos_buf_[q] = std::cos(path[q]);
    }
  }

  /// mu^i = (1 - alpha_i) mu^{i-1} + alpha_i delta_{X^i} on the trig moments.
  void absorb(std::size_t i) {
    const double a = scheme_.alpha(i);
    const double keep = 1.0 - a;
    for (std::size_t q = 0; q < cos_sum_.size(); ++q) cos_sum_[q] = keep * cos_sum_[q] + a * cos_buf_[q];
    for (std::size_t q = 0; q < sin_sum_.size(); ++q) sin_sum_[q] = keep * sin_sum_[q] + a * sin_buf_[q];
  }

  const Config& cfg_;
  const WeightScheme& scheme_;
  std::uint64_t replica_;
  SimOptions opts_;
  detail::FastPath path_;
  std::size_t levels_ = 0;
  std::vector<double> cos_sum_;
  std::vector<double> sin_sum_;
  std::vector<double> cos_buf_;
  std::vector<double> sin_buf_;
};

template <class Observer = NoObserver>
TrajectoryStore simulate_sequential(const Config& cfg, const WeightScheme& scheme, std::size_t n,
                                    std::uint64_t replica = 0, SimOptions opts = {},
                                    Observer&& observer = {}) {
  if (n < 1) throw Error("simulate_sequential: N must be >= 1");
  if (n > scheme.max_index()) throw Error("simulate_sequential: scheme not defined up to N");
  SequentialEngine engine(cfg, scheme, replica, opts);
  TrajectoryStore store = engine.empty_store();
  store.reserve(n);
  for (std::size_t i = 0; i < n; ++i) engine.advance(store, observer);
  return store;
}

/// Appends delta_n particles; the first N paths are untouched and the result
/// equals a from-scratch run with N + delta_n particles.
inline TrajectoryStore extend_particles(TrajectoryStore store, const Config& cfg,
                                        const WeightScheme& scheme, std::size_t delta_n,
                                        SimOptions opts = {}) {
  if (store.scheme_id() != scheme.id()) throw Error("extend_particles: scheme does not match the store");
  if (!(store.grid() == cfg.time) || store.dim() != cfg.dim() || store.seed() != cfg.rng.master_seed) {
    throw Error("extend_particles: configuration does not match the store");
  }
  SequentialEngine engine(cfg, scheme, store.replica(), opts);
  engine.rebuild(store);
  store.reserve(store.n_particles() + delta_n);
  for (std::size_t q = 0; q < delta_n; ++q) engine.advance(store);
  return store;
}

struct ClassicalOptions {
  SimOptions sim;
  /// Stream label used by each particle (default: its own 1-based index).
  std::vector<std::uint64_t> stream_labels;
};

/// Mean-field system: every particle feels the full empirical measure,
/// itself included.
inline TrajectoryStore simulate_classical(const Config& cfg, std::size_t n, std::uint64_t replica = 0,
                                          const ClassicalOptions& opts = {}) {
  if (n < 1) throw Error("simulate_classical: N must be >= 1");
  if (!opts.stream_labels.empty() && opts.stream_labels.size() != n) {
    throw Error("simulate_classical: need one stream label per particle");
  }
  const int d = cfg.dim();
  const std::size_t M = cfg.time.n_steps();
  const double sqrt_dt = std::sqrt(cfg.time.dt());
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto path = detail::fast_path_for(cfg.kernel, opts.sim.force_generic);

  TrajectoryStore store(cfg.time, d, "classical", cfg.rng.master_seed, replica);
  store.allocate(n);
  std::vector<RandomStream> bms;
  bms.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::uint64_t label = opts.stream_labels.empty() ? s + 1 : opts.stream_labels[s];
    RandomStream init = cfg.rng.stream(replica, label, StreamTag::Init);
    double* x0 = store.mutable_point(s, 0);
    for (int c = 0; c < d; ++c) x0[c] = law_sample(cfg.initial, init);
    bms.push_back(cfg.rng.stream(replica, label, StreamTag::Brownian));
  }

  std::vector<double> inter(n * d, 0.0);
  std::vector<double> cs(n * d);
  std::vector<double> sn(n * d);
  std::array<double, kMaxDim> term{};
  for (std::size_t k = 0; k < M; ++k) {
    std::fill(inter.begin(), inter.end(), 0.0);
    switch (path) {
      case detail::FastPath::Zero:
        break;
      case detail::FastPath::CosineDiff: {
        const auto& kern = std::get<CosineDiffKernel>(cfg.kernel.variant);
        for (int c = 0; c < d; ++c) {
          double cc = 0.0;
          double ss = 0.0;
          for (std::size_t s = 0; s < n; ++s) {
            const double x = store.point(s, k)[c];
            cs[s * d + c] = std::cos(kern.omega * x);
            sn[s * d + c] = std::sin(kern.omega * x);
            cc += cs[s * d + c];
            ss += sn[s * d + c];
          }
          cc *= inv_n;
          ss *= inv_n;
          for (std::size_t s = 0; s < n; ++s) inter[s * d + c] = kern.a * (cs[s * d + c] * cc + sn[s * d + c] * ss);
        }
        detail::count(opts.sim, n);
        break;
      }
      case detail::FastPath::CosineY: {
        const auto& kern = std::get<CosineYKernel>(cfg.kernel.variant);
        for (int c = 0; c < d; ++c) {
          double cc = 0.0;
          for (std::size_t s = 0; s < n; ++s) cc += std::cos(store.point(s, k)[c]);
          cc *= inv_n;
          for (std::size_t s = 0; s < n; ++s) inter[s * d + c] = kern.a * cc;
        }
        detail::count(opts.sim, n);
        break;
      }
      case detail::FastPath::None: {
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t j = 0; j < n; ++j) {
            kernel_eval(cfg.kernel, std::span<const double>(store.point(s, k), d),
                        std::span<const double>(store.point(j, k), d), std::span<double>(term.data(), d));
            for (int c = 0; c < d; ++c) inter[s * d + c] += term[c];
          }
          for (int c = 0; c < d; ++c) inter[s * d + c] *= inv_n;
        }
        detail::count(opts.sim, n * n);
        break;
      }
    }
    for (std::size_t s = 0; s < n; ++s) {
      detail::euler_step(cfg, cfg.time.time(k), store.point(s, k), inter.data() + s * d, bms[s], sqrt_dt,
                         store.mutable_point(s, k + 1));
    }
  }
  return store;
}

struct IidResult {
  TrajectoryStore store;
  std::size_t lookups = 0;
  std::size_t clamped = 0;  // lookups that left the PDE grid

  double clamp_fraction() const {
    return lookups == 0 ? 0.0 : static_cast<double>(clamped) / static_cast<double>(lookups);
  }
};

/// N independent copies of the limit diffusion in the frozen field v_t.
inline IidResult simulate_iid_limit(const Config& cfg, const MeanFieldSolution& meanfield, std::size_t n,
                                    std::uint64_t replica = 0, StreamFamily family = kPrimaryFamily) {
  if (cfg.dim() != 1) throw Error("simulate_iid_limit: the frozen field is one-dimensional");
  if (!(meanfield.time() == cfg.time)) throw Error("simulate_iid_limit: meanfield time grid mismatch");
  const std::size_t M = cfg.time.n_steps();
  const double sqrt_dt = std::sqrt(cfg.time.dt());
  IidResult out{TrajectoryStore(cfg.time, 1, "iid", cfg.rng.master_seed, replica)};
  out.store.allocate(n);
  for (std::size_t s = 0; s < n; ++s) {
    RandomStream init = cfg.rng.stream(replica, s + 1, family.init);
    RandomStream bm = cfg.rng.stream(replica, s + 1, family.brownian);
    double* x = out.store.mutable_point(s, 0);
    x[0] = law_sample(cfg.initial, init);
    for (std::size_t k = 0; k < M; ++k) {
      bool clamped = false;
      const double v = meanfield.velocity_at_slice(k, x[0], clamped);
      ++out.lookups;
      if (clamped) ++out.clamped;
      double* next = out.store.mutable_point(s, k + 1);
      detail::euler_step(cfg, cfg.time.time(k), x, &v, bm, sqrt_dt, next);
      x = next;
    }
  }
  return out;
}

struct MismatchSample {
  std::size_t particle = 0;
  std::size_t k = 0;
  std::array<double, kMaxDim> delta{};
  bool clamped = false;
};

/// Delta^i_k = (K*mu^{i-1}_k)(X^i_k) - v_k(X^i_k), with mu^0 = 0 so that
/// Delta^1 = -v(X^1). Recomputed from the stored paths.
inline MismatchSample drift_mismatch(const TrajectoryStore& store, const Config& cfg, const WeightScheme& scheme,
                                     const MeanFieldSolution& meanfield, std::size_t i, std::size_t k) {
  if (i < 1 || i > store.n_particles()) throw Error("drift_mismatch: particle index out of range");
  if (k > store.grid().n_steps()) throw Error("drift_mismatch: time index out of range");
  if (store.dim() != 1) throw Error("drift_mismatch: one-dimensional only");
  MismatchSample out;
  out.particle = i;
  out.k = k;
  const double x = store.at(i - 1, k);
  double inter = 0.0;
  if (i >= 2) {
    const auto w = weights_for(scheme, i - 1).weights;
    for (std::size_t j = 1; j < i; ++j) inter += w[j - 1] * kernel_eval(cfg.kernel, x, store.at(j - 1, k));
  }
  out.delta[0] = inter - meanfield.velocity_at_slice(k, x, out.clamped);
  return out;
}

}  // namespace seqmv
