#pragma once

// Append-only storage of particle paths on a shared time grid.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "seqmv/model.hpp"

namespace seqmv {

class TrajectoryStore {
 public:
  TrajectoryStore() = default;
  TrajectoryStore(TimeGrid grid, int dim, std::string scheme_id, std::uint64_t seed,
                  std::uint64_t replica)
      : grid_(grid), dim_(dim), scheme_id_(std::move(scheme_id)), seed_(seed), replica_(replica) {}

  std::size_t n_particles() const { return n_particles_; }
  const TimeGrid& grid() const { return grid_; }
  int dim() const { return dim_; }
  const std::string& scheme_id() const { return scheme_id_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t replica() const { return replica_; }
  std::size_t path_length() const { return grid_.n_points() * static_cast<std::size_t>(dim_); }

  /// Slot is 0-based: slot s holds particle s + 1.
  double at(std::size_t slot, std::size_t k, int c = 0) const {
    return positions_[slot * path_length() + k * static_cast<std::size_t>(dim_) + c];
  }
  const double* point(std::size_t slot, std::size_t k) const {
    return positions_.data() + slot * path_length() + k * static_cast<std::size_t>(dim_);
  }
  std::span<const double> path(std::size_t slot) const {
    return {positions_.data() + slot * path_length(), path_length()};
  }

  /// Appends a zero-initialised path for the next particle.
  std::span<double> append_particle() {
    positions_.resize(positions_.size() + path_length(), 0.0);
    ++n_particles_;
    return {positions_.data() + (n_particles_ - 1) * path_length(), path_length()};
  }

  /// Allocates n zero paths at once (time-synchronous simulators).
  void allocate(std::size_t n) {
    positions_.assign(n * path_length(), 0.0);
    n_particles_ = n;
  }
  double* mutable_point(std::size_t slot, std::size_t k) {
    return positions_.data() + slot * path_length() + k * static_cast<std::size_t>(dim_);
  }

  void reserve(std::size_t n) { positions_.reserve(n * path_length()); }

  /// Bitwise equality of metadata and every stored coordinate.
  bool bit_equal(const TrajectoryStore& o) const {
    return n_particles_ == o.n_particles_ && grid_ == o.grid_ && dim_ == o.dim_ &&
           scheme_id_ == o.scheme_id_ && seed_ == o.seed_ && replica_ == o.replica_ &&
           positions_.size() == o.positions_.size() &&
           (positions_.empty() ||
            std::memcmp(positions_.data(), o.positions_.data(), positions_.size() * sizeof(double)) == 0);
  }

  /// Binary dump: "SEQMVTRJ", u32 version, u64 N, u64 M, u32 d, u64 seed,
  /// u64 replica, f64 t_end, u32 scheme-id length, scheme-id bytes, then
  /// N*(M+1)*d f64 positions ordered [particle][time][dim]. Little-endian.
  void write_binary(std::ostream& os) const {
    os.write(kMagic, 8);
    put<std::uint32_t>(os, 1);
    put<std::uint64_t>(os, n_particles_);
    put<std::uint64_t>(os, grid_.n_steps());
    put<std::uint32_t>(os, static_cast<std::uint32_t>(dim_));
    put<std::uint64_t>(os, seed_);
    put<std::uint64_t>(os, replica_);
    put<double>(os, grid_.t_end());
    put<std::uint32_t>(os, static_cast<std::uint32_t>(scheme_id_.size()));
    os.write(scheme_id_.data(), static_cast<std::streamsize>(scheme_id_.size()));
    for (double v : positions_) put<double>(os, v);
    if (!os) throw Error("trajectory dump: write failed");
  }

  static TrajectoryStore read_binary(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) throw Error("trajectory dump: bad magic");
    if (get<std::uint32_t>(is) != 1) throw Error("trajectory dump: unsupported version");
    const auto n = get<std::uint64_t>(is);
    const auto m = get<std::uint64_t>(is);
    const auto d = get<std::uint32_t>(is);
    const auto seed = get<std::uint64_t>(is);
    const auto replica = get<std::uint64_t>(is);
    const auto t_end = get<double>(is);
    const auto len = get<std::uint32_t>(is);
    std::string id(len, '\0');
    is.read(id.data(), len);
    TrajectoryStore s(TimeGrid(t_end, m), static_cast<int>(d), id, seed, replica);
    s.allocate(n);
    for (double& v : s.positions_) v = get<double>(is);
    if (!is) throw Error("trajectory dump: truncated");
    return s;
  }

  /// particle,k,t,x0[,x1]
  void write_csv(std::ostream& os) const {
    os.precision(17);
    os << "particle,k,t";
    for (int c = 0; c < dim_; ++c) os << ",x" << c;
    os << '\n';
    for (std::size_t s = 0; s < n_particles_; ++s)
      for (std::size_t k = 0; k < grid_.n_points(); ++k) {
        os << s + 1 << ',' << k << ',' << grid_.time(k);
        for (int c = 0; c < dim_; ++c) os << ',' << at(s, k, c);
        os << '\n';
      }
  }

 private:
  static constexpr char kMagic[9] = "SEQMVTRJ";

  template <class T>
  static void put(std::ostream& os, T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    U bits = std::bit_cast<U>(value);
    std::array<unsigned char, sizeof(U)> bytes{};
    for (std::size_t b = 0; b < sizeof(U); ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
    os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(U));
  }

  template <class T>
  static T get(std::istream& is) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    std::array<unsigned char, sizeof(U)> bytes{};
    is.read(reinterpret_cast<char*>(bytes.data()), sizeof(U));
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) bits |= static_cast<U>(bytes[b]) << (8 * b);
    return std::bit_cast<T>(bits);
  }

  TimeGrid grid_;
  int dim_ = 1;
  std::string scheme_id_;
  std::uint64_t seed_ = 0;
  std::uint64_t replica_ = 0;
  std::size_t n_particles_ = 0;
  std::vector<double> positions_;
};

}  // namespace seqmv
