// SPDX-License-Identifier: Apache-2.0
#pragma once

/// Counter-based Brownian increments.
///
/// Draws come from Philox4x32-10 keyed by the 64-bit seed. The counter holds
/// (block, stream, path_lo, path_hi), so any increment of any path can be
/// regenerated on its own and results do not depend on thread scheduling.
/// Each block yields two 53-bit uniforms and, through Box-Muller, two normals.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "clab/errors.hpp"

namespace clab {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds.
inline Philox4x32Counter philox4x32_10(Philox4x32Counter ctr, Philox4x32Key key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

/// Stream ids separating Brownian paths from other random data.
enum class NoiseStream : std::uint32_t { brownian = 0, data = 1, test = 2 };

/// Standard normals indexed by (seed, stream, item, position).
class GaussianSource {
 public:
  GaussianSource(std::uint64_t seed, NoiseStream stream, std::uint64_t item)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(static_cast<std::uint32_t>(stream)),
        item_(item) {}

  /// The pair of normals produced by counter block `block`.
  [[nodiscard]] std::array<double, 2> pair(std::uint32_t block) const {
    const Philox4x32Counter out = philox4x32_10(
        {block, stream_, static_cast<std::uint32_t>(item_), static_cast<std::uint32_t>(item_ >> 32)},
        key_);
    const double u1 = to_unit(out[0], out[1]);
    const double u2 = to_unit(out[2], out[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * 3.14159265358979323846 * u2;
    return {r * std::cos(th), r * std::sin(th)};
  }

  /// Normal number `i` in this item's sequence.
  [[nodiscard]] double at(std::uint64_t i) const {
    if (i / 2 > 0xffffffffull) throw InvalidInput("GaussianSource: index exceeds counter range");
    return pair(static_cast<std::uint32_t>(i / 2))[i % 2];
  }

  /// The first n normals.
  [[nodiscard]] std::vector<double> take(std::size_t n) const {
    std::vector<double> z(n);
    for (std::size_t b = 0; 2 * b < n; ++b) {
      const auto p = pair(static_cast<std::uint32_t>(b));
      z[2 * b] = p[0];
      if (2 * b + 1 < n) z[2 * b + 1] = p[1];
    }
    return z;
  }

 private:
  // Uniform in (0,1) from the top 53 bits, offset by half an ulp so log is finite.
  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  Philox4x32Key key_;
  std::uint32_t stream_;
  std::uint64_t item_;
};

/// One Brownian path on a uniform grid of [0, T].
struct BrownianPath {
  double T = 0.0;
  std::size_t n_steps = 0;
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
  std::vector<double> increments;

  [[nodiscard]] double dt() const { return T / static_cast<double>(n_steps); }

  /// w(t_n) for n = 0..n_steps.
  [[nodiscard]] std::vector<double> values() const {
    std::vector<double> w(n_steps + 1, 0.0);
    for (std::size_t n = 0; n < n_steps; ++n) w[n + 1] = w[n] + increments[n];
    return w;
  }
};

/// Path `index` of the ensemble identified by `seed`.
inline BrownianPath brownian_path(double T, std::size_t n_steps, std::uint64_t seed,
                                  std::uint64_t index) {
  require(T > 0.0 && std::isfinite(T), "brownian_path: T must be positive");
  require(n_steps >= 1, "brownian_path: n_steps must be positive");
  BrownianPath p;
  p.T = T;
  p.n_steps = n_steps;
  p.seed = seed;
  p.index = index;
  p.increments = GaussianSource(seed, NoiseStream::brownian, index).take(n_steps);
  const double s = std::sqrt(p.dt());
  for (double& v : p.increments) v *= s;
  return p;
}

inline std::vector<BrownianPath> brownian_ensemble(double T, std::size_t n_steps,
                                                   std::uint64_t seed, std::size_t n_paths,
                                                   std::uint64_t first_index = 0) {
  require(n_paths >= 1, "brownian_ensemble: n_paths must be positive");
  std::vector<BrownianPath> out;
  out.reserve(n_paths);
  for (std::size_t p = 0; p < n_paths; ++p)
    out.push_back(brownian_path(T, n_steps, seed, first_index + p));
  return out;
}

inline std::vector<BrownianPath> sample_paths(std::uint64_t seed, std::size_t n_paths,
                                              std::size_t n_steps, double T) {
  return brownian_ensemble(T, n_steps, seed, n_paths);
}

/// The same path on a grid `factor` times coarser (increments summed).
inline BrownianPath coarsen(const BrownianPath& p, std::size_t factor) {
  require(factor >= 1 && p.n_steps % factor == 0, "coarsen: factor must divide n_steps");
  BrownianPath c = p;
  c.n_steps = p.n_steps / factor;
  c.increments.assign(c.n_steps, 0.0);
  for (std::size_t n = 0; n < p.n_steps; ++n) c.increments[n / factor] += p.increments[n];
  return c;
}

/// A path whose increments are all zero (deterministic runs).
inline BrownianPath zero_path(double T, std::size_t n_steps) {
  require(T > 0.0 && n_steps >= 1, "zero_path: bad grid");
  BrownianPath p;
  p.T = T;
  p.n_steps = n_steps;
  p.increments.assign(n_steps, 0.0);
  return p;
}

namespace detail {
template <typename V>
void write_le(std::ostream& os, V v) {
  unsigned char b[sizeof(V)];
  std::memcpy(b, &v, sizeof(V));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(V) / 2; ++i) std::swap(b[i], b[sizeof(V) - 1 - i]);
  os.write(reinterpret_cast<const char*>(b), sizeof(V));
}
template <typename V>
V read_le(std::istream& is) {
  unsigned char b[sizeof(V)];
  is.read(reinterpret_cast<char*>(b), sizeof(V));
  if (!is) throw InvalidInput("noise dump: truncated file");
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(V) / 2; ++i) std::swap(b[i], b[sizeof(V) - 1 - i]);
  V v;
  std::memcpy(&v, b, sizeof(V));
  return v;
}
}  // namespace detail

/// Little-endian dump: f64 T, u64 n_steps, u64 seed, u64 n_paths, then the
/// increments path-major as f64.
inline void write_noise_dump(const std::string& file, const std::vector<BrownianPath>& paths) {
  require(!paths.empty(), "write_noise_dump: empty ensemble");
  std::ofstream os(file, std::ios::binary);
  if (!os) throw InvalidInput("write_noise_dump: cannot open " + file);
  detail::write_le<double>(os, paths[0].T);
  detail::write_le<std::uint64_t>(os, paths[0].n_steps);
  detail::write_le<std::uint64_t>(os, paths[0].seed);
  detail::write_le<std::uint64_t>(os, paths.size());
  for (const auto& p : paths) {
    require(p.n_steps == paths[0].n_steps, "write_noise_dump: ragged ensemble");
    for (double v : p.increments) detail::write_le<double>(os, v);
  }
}

inline std::vector<BrownianPath> read_noise_dump(const std::string& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw InvalidInput("read_noise_dump: cannot open " + file);
  const double T = detail::read_le<double>(is);
  const auto n_steps = detail::read_le<std::uint64_t>(is);
  const auto seed = detail::read_le<std::uint64_t>(is);
  const auto n_paths = detail::read_le<std::uint64_t>(is);
  std::vector<BrownianPath> out(n_paths);
  for (std::uint64_t p = 0; p < n_paths; ++p) {
    out[p].T = T;
    out[p].n_steps = n_steps;
    out[p].seed = seed;
    out[p].index = p;
    out[p].increments.resize(n_steps);
    for (auto& v : out[p].increments) v = detail::read_le<double>(is);
  }
  return out;
}

}  // namespace clab
