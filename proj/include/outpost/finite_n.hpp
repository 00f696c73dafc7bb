#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "outpost/count_law.hpp"
#include "outpost/radial_potential.hpp"

namespace outpost {

enum class QuadMode { windowed, full, both };

QuadMode parse_quad_mode(std::string_view name);
const char* to_string(QuadMode mode);

// abs_tol is measured against the max-normalized integrand, whose peak is
// of order one.
struct QuadratureConfig {
  double rel_tol = 1e-13;
  double abs_tol = 1e-15;
  double C = 10.0;
  QuadMode mode = QuadMode::windowed;
  int max_subdivisions = 20000;
  int threads = 1;

  void validate() const;
};

// One radial profile: indicator of [lo, hi], bump around `center` with
// half-width eps, or an eta-hat step rising (or falling) across [lo, hi].
class Shape {
 public:
  enum class Kind { indicator, bump, step };

  static Shape indicator(Interval iv);
  static Shape bump(BumpSpec b);
  static Shape step(double lo, double hi, bool rising);

  double operator()(double r) const;
  Kind kind() const { return kind_; }
  // Where the shape may be nonzero; rising steps extend to infinity.
  Interval support() const;
  void breakpoints(std::vector<double>& out) const;

 private:
  Kind kind_ = Kind::indicator;
  double lo_ = 0.0, hi_ = 0.0;
  bool rising_ = true;
};

// Shape applied to modulus j: `below` for j < split, `above` (when set)
// for j >= split.
struct Statistic {
  Shape below;
  std::optional<Shape> above;
  int split = 0;

  const Shape& shape(int j) const { return above && j >= split ? *above : below; }
};

class RegionSet {
 public:
  RegionSet() = default;
  explicit RegionSet(std::vector<Statistic> stats);
  static RegionSet hard(std::span<const Interval> intervals);
  static RegionSet smooth(std::span<const BumpSpec> bumps);

  int size() const { return static_cast<int>(stats_.size()); }
  bool is_hard() const;
  const std::vector<Statistic>& stats() const { return stats_; }
  // Throws if the hard regions seen by modulus j overlap.
  void check_disjoint(int j) const;

 private:
  std::vector<Statistic> stats_;
};

// Default eps: a fifth of the smallest gap between adjacent special radii.
double default_eps(const DropletData& data);

// Case 1: one statistic per outpost, [t - eps, t + eps] or its bump.
// Case 2: coordinate 0 counts displaced moduli. For j < m0 = floor(M0 n)
// it covers [mid(t_m, a1), infinity); for j >= m0 it covers [0, mid(b0, t1)].
// Smooth versions use bumps and eta-hat steps across [t_m + eps, a1 - eps]
// and [b0 + eps, t1 - eps]. Coordinates 1..m are the outposts.
RegionSet outpost_regions(const DropletData& data, double eps, int n, bool smooth);

// Half-open index range [lo, hi).
struct IndexRange {
  int lo = 0;
  int hi = 0;
};

// Index ranges carrying the s-dependence at size n: j >= n - L_n (case 1) or
// |j - m0| < L_n (case 2), with L_n = ceil(C log n).
std::vector<IndexRange> leading_indices(const DropletData& data, int n, double C);

struct MgfResult {
  double value = 1.0;
  double log_value = 0.0;
  // Sum of log factors over indices outside the restriction (0 if none).
  double neglected_log = 0.0;
};

// Exact finite-n computations for the rotation-invariant ensemble with
// weight e^{-n q(|z|)}; moduli |z_j| are independent with densities
// proportional to r^{2j+1} e^{-n q(r)}.
class FiniteNEngine {
 public:
  FiniteNEngine(const RadialPotential& pot, int n, QuadratureConfig cfg = {});
  ~FiniteNEngine();
  FiniteNEngine(FiniteNEngine&&) noexcept;

  int n() const;
  const QuadratureConfig& config() const;

  // log 2 int r^{2j+1} e^{sum_k s_k h_k(r)} e^{-n q(r)} dr.
  double log_norm(int j, std::span<const double> s, const RegionSet& stats) const;
  double log_norm(int j) const;

  // Integration windows for index j (windowed mode).
  std::vector<Interval> windows(int j) const;

  MgfResult joint_mgf(std::span<const double> s, const RegionSet& stats,
                      std::span<const IndexRange> restrict_to = {}) const;

  std::vector<double> region_probabilities(int j, const RegionSet& regions) const;

  CountLaw exact_count_law(const RegionSet& regions, int cap,
                           std::size_t entry_budget = 20'000'000) const;

 private:
  friend class ModuliSampler;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

double log_norm(const RadialPotential& pot, int n, int j, std::span<const double> s,
                const RegionSet& stats, const QuadratureConfig& cfg = {});
MgfResult joint_mgf(const RadialPotential& pot, int n, std::span<const double> s,
                    const RegionSet& stats, const QuadratureConfig& cfg = {});
std::vector<double> region_probabilities(const RadialPotential& pot, int n, int j,
                                         const RegionSet& regions,
                                         const QuadratureConfig& cfg = {});
CountLaw exact_count_law(const RadialPotential& pot, int n, const RegionSet& regions,
                         int cap, const QuadratureConfig& cfg = {});

struct ModuliSample {
  int n = 0;
  std::uint64_t seed = 0;
  std::vector<double> radii;  // radii[j] for index j
};

// Inverse-CDF sampler of the n independent moduli. CDF cells carry at most
// 1e-3 probability and are inverted through a cubic Hermite interpolant with
// the exact density as derivative.
class ModuliSampler {
 public:
  ModuliSampler(const RadialPotential& pot, int n, QuadratureConfig cfg = {});
  ~ModuliSampler();
  ModuliSampler(ModuliSampler&&) noexcept;

  int n() const;
  // Quantile of |z_j| at probability u in (0, 1).
  double quantile(int j, double u) const;
  ModuliSample sample(std::uint64_t seed) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

ModuliSample sample_moduli(const RadialPotential& pot, int n, std::uint64_t seed,
                           const QuadratureConfig& cfg = {});

// Counts of radii in each hard region (modulus j uses the shape for j).
MultiIndex count_regions(const RegionSet& regions, std::span<const double> radii);

// CSV with header "j,r".
void write_moduli_csv(std::ostream& os, const ModuliSample& sample);

}  // namespace outpost
