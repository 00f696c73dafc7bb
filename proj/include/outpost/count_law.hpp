#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace outpost {

using MultiIndex = std::vector<int>;

struct CountEntry {
  MultiIndex alpha;
  double p = 0.0;
};

// A truncated joint pmf on N^m. Entries are stored in lexicographic order of
// alpha; `mass_deficit` bounds the probability not represented by any entry.
class CountLaw {
 public:
  CountLaw() = default;
  // Entries need not be sorted; duplicate multi-indices are merged.
  CountLaw(int m, std::vector<CountEntry> entries, double mass_deficit,
           std::vector<int> cap);

  static CountLaw point_mass(MultiIndex alpha);

  int arity() const { return m_; }
  std::span<const CountEntry> entries() const { return entries_; }
  double mass_deficit() const { return mass_deficit_; }
  const std::vector<int>& cap() const { return cap_; }

  double probability(std::span<const int> alpha) const;
  double total_mass() const;

  std::vector<double> mean() const;
  // Central second moments; the deficit is ignored.
  std::vector<std::vector<double>> covariance_matrix() const;
  // E[exp(<s, X>)] over the stored entries.
  double mgf(std::span<const double> s) const;

  CountLaw marginal(int k) const;

  // Drops the smallest entries while their cumulative mass stays below
  // `budget`; the dropped mass is added to the deficit.
  CountLaw pruned(double budget) const;

 private:
  int m_ = 0;
  std::vector<CountEntry> entries_;
  double mass_deficit_ = 0.0;
  std::vector<int> cap_;
};

struct TvInterval {
  double lower = 0.0;
  double upper = 0.0;
};

// Bounds on the total-variation distance between the laws that `a` and `b`
// approximate: half the l1 distance of the stored entries, widened by the
// deficits.
TvInterval tv_distance(const CountLaw& a, const CountLaw& b);

// Dense dynamic program over independent categorical sites. Each site puts
// at most one unit into one of m coordinates (category k >= 1) or into none
// (category 0). Counts above `cap` are moved to an overflow tally.
class CategoricalAccumulator {
 public:
  CategoricalAccumulator(int m, int cap, std::size_t entry_budget);

  // probs[0] is the "no coordinate" probability, probs[k] feeds coordinate k.
  void add_site(std::span<const double> probs);

  double overflow() const { return overflow_; }
  int sites() const { return sites_; }

  // Cells below `cell_floor` are dropped; dropped and overflow mass plus
  // `extra_deficit` (and any normalization shortfall) form the deficit.
  CountLaw to_law(double extra_deficit, double cell_floor = 1e-300) const;

 private:
  std::size_t flat(std::span<const int> alpha) const;

  int m_;
  int cap_;
  std::vector<std::size_t> stride_;
  std::vector<int> extent_;  // occupied box: counts in [0, extent_[k]]
  std::vector<double> table_;
  std::vector<double> scratch_;
  double overflow_ = 0.0;
  int sites_ = 0;
};

void to_json(nlohmann::json& j, const CountLaw& law);
void from_json(const nlohmann::json& j, CountLaw& law);

}  // namespace outpost
