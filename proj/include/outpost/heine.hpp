#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "outpost/count_law.hpp"

namespace outpost {

// Parameters (theta_1..theta_m; q_1..q_m) of the multi-dimensional Heine
// distribution. Construct through validate().
class HeineParams {
 public:
  static HeineParams validate(std::span<const double> thetas,
                              std::span<const double> qs);

  int m() const { return static_cast<int>(thetas_.size()); }
  const std::vector<double>& thetas() const { return thetas_; }
  const std::vector<double>& qs() const { return qs_; }

 private:
  HeineParams() = default;
  std::vector<double> thetas_;
  std::vector<double> qs_;
};

// Law of the categorical site variable Y_j: probs[0] = P(Y_j = 0) and
// probs[k] = P(Y_j = k) for k = 1..m.
struct SiteDistribution {
  int j = 0;
  std::vector<double> probs;
};

SiteDistribution site_probabilities(const HeineParams& params, int j);

// Smallest J with sum_k theta_k q_k^(J+1) / (1 - q_k) < tail, which bounds
// the probability that any site beyond J is occupied.
int truncation_index(const HeineParams& params, double tail);

// sum_{j >= 0} log(1 + sum_k theta_k q_k^j), summed to convergence.
double log_partition(const HeineParams& params);

struct PmfOptions {
  std::size_t entry_budget = 20'000'000;
  double cell_floor = 1e-300;
};

// Joint pmf by the site-by-site categorical recursion. Entries are the
// probabilities P(X = alpha, no site beyond the truncation is occupied),
// so each entry is within mass_deficit of the exact value.
CountLaw pmf_table(const HeineParams& params, double tail_tol,
                   const PmfOptions& options = {});

struct PointProbability {
  double p = 0.0;
  double error_bound = 0.0;
};

// P(X = alpha) from the disjoint-index-set formula: the numerator sums
// prod_k theta_k^|J_k| q_k^(sum J_k) over disjoint families with |J_k| =
// alpha_k, organized as a site-by-site coefficient recursion.
PointProbability pmf_point(const HeineParams& params, std::span<const int> alpha,
                           double tail_tol, std::size_t budget = 50'000'000);

// E[exp(<s, X>)] as the convergent site product, in log space.
double mgf(const HeineParams& params, std::span<const double> s);
double log_mgf(const HeineParams& params, std::span<const double> s);

std::vector<double> mean_vector(const HeineParams& params);
std::vector<double> variance_vector(const HeineParams& params);
// Coordinates are zero-based; p != q.
double covariance(const HeineParams& params, int p, int q);

struct HeineSample {
  std::vector<MultiIndex> counts;
  int truncation = 0;      // last site index drawn
  double tv_bound = 0.0;   // total-variation error from truncation
};

HeineSample sample(const HeineParams& params, int count, std::uint64_t seed,
                   double tail_tol, int threads = 1);

// Target coordinate for each source coordinate of two laws.
struct CoordinateMap {
  int target = 0;
  std::vector<int> from_a;
  std::vector<int> from_b;

  void check() const;
};

// Law of map(A) + map(B) for independent A ~ a and B ~ b.
CountLaw convolve_mapped(const CountLaw& a, const CountLaw& b,
                         const CoordinateMap& map);

// (z; q)_k and (z; q)_inf.
double q_pochhammer(double z, double q, int k);
double q_pochhammer_inf(double z, double q);

// One-dimensional Heine pmf q^(k(k-1)/2) theta^k / ((q;q)_k (-theta;q)_inf).
double heine_1d_pmf(double theta, double q, int k);

}  // namespace outpost
