#pragma once

#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "outpost/count_law.hpp"
#include "outpost/heine.hpp"
#include "outpost/radial_potential.hpp"

namespace outpost {

// Outposts t_1 < ... < t_m outside the droplet, whose outer edge is b0.
// The counts converge to He(vartheta_k rho_k; rho_k^2).
struct Case1Limit {
  int m = 0;
  double b0 = 0.0;
  std::vector<double> t;
  std::vector<double> vartheta;
  std::vector<double> rho;
  HeineParams params;
};

Case1Limit case1(const DropletData& data, const RadialPotential& pot);

struct Moments {
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<std::vector<double>> covariance;
};

// Series sums over sites j of pi_k(j) = w_k(j) / (1 + sum_l w_l(j)) with
// w_k(j) = vartheta_k rho_k^(2j+1).
Moments case1_moments(const Case1Limit& lim);
double case1_predicted_mgf(const Case1Limit& lim, std::span<const double> s);

// Outposts t_1..t_m in the gap (b0, a1) at size n. The tilde law lives on
// coordinates 0..m, the hat law on 1..m+1; `map` sends hat coordinate m+1
// to combined coordinate 0.
struct Case2Limit {
  int n = 0;
  int m = 0;
  double M0 = 0.0;
  int m0 = 0;
  double x_n = 0.0;
  double b0 = 0.0;
  double a1 = 0.0;
  std::vector<double> t;
  std::vector<double> tilde_rho;       // k = 0..m
  std::vector<double> tilde_vartheta;  // k = 0..m
  std::vector<double> hat_rho;         // k = 1..m+1, stored from index 0
  std::vector<double> hat_vartheta;    // k = 1..m+1, stored from index 0
  HeineParams tilde;
  HeineParams hat;
  CoordinateMap map;
};

Case2Limit case2(const DropletData& data, const RadialPotential& pot, int n);

// Law of X^(1) + map(X^(2)) on coordinates 0..m. Each factor is tabulated
// and pruned to tail_tol / 4, so the deficit stays below tail_tol.
CountLaw case2_predicted_law(const Case2Limit& lim, double tail_tol);

// s = (s_0, ..., s_m); s_{m+1} is bound to s_0. Requires |s_k| <= log n.
double case2_predicted_mgf(const Case2Limit& lim, std::span<const double> s);
double case2_predicted_log_mgf(const Case2Limit& lim, std::span<const double> s);

struct Case2Moments {
  Moments tilde;     // coordinates 0..m
  Moments hat;       // coordinates 1..m+1
  Moments combined;  // coordinates 0..m
  // Cov(X^(1)_p, X^(2)_q), zero by independence.
  std::vector<std::vector<double>> cross;
};

Case2Moments case2_moments(const Case2Limit& lim);

void to_json(nlohmann::json& j, const Case1Limit& lim);
void to_json(nlohmann::json& j, const Case2Limit& lim);

}  // namespace outpost
