#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "outpost/count_law.hpp"
#include "outpost/finite_n.hpp"
#include "outpost/radial_potential.hpp"

namespace outpost {

// JSON keys: case, t, w, components, M0, margin, n, C, rel_tol, mode,
// regions, bumps, eps, s, tail_tol, cap, seed, threads.
struct ExperimentConfig {
  std::string case_name = "case1";  // case1, case2 or ginibre
  std::vector<double> t{1.5, 2.0};
  std::vector<double> w{0.2, 0.2};
  std::vector<Interval> components{{0.0, 1.0}, {1.6, 2.2}};
  double M0 = 0.5;
  double margin = 0.05;
  std::vector<int> n{64, 128, 256, 512};
  std::vector<double> s_values{-1.0, -0.5, 0.0, 0.5, 1.0};
  std::optional<double> eps;
  // Case-1 overrides of the counting regions and bumps.
  std::vector<Interval> regions;
  std::vector<BumpSpec> bumps;
  QuadratureConfig quad;
  double tail_tol = 1e-12;
  int cap = 60;
  std::uint64_t seed = 0;

  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const ExperimentConfig& c);

RadialPotential build_potential(const ExperimentConfig& c);

// Hard regions (exact law, sampling) and smooth statistics (MGF) at size n.
struct StatisticSet {
  RegionSet hard;
  RegionSet smooth;
};

StatisticSet statistics_for(const ExperimentConfig& c, const DropletData& data, int n);

struct ConvergenceRow {
  int n = 0;
  double x_n = 0.0;
  TvInterval tv;
  double mgf_err_max = 0.0;       // smooth statistics against the limit
  double mgf_err_hard_max = 0.0;  // hard indicators against the limit
  double seconds = 0.0;
  CountLaw exact;
  CountLaw predicted;
  nlohmann::json limit;
};

struct ConvergenceReport {
  ExperimentConfig config;
  std::vector<ConvergenceRow> rows;
};

ConvergenceRow converge_row(const ExperimentConfig& c, const RadialPotential& pot, int n);
ConvergenceReport converge(const ExperimentConfig& c);

// Columns n,tv_lo,tv_hi,mgf_err_max,seconds.
void write_converge_csv(std::ostream& os, const ConvergenceReport& report);
// Columns alpha_0..alpha_{m-1},p_exact,p_predicted over the union of cells.
void write_pmf_csv(std::ostream& os, const ConvergenceRow& row);

void to_json(nlohmann::json& j, const ConvergenceRow& row);
void to_json(nlohmann::json& j, const ConvergenceReport& report);

// %.17g, the CSV number format.
std::string format_number(double v);

}  // namespace outpost
