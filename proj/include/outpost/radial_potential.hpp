#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace outpost {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double r) const { return r >= lo && r <= hi; }
  double width() const { return hi - lo; }
};

// Value and first two radial derivatives.
struct Jet {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

class RadialProfile {
 public:
  virtual ~RadialProfile() = default;
  virtual Jet eval(double r) const = 0;
};

enum class CaseTag { case1, case2, other };

const char* to_string(CaseTag tag);

// Radial description of the droplet and its outposts. masses[v] is the
// equilibrium mass of the disk |z| <= components[v].hi.
struct DropletData {
  std::vector<Interval> components;
  std::vector<double> outposts;
  std::vector<double> masses;
  CaseTag case_tag = CaseTag::other;
};

// Rotation-invariant external potential Q(z) = q(|z|).
class RadialPotential {
 public:
  RadialPotential(std::shared_ptr<const RadialProfile> profile,
                  Interval smooth_window, double r_max, std::string label,
                  std::optional<DropletData> declared = std::nullopt,
                  std::vector<double> junctions = {});

  Jet jet(double r) const { return profile_->eval(r); }
  double q(double r) const { return profile_->eval(r).value; }
  double dq(double r) const { return profile_->eval(r).d1; }
  double ddq(double r) const { return profile_->eval(r).d2; }

  const Interval& smooth_window() const { return smooth_window_; }
  // Integration cutoff; e^{-n q} is negligible beyond it.
  double r_max() const { return r_max_; }
  const std::string& label() const { return label_; }
  // Droplet data the builder was asked to produce, if built.
  const std::optional<DropletData>& declared() const { return declared_; }
  // Radii where the profile switches formula; checked for C2 matching.
  const std::vector<double>& junctions() const { return junctions_; }

 private:
  std::shared_ptr<const RadialProfile> profile_;
  Interval smooth_window_;
  double r_max_;
  std::string label_;
  std::optional<DropletData> declared_;
  std::vector<double> junctions_;
};

// Quarter Laplacian (q'' + q'/r) / 4 of Q at radius r.
double laplacian(const RadialPotential& pot, double r);

// g_tau(r) = q(r) - 2 tau log r.
double g_tau(const RadialPotential& pot, double tau, double r);

struct Peak {
  double r = 0.0;
  double g = 0.0;
  double curvature = 0.0;  // g_tau''(r)
  bool significant = false;
};

struct PeakAnalysis {
  double tau = 0.0;
  std::vector<Peak> peaks;  // increasing in r
  double b_tau = 0.0;       // global minimum of g_tau on the interval
  double delta_n = 0.0;     // significance threshold C log n / n
};

// Local minima of g_tau on a fixed interval: roots of r q'(r) = 2 tau found
// by sign changes on a grid, then bisection. The grid values of r q'(r) are
// computed once so repeated queries for different tau are cheap.
class PeakFinder {
 public:
  PeakFinder(const RadialPotential& pot, Interval interval,
             double grid_per_unit = 4096.0);

  PeakAnalysis analyze(double tau, int n, double C) const;
  // Peaks without significance flags (delta_n = 0).
  PeakAnalysis analyze(double tau) const { return analyze(tau, 2, 0.0); }

  const Interval& interval() const { return interval_; }

 private:
  RadialPotential pot_;
  Interval interval_;
  std::vector<double> grid_;
  std::vector<double> rdq_;
};

PeakAnalysis find_peaks(const RadialPotential& pot, double tau, Interval interval,
                        int n, double C, double grid_per_unit = 4096.0);

// Sweeps tau over [0, 1], follows the global minimizer of g_tau, and reads
// off droplet components (continuous sweeps), branching values (jumps) and
// outposts (isolated tied minimizers).
DropletData classify(const RadialPotential& pot, int n_probe = 2001,
                     double tie_tol = 1e-9);

// m0 = floor(M0 n), guarded against M0 n landing just below an integer.
int inner_count(double m0, int n);

// Obstacle function built from classified droplet data.
double obstacle(const RadialPotential& pot, const DropletData& data, double r);

// Smooth cutoff h(r) = 1 on [t - eps/2, t + eps/2], 0 off [t - eps, t + eps].
struct BumpSpec {
  double center = 0.0;
  double eps = 0.0;
};

double bump(const BumpSpec& spec, double r);

// eta-hat: C^infinity, 0 for u <= 0, 1 for u >= 1.
double smooth_step(double u);

// Compactly supported bump exp(1 - 1/(1 - u^2)) on |u| < 1 with derivatives.
Jet window_bump(double u);

RadialPotential ginibre();

// Ginibre outside (1, 3); inside, Qc + (r^2 - Qc) (1 - sum_k zeta((r - t_k)/w_k))
// with Qc = 1 + 2 log r, so Q touches its obstacle exactly at the t_k.
RadialPotential build_case1(std::span<const double> t, std::span<const double> w,
                            double margin = 0.05);

// Two constant-density annuli [a0, b0], [a1, b1] carrying masses M0 and
// 1 - M0, with outposts at t_k inside the gap. The gap barrier blends the
// extended component profiles and adds a plateau over the middle 60% of the
// gap whose height is the inner profile's excess over Qc at a1.
RadialPotential build_case2(Interval inner, Interval outer, double m0,
                            std::span<const double> t, std::span<const double> w,
                            double margin = 0.05);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<CheckResult> validate_potential(const RadialPotential& pot);

void to_json(nlohmann::json& j, const Interval& v);
void to_json(nlohmann::json& j, const DropletData& d);

}  // namespace outpost
