// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "outpost/experiment.hpp"
#include "outpost/finite_n.hpp"
#include "outpost/heine.hpp"
#include "outpost/limit.hpp"

using namespace outpost;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("violated: ") + what;
    }
  }
  void note(const std::string& text) { detail += (detail.empty() ? "" : "; ") + text; }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out = "(";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
  return out + ")";
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) return false;
  }
  return true;
}

std::vector<std::vector<double>> cube(const std::vector<double>& values, int dim) {
  std::vector<std::vector<double>> out{{}};
  for (int k = 0; k < dim; ++k) {
    std::vector<std::vector<double>> next;
    for (const auto& prefix : out) {
      for (double v : values) {
        auto s = prefix;
        s.push_back(v);
        next.push_back(std::move(s));
      }
    }
    out = std::move(next);
  }
  return out;
}

// Independent closed form of the one-dimensional Heine pmf.
double heine_closed_form(double theta, double q, int k) {
  double qk = 1.0;
  for (int i = 1; i <= k; ++i) qk *= 1.0 - std::pow(q, i);
  double qinf = 1.0;
  for (int i = 0; i < 4000; ++i) qinf *= 1.0 + theta * std::pow(q, i);
  return std::pow(q, 0.5 * k * (k - 1)) * std::pow(theta, k) / (qk * qinf);
}

std::vector<HeineParams> heine_grid() {
  std::vector<HeineParams> grid;
  for (double th : {0.5, 1.0, 2.0}) {
    for (double q : {0.3, 0.5, 0.8}) grid.push_back(HeineParams::validate(std::vector{th}, std::vector{q}));
  }
  grid.push_back(HeineParams::validate(std::vector{1.0, 1.0}, std::vector{0.25, 0.25}));
  grid.push_back(HeineParams::validate(std::vector{0.5, 2.0}, std::vector{0.8, 0.3}));
  grid.push_back(HeineParams::validate(std::vector{2.0, 0.7}, std::vector{0.5, 0.64}));
  return grid;
}

Case1Limit manual_case1(const std::vector<double>& vartheta, const std::vector<double>& rho) {
  std::vector<double> th, q;
  for (std::size_t k = 0; k < rho.size(); ++k) {
    th.push_back(vartheta[k] * rho[k]);
    q.push_back(rho[k] * rho[k]);
  }
  return Case1Limit{static_cast<int>(rho.size()), 1.0, {}, vartheta, rho,
                    HeineParams::validate(th, q)};
}

ExperimentConfig case1_config() {
  ExperimentConfig c;
  c.case_name = "case1";
  c.t = {1.5, 2.0};
  c.w = {0.2, 0.2};
  c.n = {64, 128, 256, 512};
  c.s_values = {-1.0, -0.5, 0.0, 0.5, 1.0};
  c.quad.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return c;
}

ExperimentConfig case2_config() {
  ExperimentConfig c = case1_config();
  c.case_name = "case2";
  c.components = {{0.0, 1.0}, {1.6, 2.2}};
  c.M0 = 0.5;
  c.t = {1.2, 1.4};
  c.w = {0.06, 0.06};
  return c;
}

Outcome criterion1() {
  Outcome o;
  double worst_pmf = 0.0, min_mass = 1.0, max_mass = 0.0;
  for (const auto& p : heine_grid()) {
    const CountLaw law = pmf_table(p, 1e-14);
    const double mass = law.total_mass();
    min_mass = std::min(min_mass, mass);
    max_mass = std::max(max_mass, mass);
    if (p.m() != 1) continue;
    for (int a = 0; a <= 20; ++a) {
      const double want = heine_closed_form(p.thetas()[0], p.qs()[0], a);
      worst_pmf = std::max(worst_pmf, std::abs(law.probability(std::vector{a}) - want));
    }
  }
  o.require(min_mass >= 1.0 - 1e-12 && max_mass <= 1.0, "mass in [1-1e-12, 1]");
  o.require(worst_pmf <= 1e-12, "m=1 pmf within 1e-12 of closed form");
  o.note("mass range [1-" + fmt(1.0 - min_mass) + ", 1-" + fmt(1.0 - max_mass) +
         "], max pmf error " + fmt(worst_pmf));
  return o;
}

Outcome criterion2() {
  Outcome o;
  const auto p = HeineParams::validate(std::vector{1.0}, std::vector{0.5});
  const double tele = std::abs(mgf(p, std::vector{std::log(2.0)}) - 3.0);
  o.require(tele <= 1e-12, "mgf(1, 0.5, ln 2) = 3 within 1e-12");
  double worst = 0.0;
  for (const auto& params : heine_grid()) {
    const CountLaw law = pmf_table(params, 1e-15);
    for (const auto& s : cube({-1.0, -0.5, 0.0, 0.5, 1.0}, params.m())) {
      const double want = mgf(params, s);
      worst = std::max(worst, std::abs(law.mgf(s) - want) / want);
    }
  }
  o.require(worst <= 1e-8, "mgf vs pmf within 1e-8");
  o.note("telescoping error " + fmt(tele) + ", max mgf/pmf relative gap " + fmt(worst));
  return o;
}

Outcome criterion3() {
  Outcome o;
  std::vector<Case1Limit> limits;
  const std::vector<std::vector<double>> rhos{{0.9, 0.7}, {0.7, 0.3}, {0.5, 0.45}, {0.9, 0.6, 0.3}};
  for (double v1 : {0.5, 1.0, 2.0}) {
    for (double v2 : {0.5, 1.0, 2.0}) {
      for (const auto& r : rhos) {
        std::vector<double> v(r.size(), v2);
        v[0] = v1;
        limits.push_back(manual_case1(v, r));
      }
    }
  }
  for (const auto& c : {case1_config()}) {
    const RadialPotential pot = build_potential(c);
    limits.push_back(case1(*pot.declared(), pot));
  }
  double series_gap = 0.0, table_gap = 0.0, max_cov = -1.0;
  for (const auto& lim : limits) {
    const Moments mo = case1_moments(lim);
    const auto mean = mean_vector(lim.params);
    const auto var = variance_vector(lim.params);
    const CountLaw law = pmf_table(lim.params, 1e-14);
    const auto tmean = law.mean();
    const auto tcov = law.covariance_matrix();
    for (int p = 0; p < lim.m; ++p) {
      series_gap = std::max({series_gap, std::abs(mo.mean[p] - mean[p]) / mean[p],
                             std::abs(mo.variance[p] - var[p]) / var[p]});
      table_gap = std::max({table_gap, std::abs(mo.mean[p] - tmean[p]),
                            std::abs(mo.variance[p] - tcov[p][p])});
      for (int q = 0; q < lim.m; ++q) {
        if (q == p) continue;
        const double c = covariance(lim.params, p, q);
        series_gap = std::max(series_gap, std::abs(mo.covariance[p][q] - c) / std::abs(c));
        table_gap = std::max(table_gap, std::abs(mo.covariance[p][q] - tcov[p][q]));
        max_cov = std::max({max_cov, mo.covariance[p][q], c});
      }
    }
  }
  o.require(series_gap <= 1e-12, "series vs heine moments within 1e-12");
  o.require(table_gap <= 1e-8, "series vs pmf_table moments within 1e-8");
  o.require(max_cov < 0.0, "all pairwise covariances negative");
  o.note(std::to_string(limits.size()) + " parameter sets, series gap " + fmt(series_gap) +
         ", table gap " + fmt(table_gap) + ", largest covariance " + fmt(max_cov));
  return o;
}

Outcome criterion4() {
  Outcome o;
  const RadialPotential g = ginibre();
  double ginibre_err = 0.0;
  QuadratureConfig full;
  full.mode = QuadMode::full;
  full.threads = case1_config().quad.threads;
  for (int n : {64, 256, 1024}) {
    for (auto mode : {QuadMode::windowed, QuadMode::full}) {
      QuadratureConfig cfg = full;
      cfg.mode = mode;
      const FiniteNEngine e(g, n, cfg);
      for (int j = 0; j < n; ++j) {
        const double want = std::lgamma(j + 1.0) - (j + 1.0) * std::log(static_cast<double>(n));
        ginibre_err = std::max(ginibre_err, std::abs(e.log_norm(j) - want) / std::abs(want));
      }
    }
  }
  o.require(ginibre_err <= 1e-10, "Ginibre log_norm within 1e-10 relative");

  double mode_gap = 0.0;
  for (const auto& c : {case1_config(), case2_config()}) {
    const RadialPotential pot = build_potential(c);
    const DropletData& data = *pot.declared();
    for (int n : {128, 512}) {
      const StatisticSet st = statistics_for(c, data, n);
      QuadratureConfig wcfg = full;
      wcfg.mode = QuadMode::windowed;
      const FiniteNEngine ew(pot, n, wcfg), ef(pot, n, full);
      std::vector<double> s(st.smooth.size(), 0.7);
      s[0] = -0.9;
      for (int j = 0; j < n; ++j) {
        mode_gap = std::max(mode_gap, std::abs(std::expm1(ew.log_norm(j) - ef.log_norm(j))));
        mode_gap = std::max(mode_gap, std::abs(std::expm1(ew.log_norm(j, s, st.smooth) -
                                                          ef.log_norm(j, s, st.smooth))));
      }
      mode_gap = std::max(mode_gap, std::abs(ew.joint_mgf(s, st.smooth).value /
                                                 ef.joint_mgf(s, st.smooth).value - 1.0));
      const CountLaw lw = ew.exact_count_law(st.hard, c.cap);
      const CountLaw lf = ef.exact_count_law(st.hard, c.cap);
      mode_gap = std::max(mode_gap, tv_distance(lw, lf).lower);
    }
  }
  o.require(mode_gap <= 1e-8, "windowed vs full within 1e-8");
  o.note("Ginibre max relative error " + fmt(ginibre_err) + ", windowed/full max gap " +
         fmt(mode_gap));
  return o;
}

Outcome criterion5() {
  Outcome o;
  const ConvergenceReport r = converge(case1_config());
  std::vector<double> tv, mgf_err;
  for (const auto& row : r.rows) {
    tv.push_back(row.tv.upper);
    mgf_err.push_back(row.mgf_err_max);
  }
  o.require(strictly_decreasing(tv), "tv_hi strictly decreasing");
  o.require(tv.back() <= tv.front() / 3.0, "tv_hi(512) <= tv_hi(64)/3");
  o.require(tv.back() <= 0.1, "tv_hi(512) <= 0.1");
  o.require(strictly_decreasing(mgf_err), "mgf error decreasing");
  o.require(mgf_err.back() <= 0.03, "final mgf error <= 3%");
  o.note("tv_hi " + fmt_list(tv) + ", mgf error " + fmt_list(mgf_err));
  return o;
}

Outcome criterion6() {
  Outcome o;
  const ExperimentConfig c = case2_config();
  const ConvergenceReport r = converge(c);
  const RadialPotential pot = build_potential(c);
  std::vector<double> tv, mgf_err;
  double recip = 0.0;
  for (const auto& row : r.rows) {
    tv.push_back(row.tv.upper);
    mgf_err.push_back(row.mgf_err_max);
    const Case2Limit lim = case2(*pot.declared(), pot, row.n);
    recip = std::max(recip, std::abs(lim.hat_vartheta[lim.m] * lim.tilde_vartheta[0] - 1.0));
  }
  o.require(strictly_decreasing(tv), "tv_hi decreasing");
  o.require(tv.back() <= 0.15, "final tv_hi <= 0.15");
  o.require(mgf_err.back() <= 0.05, "final mgf error <= 5%");
  o.require(recip <= 1e-12, "reciprocity within 1e-12");
  o.note("tv_hi " + fmt_list(tv) + ", mgf error " + fmt_list(mgf_err) +
         ", reciprocity error " + fmt(recip));
  return o;
}

Outcome criterion7() {
  Outcome o;
  constexpr int reps = 100000;
  constexpr int n = 128;
  const ExperimentConfig c = case1_config();
  const RadialPotential pot = build_potential(c);
  const StatisticSet st = statistics_for(c, *pot.declared(), n);
  const CountLaw exact = exact_count_law(pot, n, st.hard, c.cap, c.quad);
  const ModuliSampler sampler(pot, n, c.quad);

  std::map<MultiIndex, int> hist;
  const int m = st.hard.size();
  std::vector<double> sums(m, 0.0);
  for (int rep = 0; rep < reps; ++rep) {
    const ModuliSample s = sampler.sample(20261016ULL + rep);
    const MultiIndex counts = count_regions(st.hard, s.radii);
    ++hist[counts];
    for (int k = 0; k < m; ++k) sums[k] += counts[k];
  }
  double worst_z = 0.0;
  int cells = 0;
  for (const auto& e : exact.entries()) {
    if (e.p < 1e-3) continue;
    ++cells;
    const auto it = hist.find(e.alpha);
    const double phat = it == hist.end() ? 0.0 : static_cast<double>(it->second) / reps;
    worst_z = std::max(worst_z, std::abs(phat - e.p) / std::sqrt(e.p * (1.0 - e.p) / reps));
  }
  const auto mean = exact.mean();
  const auto cov = exact.covariance_matrix();
  double worst_mean_z = 0.0;
  for (int k = 0; k < m; ++k) {
    worst_mean_z = std::max(worst_mean_z,
                            std::abs(sums[k] / reps - mean[k]) / std::sqrt(cov[k][k] / reps));
  }
  o.require(worst_z <= 5.0, "cells within 5 standard errors");
  o.require(worst_mean_z <= 4.0, "means within 4 sigma");
  o.note(std::to_string(cells) + " cells with p >= 1e-3, max |z| " + fmt(worst_z) +
         ", max mean |z| " + fmt(worst_mean_z));
  return o;
}

Outcome criterion8() {
  Outcome o;
  const ExperimentConfig c = case2_config();
  const RadialPotential pot = build_potential(c);
  double worst = 0.0, worst_table = 0.0, cross = 0.0;
  for (int n : c.n) {
    const Case2Limit lim = case2(*pot.declared(), pot, n);
    const CountLaw law = case2_predicted_law(lim, 1e-14);
    for (const auto& s : cube(c.s_values, lim.m + 1)) {
      std::vector<double> sh(lim.m + 1);
      for (int k = 0; k < lim.m; ++k) sh[k] = s[k + 1];
      sh[lim.m] = s[0];
      const double product = mgf(lim.tilde, s) * mgf(lim.hat, sh);
      worst = std::max(worst, std::abs(case2_predicted_mgf(lim, s) / product - 1.0));
      worst_table = std::max(worst_table, std::abs(law.mgf(s) / product - 1.0));
    }
    const Case2Moments mo = case2_moments(lim);
    for (const auto& row : mo.cross) {
      for (double v : row) cross = std::max(cross, std::abs(v));
    }
  }
  o.require(worst <= 1e-10, "predicted mgf equals the product within 1e-10");
  o.require(worst_table <= 1e-10, "combined law mgf equals the product within 1e-10");
  o.require(cross == 0.0, "mixed tilde/hat covariances zero");
  o.note("product gap " + fmt(worst) + ", combined-law gap " + fmt(worst_table) +
         ", max |cross covariance| " + fmt(cross));
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    double budget_seconds;  // 0: no limit
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, 1.0, criterion1},   {2, 1.0, criterion2},   {3, 5.0, criterion3},
      {4, 120.0, criterion4}, {5, 600.0, criterion5}, {6, 900.0, criterion6},
      {7, 300.0, criterion7}, {8, 0.0, criterion8}};
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.note(std::string("error: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0.0) o.require(secs < c.budget_seconds, "runtime under " + fmt(c.budget_seconds) + " s");
    std::printf("criterion %d: %s  %s  [%.2f s]\n", c.id, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
