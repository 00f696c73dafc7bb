#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "doctest.h"
#include "outpost/error.hpp"
#include "outpost/finite_n.hpp"

using namespace outpost;

namespace {

double ginibre_log_norm(int j, int n) { return std::lgamma(j + 1.0) - (j + 1.0) * std::log(n); }

// P(|z_j| <= r) for Ginibre: |z_j|^2 ~ Gamma(j + 1, rate n).
double ginibre_cdf(int j, int n, double r) {
  return boost::math::gamma_p(j + 1.0, n * r * r);
}

const std::vector<double> kT1{1.5, 2.0}, kW1{0.2, 0.2};

}  // namespace

TEST_CASE("Ginibre log_norm closed form") {
  for (QuadMode mode : {QuadMode::windowed, QuadMode::full}) {
    QuadratureConfig cfg;
    cfg.mode = mode;
    for (int n : {1, 7, 64}) {
      const FiniteNEngine e(ginibre(), n, cfg);
      for (int j = 0; j < n; ++j) {
        const double want = ginibre_log_norm(j, n);
        CHECK(std::abs(e.log_norm(j) - want) <= 1e-10 * std::max(1.0, std::abs(want)));
      }
    }
  }
  CHECK_THROWS_AS(FiniteNEngine(ginibre(), 8).log_norm(8), InvalidArgument);
}

TEST_CASE("statistics that vanish on the domain leave log_norm unchanged") {
  const FiniteNEngine e(ginibre(), 32);
  const std::vector<BumpSpec> far{{2.9, 0.05}};
  const auto stats = RegionSet::smooth(far);
  const std::vector<double> s{1.7};
  for (int j : {0, 10, 31}) {
    CHECK(e.log_norm(j, s, stats) == doctest::Approx(e.log_norm(j)).epsilon(1e-13));
  }
}

TEST_CASE("windowed and full agree on the case-1 potential") {
  const auto pot = build_case1(kT1, kW1);
  QuadratureConfig cfg;
  cfg.mode = QuadMode::both;
  const int n = 256;
  const FiniteNEngine e(pot, n, cfg);
  const std::vector<BumpSpec> bumps{{1.5, 0.1}, {2.0, 0.1}};
  const auto stats = RegionSet::smooth(bumps);
  const std::vector<double> s{0.5, -0.5};
  CHECK(std::isfinite(e.log_norm(n - 1, s, stats)));
  // Both peaks at the top index are significant.
  const auto w = e.windows(n - 1);
  REQUIRE(w.size() >= 1);
  CHECK(w.front().lo < 1.0);
  CHECK(w.back().hi > 2.0);
}

TEST_CASE("joint_mgf") {
  const auto pot = build_case1(std::vector{1.5}, std::vector{0.2});
  const int n = 64;
  const FiniteNEngine e(pot, n);
  const std::vector<BumpSpec> b{{1.5, 0.1}};
  const auto stats = RegionSet::smooth(b);
  const std::vector<double> zero{0.0};
  CHECK(e.joint_mgf(zero, stats).value == 1.0);
  double prev = 0.0;
  for (double s = -4.0; s <= 4.0; s += 0.5) {
    const std::vector<double> sv{s};
    const double v = e.joint_mgf(sv, stats).value;
    CHECK(v >= prev);
    prev = v;
  }
  const std::vector<double> big{std::log(64.0) + 0.1};
  CHECK_THROWS_AS(e.joint_mgf(big, stats), InvalidArgument);
  const std::vector<double> two{0.1, 0.2};
  CHECK_THROWS_AS(e.joint_mgf(two, stats), InvalidArgument);

  // Restricting to the leading indices loses only a small remainder.
  DropletData d{{{0.0, 1.0}}, {1.5}, {1.0}, CaseTag::case1};
  const auto lead = leading_indices(d, n, 10.0);
  const std::vector<double> s1{1.0};
  const auto full = e.joint_mgf(s1, stats);
  const auto part = e.joint_mgf(s1, stats, lead);
  CHECK(part.log_value + part.neglected_log == doctest::Approx(full.log_value).epsilon(1e-12));
  CHECK(std::abs(part.neglected_log) < 1e-6);
}

TEST_CASE("region probabilities") {
  const auto g = ginibre();
  const FiniteNEngine e4(g, 4);
  const std::vector<Interval> disk{{0.0, 1.0}};
  const auto p = e4.region_probabilities(0, RegionSet::hard(disk));
  REQUIRE(p.size() == 1);
  CHECK(p[0] == doctest::Approx(1.0 - std::exp(-4.0)).epsilon(1e-12));

  const std::vector<Interval> all{{0.0, g.r_max()}};
  const FiniteNEngine e(g, 50);
  for (int j : {0, 25, 49}) {
    CHECK(std::abs(e.region_probabilities(j, RegionSet::hard(all))[0] - 1.0) <= 1e-12);
  }
  CHECK(e.region_probabilities(3, RegionSet{}).empty());

  const std::vector<Interval> rings{{0.5, 0.8}, {0.9, 1.1}};
  for (int j : {0, 10, 30, 49}) {
    const auto pr = e.region_probabilities(j, RegionSet::hard(rings));
    CHECK(pr[0] == doctest::Approx(ginibre_cdf(j, 50, 0.8) - ginibre_cdf(j, 50, 0.5))
                       .epsilon(1e-10));
    CHECK(pr[1] == doctest::Approx(ginibre_cdf(j, 50, 1.1) - ginibre_cdf(j, 50, 0.9))
                       .epsilon(1e-10));
  }
  const std::vector<BumpSpec> b{{1.0, 0.1}};
  CHECK_THROWS_AS(e.region_probabilities(0, RegionSet::smooth(b)), InvalidArgument);
  const std::vector<Interval> overlap{{0.5, 0.8}, {0.7, 1.1}};
  CHECK_THROWS_AS(RegionSet::hard(overlap), InvalidArgument);
}

TEST_CASE("exact count law") {
  const auto g = ginibre();
  const int n = 40;
  const FiniteNEngine e(g, n);
  SUBCASE("whole range is a point mass at n") {
    const std::vector<Interval> all{{0.0, g.r_max()}};
    const auto law = e.exact_count_law(RegionSet::hard(all), n);
    CHECK(law.probability(std::vector{n}) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("empty regions give the zero vector") {
    const std::vector<Interval> far{{2.5, 2.7}, {2.8, 2.9}};
    const auto law = e.exact_count_law(RegionSet::hard(far), 5);
    CHECK(law.probability(std::vector{0, 0}) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("Poisson-binomial structure") {
    const std::vector<Interval> rings{{0.6, 0.8}, {0.9, 1.05}};
    const auto rs = RegionSet::hard(rings);
    const auto law = e.exact_count_law(rs, n);
    CHECK(law.total_mass() + law.mass_deficit() == doctest::Approx(1.0).epsilon(1e-12));
    // Means are sums of per-index probabilities; marginals match a 1-D DP.
    std::vector<double> mean(2, 0.0);
    std::vector<double> dp{1.0};
    for (int j = 0; j < n; ++j) {
      const auto pr = e.region_probabilities(j, rs);
      mean[0] += pr[0];
      mean[1] += pr[1];
      std::vector<double> next(dp.size() + 1, 0.0);
      for (std::size_t k = 0; k < dp.size(); ++k) {
        next[k] += dp[k] * (1.0 - pr[1]);
        next[k + 1] += dp[k] * pr[1];
      }
      dp = next;
    }
    const auto mu = law.mean();
    CHECK(mu[0] == doctest::Approx(mean[0]).epsilon(1e-10));
    CHECK(mu[1] == doctest::Approx(mean[1]).epsilon(1e-10));
    const auto marg = law.marginal(1);
    for (int k = 0; k < 12; ++k) {
      CHECK(std::abs(marg.probability(std::vector{k}) - dp[k]) <= 1e-12);
    }
  }
  SUBCASE("cap overflow goes to the deficit") {
    const std::vector<Interval> disk{{0.0, 0.9}};
    const auto law = e.exact_count_law(RegionSet::hard(disk), 10);
    CHECK(law.mass_deficit() > 0.5);
    CHECK(law.total_mass() + law.mass_deficit() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("case-2 displacement coordinate") {
  const auto pot = build_case2({0.0, 1.0}, {1.6, 2.2}, 0.5, std::vector{1.2, 1.4},
                               std::vector{0.06, 0.06});
  const auto d = *pot.declared();
  CHECK(default_eps(d) == doctest::Approx(0.04));
  const int n = 64;
  const auto hard = outpost_regions(d, default_eps(d), n, false);
  REQUIRE(hard.size() == 3);
  CHECK(hard.stats()[0].split == 32);
  CHECK(hard.stats()[0].shape(31)(1.55) == 1.0);
  CHECK(hard.stats()[0].shape(31)(1.05) == 0.0);
  CHECK(hard.stats()[0].shape(32)(1.05) == 1.0);
  CHECK(hard.stats()[0].shape(32)(1.55) == 0.0);
  const auto smooth = outpost_regions(d, default_eps(d), n, true);
  CHECK(smooth.stats()[0].shape(31)(1.56) == 1.0);
  CHECK(smooth.stats()[0].shape(31)(1.44) == 0.0);
  CHECK(smooth.stats()[0].shape(40)(1.04) == 1.0);
  CHECK(smooth.stats()[0].shape(40)(1.16) == 0.0);
  const auto lead = leading_indices(d, n, 10.0);
  REQUIRE(lead.size() == 1);
  CHECK(lead[0].lo == 0);
  CHECK(lead[0].hi == 64);

  const FiniteNEngine e(pot, n);
  const auto law = e.exact_count_law(hard, 20);
  CHECK(law.total_mass() + law.mass_deficit() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(law.mass_deficit() < 1e-10);
}

TEST_CASE("moduli sampler") {
  const auto g = ginibre();
  const int n = 16;
  const ModuliSampler ms(g, n);
  // Quantiles against the Gamma inverse CDF.
  for (int j : {0, 5, 15}) {
    for (double u : {1e-6, 0.01, 0.3, 0.5, 0.77, 0.999, 1 - 1e-7}) {
      const double want = std::sqrt(boost::math::gamma_p_inv(j + 1.0, u) / n);
      CHECK(ms.quantile(j, u) == doctest::Approx(want).epsilon(1e-8));
    }
  }
  const auto a = ms.sample(11), b = ms.sample(11), c = ms.sample(12);
  CHECK(a.radii == b.radii);
  CHECK(a.radii != c.radii);
  CHECK(sample_moduli(g, n, 11).radii == a.radii);

  // Mean of r_j^2 is (j + 1) / n; variance (j + 1) / n^2.
  const int reps = 20000;
  std::vector<double> sum(n, 0.0);
  for (int r = 0; r < reps; ++r) {
    const auto s = ms.sample(1000 + r);
    for (int j = 0; j < n; ++j) sum[j] += s.radii[j] * s.radii[j];
  }
  for (int j = 0; j < n; ++j) {
    const double se = std::sqrt((j + 1.0) / (n * n) / reps);
    CHECK(std::abs(sum[j] / reps - (j + 1.0) / n) <= 4.0 * se);
  }

  std::ostringstream os;
  write_moduli_csv(os, ms.sample(3));
  const std::string csv = os.str();
  CHECK(csv.rfind("j,r\n0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == n + 1);
}

TEST_CASE("sampled region frequencies match region probabilities") {
  const auto pot = build_case1(kT1, kW1);
  const int n = 48;
  const FiniteNEngine e(pot, n);
  const ModuliSampler ms(pot, n);
  const std::vector<Interval> iv{{1.4, 1.6}, {1.9, 2.1}};
  const auto rs = RegionSet::hard(iv);
  const int reps = 20000;
  std::vector<double> hits(2, 0.0);
  for (int r = 0; r < reps; ++r) {
    const auto s = ms.sample(77 + r);
    const auto c = count_regions(rs, s.radii);
    hits[0] += c[0];
    hits[1] += c[1];
  }
  const auto law = e.exact_count_law(rs, n);
  const auto mu = law.mean();
  const auto cov = law.covariance_matrix();
  for (int k = 0; k < 2; ++k) {
    const double se = std::sqrt(cov[k][k] / reps);
    CHECK(std::abs(hits[k] / reps - mu[k]) <= 5.0 * se);
  }
}

TEST_CASE("thread count does not change results") {
  const auto pot = build_case1(kT1, kW1);
  QuadratureConfig one, three;
  three.threads = 3;
  const FiniteNEngine a(pot, 64, one), b(pot, 64, three);
  const std::vector<BumpSpec> bumps{{1.5, 0.1}, {2.0, 0.1}};
  const auto stats = RegionSet::smooth(bumps);
  const std::vector<double> s{0.3, -0.7};
  CHECK(a.joint_mgf(s, stats).value == b.joint_mgf(s, stats).value);
  const std::vector<Interval> iv{{1.4, 1.6}, {1.9, 2.1}};
  const auto la = a.exact_count_law(RegionSet::hard(iv), 10);
  const auto lb = b.exact_count_law(RegionSet::hard(iv), 10);
  REQUIRE(la.entries().size() == lb.entries().size());
  for (std::size_t i = 0; i < la.entries().size(); ++i) {
    CHECK(la.entries()[i].p == lb.entries()[i].p);
  }
  CHECK(ModuliSampler(pot, 64, one).sample(5).radii ==
        ModuliSampler(pot, 64, three).sample(5).radii);
}

TEST_CASE("quadrature config validation") {
  QuadratureConfig c;
  c.C = 0.5;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  CHECK(parse_quad_mode("both") == QuadMode::both);
  CHECK_THROWS_AS(parse_quad_mode("fast"), InvalidArgument);
}
