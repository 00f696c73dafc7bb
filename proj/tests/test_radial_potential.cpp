#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "outpost/error.hpp"
#include "outpost/radial_potential.hpp"

using namespace outpost;

namespace {

const std::vector<double> kT1{1.5, 2.0}, kW1{0.2, 0.2};
const std::vector<double> kT2{1.2, 1.4}, kW2{0.06, 0.06};

RadialPotential case1_example() { return build_case1(kT1, kW1); }
RadialPotential case2_example() {
  return build_case2({0.0, 1.0}, {1.6, 2.2}, 0.5, kT2, kW2);
}

// Independent 5-point stencils on q alone.
double fd1(const RadialPotential& p, double r, double h) {
  return (p.q(r - 2 * h) - 8 * p.q(r - h) + 8 * p.q(r + h) - p.q(r + 2 * h)) / (12 * h);
}
double fd2(const RadialPotential& p, double r, double h) {
  return (-p.q(r - 2 * h) + 16 * p.q(r - h) - 30 * p.q(r) + 16 * p.q(r + h) -
          p.q(r + 2 * h)) / (12 * h * h);
}

}  // namespace

TEST_CASE("laplacian and g_tau on Ginibre") {
  const auto g = ginibre();
  CHECK(laplacian(g, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(laplacian(g, 0.37) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(laplacian(g, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(laplacian(g, -0.5), InvalidArgument);
  CHECK(g_tau(g, 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  // Stationarity 2r - 2/r = 0 at r = 1.
  const auto pa = find_peaks(g, 1.0, {0.0, 3.0}, 100, 10.0);
  REQUIRE(pa.peaks.size() == 1);
  CHECK(pa.peaks[0].r == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pa.peaks[0].significant);
  CHECK(pa.b_tau == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(pa.delta_n == doctest::Approx(10.0 * std::log(100.0) / 100.0));

  const auto q = find_peaks(g, 0.25, {0.0, 3.0}, 100, 10.0);
  REQUIRE(q.peaks.size() == 1);
  CHECK(q.peaks[0].r == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(q.peaks[0].r * g.dq(q.peaks[0].r) - 0.5) <= 1e-10);
}

TEST_CASE("case-1 builder: touch curvature and coincidence") {
  const auto p = case1_example();
  for (std::size_t k = 0; k < kT1.size(); ++k) {
    const double t = kT1[k], w = kW1[k];
    const double analytic = (t * t - 1.0 - 2.0 * std::log(t)) / (2.0 * w * w);
    const double fd = (fd2(p, t, 1e-3) + fd1(p, t, 1e-4) / t) / 4.0;
    CHECK(laplacian(p, t) == doctest::Approx(analytic).epsilon(1e-10));
    CHECK(fd == doctest::Approx(analytic).epsilon(1e-6));
    CHECK(std::abs(g_tau(p, 1.0, t) - 1.0) <= 1e-10);
    CHECK(std::abs(t * p.dq(t) - 2.0) <= 1e-8);
  }
  CHECK(laplacian(p, 1.5) == doctest::Approx(5.488).epsilon(1e-3));
  // Ginibre outside (1, 3).
  CHECK(p.q(0.5) == 0.25);
  CHECK(p.q(3.5) == 12.25);
  // Between Qc and Q_g on (1, 3).
  for (double r = 1.01; r < 3.0; r += 0.01) {
    CHECK(p.q(r) >= 1.0 + 2.0 * std::log(r) - 1e-14);
    CHECK(p.q(r) <= r * r + 1e-14);
  }
}

TEST_CASE("case-1 peaks at tau = 1") {
  const auto p = case1_example();
  const auto pa = find_peaks(p, 1.0, {0.0, p.r_max()}, 100, 10.0);
  REQUIRE(pa.peaks.size() == 3);
  const double expect[] = {1.0, 1.5, 2.0};
  for (int i = 0; i < 3; ++i) {
    CHECK(pa.peaks[i].r == doctest::Approx(expect[i]).epsilon(1e-10));
    CHECK(pa.peaks[i].significant);
    CHECK(pa.peaks[i].curvature > 0.0);
    CHECK(std::abs(pa.peaks[i].g - pa.peaks[0].g) <= 1e-10);
    CHECK(std::abs(pa.peaks[i].r * p.dq(pa.peaks[i].r) - 2.0) <= 1e-10);
  }
}

TEST_CASE("case-1 builder preconditions") {
  CHECK_THROWS_WITH_AS(build_case1(std::vector{1.5, 1.7}, std::vector{0.2, 0.2}),
                       "window overlap", InvalidArgument);
  CHECK_THROWS_WITH_AS(build_case1(std::vector{0.9}, std::vector{0.05}),
                       "outpost not in (1,3)", InvalidArgument);
  CHECK_THROWS_WITH_AS(build_case1(std::vector{1.1}, std::vector{0.1}),
                       "window touching {1,3}", InvalidArgument);
  CHECK_THROWS_AS(build_case1(std::vector{1.5}, std::vector{-0.1}), InvalidArgument);
  CHECK_THROWS_AS(build_case1(std::vector{1.5, 2.0}, std::vector{0.1}), InvalidArgument);
}

TEST_CASE("classify reproduces builder data") {
  SUBCASE("Ginibre") {
    const auto d = classify(ginibre());
    REQUIRE(d.components.size() == 1);
    CHECK(d.components[0].lo == doctest::Approx(0.0));
    CHECK(d.components[0].hi == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(d.outposts.empty());
    CHECK(d.masses[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(d.case_tag == CaseTag::other);
  }
  SUBCASE("case 1") {
    const auto d = classify(case1_example());
    CHECK(d.case_tag == CaseTag::case1);
    REQUIRE(d.outposts.size() == 2);
    CHECK(std::abs(d.outposts[0] - 1.5) <= 1e-8);
    CHECK(std::abs(d.outposts[1] - 2.0) <= 1e-8);
    CHECK(std::abs(d.components[0].hi - 1.0) <= 1e-8);
    CHECK(std::abs(d.masses[0] - 1.0) <= 1e-8);
  }
  SUBCASE("case 2") {
    const auto p = case2_example();
    const auto d = classify(p);
    CHECK(d.case_tag == CaseTag::case2);
    REQUIRE(d.components.size() == 2);
    CHECK(std::abs(d.components[0].lo - 0.0) <= 1e-6);
    CHECK(std::abs(d.components[0].hi - 1.0) <= 1e-6);
    CHECK(std::abs(d.components[1].lo - 1.6) <= 1e-6);
    CHECK(std::abs(d.components[1].hi - 2.2) <= 1e-6);
    REQUIRE(d.outposts.size() == 2);
    CHECK(std::abs(d.outposts[0] - 1.2) <= 1e-6);
    CHECK(std::abs(d.outposts[1] - 1.4) <= 1e-6);
    CHECK(std::abs(d.masses[0] - 0.5) <= 1e-8);
    CHECK(std::abs(d.masses[1] - 1.0) <= 1e-8);
    // Mass as r q'(r) / 2 at the outer edge of each component.
    CHECK(1.0 * p.dq(1.0) / 2.0 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(2.2 * p.dq(2.2) / 2.0 == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("case-2 builder: matching and curvature") {
  const auto p = case2_example();
  CHECK(std::abs(p.dq(1.0 - 1e-12) - 2.0 * 0.5 / 1.0) <= 1e-10);
  CHECK(std::abs(p.dq(1.6 + 1e-12) - 2.0 * 0.5 / 1.6) <= 1e-10);
  CHECK(laplacian(p, 0.5) == doctest::Approx(0.5));
  CHECK(laplacian(p, 2.0) == doctest::Approx(0.5 / (2.2 * 2.2 - 1.6 * 1.6)));
  for (double t : kT2) {
    CHECK(laplacian(p, t) > 0.0);
    CHECK(std::abs(t * p.dq(t) - 1.0) <= 1e-8);
    const double fd = (fd2(p, t, 1e-4) + fd1(p, t, 1e-4) / t) / 4.0;
    CHECK(fd == doctest::Approx(laplacian(p, t)).epsilon(1e-5));
  }
  // Derivatives agree with stencils through the gap.
  for (double r = 1.01; r < 1.6; r += 0.013) {
    const double h = 1e-5;
    const double d2 = (p.dq(r - 2 * h) - 8 * p.dq(r - h) + 8 * p.dq(r + h) -
                       p.dq(r + 2 * h)) / (12 * h);
    CHECK(fd1(p, r, h) == doctest::Approx(p.dq(r)).epsilon(1e-8));
    CHECK(d2 == doctest::Approx(p.ddq(r)).epsilon(1e-8));
  }
  CHECK_THROWS_WITH_AS(build_case2({0.0, 1.0}, {1.6, 2.2}, 0.5, std::vector{1.05},
                                   std::vector{0.1}),
                       "window touches component", InvalidArgument);
  CHECK_THROWS_AS(build_case2({0.0, 1.0}, {0.9, 2.2}, 0.5, kT2, kW2), InvalidArgument);
  CHECK_THROWS_AS(build_case2({0.0, 1.0}, {1.6, 2.2}, 1.5, kT2, kW2), InvalidArgument);
}

TEST_CASE("case-2 with an annular inner component") {
  const auto p = build_case2({0.3, 1.0}, {1.6, 2.2}, 0.4, std::vector{1.3},
                             std::vector{0.08});
  const auto d = classify(p);
  CHECK(d.case_tag == CaseTag::case2);
  CHECK(std::abs(d.components[0].lo - 0.3) <= 1e-6);
  CHECK(std::abs(d.masses[0] - 0.4) <= 1e-8);
}

TEST_CASE("validator passes on built potentials") {
  for (const auto& p : {ginibre(), case1_example(), case2_example()}) {
    for (const auto& c : validate_potential(p)) {
      INFO(p.label() << " " << c.name << ": " << c.detail);
      CHECK(c.passed);
    }
  }
}

TEST_CASE("obstacle function") {
  const auto g = ginibre();
  const auto d = classify(g);
  CHECK(obstacle(g, d, 0.5) == doctest::Approx(0.25));
  CHECK(obstacle(g, d, 2.0) == doctest::Approx(1.0 + 2.0 * std::log(2.0)));
  const auto p = case2_example();
  const auto d2 = *p.declared();
  CHECK(obstacle(p, d2, 1.3) == doctest::Approx(0.5 + std::log(1.3)));
}

TEST_CASE("bump plateau and support") {
  const BumpSpec b{1.5, 0.1};
  CHECK(bump(b, 1.5) == 1.0);
  CHECK(bump(b, 1.6) == 0.0);
  CHECK(bump(b, 1.45) == 1.0);
  for (int i = 0; i <= 20000; ++i) {
    const double r = 1.3 + 0.4 * i / 20000.0;
    const double h = bump(b, r);
    CHECK(h >= 0.0);
    CHECK(h <= 1.0);
    if (std::abs(r - 1.5) <= 0.05) CHECK(h == 1.0);
    if (std::abs(r - 1.5) >= 0.1) CHECK(h == 0.0);
  }
  CHECK(smooth_step(0.5) == doctest::Approx(0.5));
  CHECK(smooth_step(0.2) + smooth_step(0.8) == doctest::Approx(1.0));
}

TEST_CASE("window bump derivatives") {
  for (double u = -0.95; u < 0.96; u += 0.05) {
    const double h = 1e-5;
    const Jet j = window_bump(u);
    const double d1 = (window_bump(u + h).value - window_bump(u - h).value) / (2 * h);
    const double d2 = (window_bump(u + h).d1 - window_bump(u - h).d1) / (2 * h);
    CHECK(j.d1 == doctest::Approx(d1).epsilon(1e-6));
    CHECK(j.d2 == doctest::Approx(d2).epsilon(1e-6));
  }
  CHECK(window_bump(0.0).value == 1.0);
  CHECK(window_bump(1.0).value == 0.0);
}

TEST_CASE("droplet data JSON") {
  const auto d = *case2_example().declared();
  const nlohmann::json j = d;
  CHECK(j["case_tag"] == "case2");
  CHECK(j["components"][1][0] == 1.6);
  CHECK(j["outposts"].size() == 2);
  CHECK(j["masses"][0] == 0.5);
}
