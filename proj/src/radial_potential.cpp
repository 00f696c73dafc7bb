#include "outpost/radial_potential.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <nlohmann/json.hpp>

#include "outpost/error.hpp"

namespace outpost {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double eta(double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; }

// eta-hat with first and second derivatives.
Jet smooth_step_jet(double u) {
  if (u <= 0.0) return {0.0, 0.0, 0.0};
  if (u >= 1.0) return {1.0, 0.0, 0.0};
  const double v = 1.0 - u;
  const double a = eta(u), b = eta(v);
  const double a1 = a / (u * u), a2 = a * (1.0 / (u * u * u * u) - 2.0 / (u * u * u));
  const double b1 = -b / (v * v), b2 = b * (1.0 / (v * v * v * v) - 2.0 / (v * v * v));
  const double d = a + b, d1 = a1 + b1;
  const double num = a1 * b - a * b1;
  const double num1 = a2 * b - a * b2;
  return {a / d, num / (d * d), num1 / (d * d) - 2.0 * num * d1 / (d * d * d)};
}

// sum_k zeta((r - t_k) / w_k) with r-derivatives.
Jet window_sum(double r, const std::vector<double>& t, const std::vector<double>& w) {
  Jet s;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const Jet z = window_bump((r - t[k]) / w[k]);
    s.value += z.value;
    s.d1 += z.d1 / w[k];
    s.d2 += z.d2 / (w[k] * w[k]);
  }
  return s;
}

// Qc + B (1 - S) where S is the window sum.
Jet touch_form(const Jet& qc, const Jet& barrier, const Jet& s) {
  const double W = 1.0 - s.value, W1 = -s.d1, W2 = -s.d2;
  return {qc.value + barrier.value * W,
          qc.d1 + barrier.d1 * W + barrier.value * W1,
          qc.d2 + barrier.d2 * W + 2.0 * barrier.d1 * W1 + barrier.value * W2};
}

class GinibreProfile : public RadialProfile {
 public:
  Jet eval(double r) const override { return {r * r, 2.0 * r, 2.0}; }
};

class Case1Profile : public RadialProfile {
 public:
  Case1Profile(std::vector<double> t, std::vector<double> w)
      : t_(std::move(t)), w_(std::move(w)) {}

  Jet eval(double r) const override {
    if (r <= 1.0 || r >= 3.0) return {r * r, 2.0 * r, 2.0};
    const Jet qc{1.0 + 2.0 * std::log(r), 2.0 / r, -2.0 / (r * r)};
    const Jet barrier{r * r - qc.value, 2.0 * r - qc.d1, 2.0 - qc.d2};
    return touch_form(qc, barrier, window_sum(r, t_, w_));
  }

 private:
  std::vector<double> t_, w_;
};

class Case2Profile : public RadialProfile {
 public:
  Case2Profile(Interval inner, Interval outer, double m0, std::vector<double> t,
               std::vector<double> w)
      : a0_(inner.lo), b0_(inner.hi), a1_(outer.lo), m0_(m0),
        t_(std::move(t)), w_(std::move(w)) {
    c0_ = m0 / (b0_ * b0_ - a0_ * a0_);
    c1_ = (1.0 - m0) / (outer.hi * outer.hi - a1_ * a1_);
    qb0_ = inner_jet(b0_).value;
    qa1_ = check_jet(a1_).value;
    const double gap = a1_ - b0_;
    s0_ = b0_ + 0.2 * gap;
    s1_ = a1_ - 0.2 * gap;
    edge_ = 0.1 * gap;
    lift_ = inner_jet(a1_).value - check_jet(a1_).value;
  }

  Jet eval(double r) const override {
    if (r <= b0_) return inner_jet(r);
    if (r >= a1_) return outer_jet(r);
    const Jet qc = check_jet(r);
    const Jet in = inner_jet(r), out = outer_jet(r);
    const Jet s = smooth_step_jet((r - s0_) / (s1_ - s0_));
    const double L = s1_ - s0_;
    const double S = s.value, S1 = s.d1 / L, S2 = s.d2 / (L * L);
    // Barrier blends the two extended component profiles above Qc.
    const double di = in.value - qc.value, di1 = in.d1 - qc.d1, di2 = in.d2 - qc.d2;
    const double dq = out.value - qc.value, dq1 = out.d1 - qc.d1, dq2 = out.d2 - qc.d2;
    // Plateau of height lift_ on [s0, s1], ramping up and down over edge_.
    const Jet u = smooth_step_jet((r - s0_ + edge_) / edge_);
    const Jet v = smooth_step_jet((s1_ + edge_ - r) / edge_);
    const double k = 1.0 / edge_;
    const Jet plateau{u.value * v.value, k * (u.d1 * v.value - u.value * v.d1),
                      k * k * (u.d2 * v.value - 2.0 * u.d1 * v.d1 + u.value * v.d2)};
    const Jet barrier{
        (1.0 - S) * di + S * dq + lift_ * plateau.value,
        (1.0 - S) * di1 + S * dq1 + S1 * (dq - di) + lift_ * plateau.d1,
        (1.0 - S) * di2 + S * dq2 + 2.0 * S1 * (dq1 - di1) + S2 * (dq - di) + lift_ * plateau.d2};
    return touch_form(qc, barrier, window_sum(r, t_, w_));
  }

 private:
  Jet inner_jet(double r) const {
    if (a0_ == 0.0) return {c0_ * r * r, 2.0 * c0_ * r, 2.0 * c0_};
    const double a2 = a0_ * a0_;
    return {c0_ * (r * r - a2) - 2.0 * c0_ * a2 * std::log(r / a0_),
            2.0 * c0_ * r - 2.0 * c0_ * a2 / r, 2.0 * c0_ + 2.0 * c0_ * a2 / (r * r)};
  }

  Jet check_jet(double r) const {
    return {qb0_ + 2.0 * m0_ * std::log(r / b0_), 2.0 * m0_ / r, -2.0 * m0_ / (r * r)};
  }

  Jet outer_jet(double r) const {
    const double k = m0_ - c1_ * a1_ * a1_;
    return {qa1_ + 2.0 * k * std::log(r / a1_) + c1_ * (r * r - a1_ * a1_),
            2.0 * k / r + 2.0 * c1_ * r, -2.0 * k / (r * r) + 2.0 * c1_};
  }

  double a0_, b0_, a1_, m0_;
  std::vector<double> t_, w_;
  double c0_ = 0, c1_ = 0, qb0_ = 0, qa1_ = 0, s0_ = 0, s1_ = 0, edge_ = 0, lift_ = 0;
};

void check_windows(std::vector<double>& t, std::vector<double>& w) {
  if (t.empty()) throw InvalidArgument("at least one outpost is required");
  if (t.size() != w.size()) throw InvalidArgument("t and w length mismatch");
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!std::isfinite(t[k]) || !std::isfinite(w[k])) {
      throw InvalidArgument("non-finite outpost parameter");
    }
    if (!(w[k] > 0.0)) throw InvalidArgument("window half-width must be positive");
  }
  std::vector<std::size_t> order(t.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return t[a] < t[b]; });
  std::vector<double> ts, ws;
  for (auto i : order) {
    ts.push_back(t[i]);
    ws.push_back(w[i]);
  }
  for (std::size_t k = 1; k < ts.size(); ++k) {
    if (ts[k - 1] + ws[k - 1] >= ts[k] - ws[k]) {
      throw InvalidArgument("window overlap");
    }
  }
  t = std::move(ts);
  w = std::move(ws);
}

void require_valid(const RadialPotential& pot) {
  for (const auto& c : validate_potential(pot)) {
    if (!c.passed) {
      throw NumericError("validator failure in " + c.name + ": " + c.detail);
    }
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

double integrate(const std::function<double(double)>& f, double a, double b) {
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 21>::integrate(f, a, b, 15, 1e-14);
}

// Local peak of g_tau closest to r.
const Peak* nearest_peak(const PeakAnalysis& pa, double r) {
  const Peak* best = nullptr;
  for (const auto& p : pa.peaks) {
    if (!best || std::abs(p.r - r) < std::abs(best->r - r)) best = &p;
  }
  return best;
}

const Peak* global_peak(const PeakAnalysis& pa) {
  const Peak* best = nullptr;
  for (const auto& p : pa.peaks) {
    if (!best || p.g < best->g) best = &p;
  }
  return best;
}

}  // namespace

const char* to_string(CaseTag tag) {
  switch (tag) {
    case CaseTag::case1: return "case1";
    case CaseTag::case2: return "case2";
    default: return "other";
  }
}

RadialPotential::RadialPotential(std::shared_ptr<const RadialProfile> profile,
                                 Interval smooth_window, double r_max,
                                 std::string label,
                                 std::optional<DropletData> declared,
                                 std::vector<double> junctions)
    : profile_(std::move(profile)), smooth_window_(smooth_window), r_max_(r_max),
      label_(std::move(label)), declared_(std::move(declared)),
      junctions_(std::move(junctions)) {
  if (!profile_) throw InvalidArgument("null radial profile");
  if (!(r_max_ > smooth_window_.lo) || !(smooth_window_.hi >= r_max_)) {
    throw InvalidArgument("r_max must lie inside the smooth window");
  }
}

double laplacian(const RadialPotential& pot, double r) {
  if (!pot.smooth_window().contains(r) || r < 0.0) {
    throw InvalidArgument("radius " + fmt(r) + " outside the smooth window");
  }
  const Jet j = pot.jet(r);
  if (r == 0.0) return j.d2 / 2.0;
  return (j.d2 + j.d1 / r) / 4.0;
}

double g_tau(const RadialPotential& pot, double tau, double r) {
  if (tau == 0.0) return pot.q(r);
  return pot.q(r) - 2.0 * tau * std::log(r);
}

PeakFinder::PeakFinder(const RadialPotential& pot, Interval interval,
                       double grid_per_unit)
    : pot_(pot), interval_(interval) {
  const auto& sw = pot.smooth_window();
  if (!(interval.lo < interval.hi) || interval.lo < sw.lo || interval.hi > sw.hi) {
    throw InvalidArgument("peak interval must be a nonempty subset of the smooth window");
  }
  if (!(grid_per_unit > 0.0)) throw InvalidArgument("grid density must be positive");
  const auto cells = static_cast<std::size_t>(std::ceil(interval.width() * grid_per_unit));
  const std::size_t n = std::max<std::size_t>(cells, 16) + 1;
  grid_.resize(n);
  rdq_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = i + 1 == n ? interval.hi
                                : interval.lo + interval.width() * i / (n - 1.0);
    grid_[i] = r;
    rdq_[i] = r * pot.dq(r);
  }
}

PeakAnalysis PeakFinder::analyze(double tau, int n, double C) const {
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidArgument("tau must lie in [0, 1]");
  if (n < 2) throw InvalidArgument("n must be at least 2");
  if (!(C >= 0.0)) throw InvalidArgument("C must be nonnegative");

  PeakAnalysis pa;
  pa.tau = tau;
  pa.delta_n = C * std::log(static_cast<double>(n)) / n;
  const auto f = [&](std::size_t i) { return rdq_[i] - 2.0 * tau; };
  const std::size_t N = grid_.size();

  const auto h = [&](double r) { return r * pot_.dq(r) - 2.0 * tau; };
  std::vector<std::pair<double, double>> brackets;
  for (std::size_t i = 0; i + 1 < N; ++i) {
    // A near-tangency between grid points may hide a pair of roots; rescan
    // the neighbourhood on a fine grid.
    if (i > 0) {
      const double fm = f(i - 1), f0 = f(i), fp = f(i + 1);
      const double curv = fp - 2.0 * f0 + fm;
      if ((f0 > 0.0 && fm > f0 && fp > f0) || (f0 < 0.0 && fm < f0 && fp < f0)) {
        const double ext = f0 - (fp - fm) * (fp - fm) / (8.0 * curv);
        if ((f0 > 0.0) != (ext > 0.0)) {
          const int fine = 4096;
          const double a = grid_[i - 1], w = grid_[i + 1] - a;
          double prev = fm;
          for (int k = 1; k <= fine; ++k) {
            const double r0 = a + w * (k - 1) / fine, r1 = k == fine ? grid_[i + 1] : a + w * k / fine;
            const double cur = k == fine ? fp : h(r1);
            if (prev < 0.0 && cur >= 0.0) brackets.push_back({r0, r1});
            prev = cur;
          }
        }
      }
    }
    if (f(i) < 0.0 && f(i + 1) >= 0.0) brackets.push_back({grid_[i], grid_[i + 1]});
  }
  std::sort(brackets.begin(), brackets.end());
  for (auto [lo, hi] : brackets) {
    while (hi - lo > 1e-12 * std::max(1.0, lo)) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (h(mid) < 0.0) lo = mid; else hi = mid;
    }
    const double r = std::abs(h(lo)) < std::abs(h(hi)) ? lo : hi;
    if (!pa.peaks.empty() && std::abs(pa.peaks.back().r - r) <= 1e-10 * std::max(1.0, r)) {
      continue;
    }
    const Jet j = pot_.jet(r);
    const double curvature = j.d2 + 2.0 * tau / (r * r);
    if (!(curvature > 0.0)) continue;
    pa.peaks.push_back({r, g_tau(pot_, tau, r), curvature, false});
  }

  double b = kInf;
  for (const auto& p : pa.peaks) b = std::min(b, p.g);
  if (interval_.lo > 0.0 || tau == 0.0) {
    b = std::min(b, g_tau(pot_, tau, interval_.lo));
  }
  b = std::min(b, g_tau(pot_, tau, interval_.hi));
  pa.b_tau = b;
  for (auto& p : pa.peaks) p.significant = p.g <= b + pa.delta_n;
  return pa;
}

PeakAnalysis find_peaks(const RadialPotential& pot, double tau, Interval interval,
                        int n, double C, double grid_per_unit) {
  if (!(C > 0.0)) throw InvalidArgument("C must be positive");
  return PeakFinder(pot, interval, grid_per_unit).analyze(tau, n, C);
}

DropletData classify(const RadialPotential& pot, int n_probe, double tie_tol) {
  if (n_probe < 3) throw InvalidArgument("n_probe must be at least 3");
  if (!(tie_tol > 0.0)) throw InvalidArgument("tie tolerance must be positive");
  const Interval dom{std::max(0.0, pot.smooth_window().lo), pot.r_max()};
  const PeakFinder pf(pot, dom);

  // Minimizer at tau = 0: a peak, or the left endpoint if q increases there.
  double a0 = dom.lo;
  {
    const PeakAnalysis pa = pf.analyze(0.0);
    const Peak* g = global_peak(pa);
    if (g && g->g < pot.q(dom.lo)) a0 = g->r;
  }

  std::vector<double> lefts{a0}, rights;
  std::vector<std::vector<double>> gap_outposts;
  double prev_r = a0, prev_tau = 0.0;
  for (int i = 1; i < n_probe; ++i) {
    const double tau = static_cast<double>(i) / (n_probe - 1);
    const PeakAnalysis pa = pf.analyze(tau);
    const Peak* gp = global_peak(pa);
    if (!gp) {
      throw NumericError("ambiguous classification: no minimizer of g_tau at tau = " +
                         fmt(tau));
    }
    const double r = gp->r;
    if (r < prev_r - 1e-9) {
      throw NumericError("ambiguous classification: minimizer moved inward from " +
                         fmt(prev_r) + " to " + fmt(r) + " at tau = " + fmt(tau));
    }
    double expected = kInf;
    if (prev_r > 0.0) {
      const double dQ = laplacian(pot, prev_r);
      if (dQ > 0.0) expected = (tau - prev_tau) / (2.0 * prev_r * dQ);
    }
    if (r - prev_r > 4.0 * expected + 1e-9) {
      // Jump: bisect for the tie between the two branches.
      double lo = prev_tau, hi = tau, rl = prev_r, rr = r;
      for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        const PeakAnalysis pm = pf.analyze(mid);
        const Peak* pl = nearest_peak(pm, rl);
        const Peak* pr = nearest_peak(pm, rr);
        if (!pl || !pr || pl == pr) {
          throw NumericError("ambiguous classification: branch lost near tau = " +
                             fmt(mid));
        }
        rl = pl->r;
        rr = pr->r;
        if (pl->g < pr->g) lo = mid; else hi = mid;
      }
      const double tb = 0.5 * (lo + hi);
      const PeakAnalysis pt = pf.analyze(tb);
      std::vector<double> tied;
      for (const auto& p : pt.peaks) {
        if (p.g - pt.b_tau < tie_tol) tied.push_back(p.r);
      }
      if (tied.size() < 2) {
        throw NumericError("ambiguous classification: branching at tau = " + fmt(tb) +
                           " has a single minimizer");
      }
      rights.push_back(tied.front());
      lefts.push_back(tied.back());
      gap_outposts.emplace_back(tied.begin() + 1, tied.end() - 1);
    }
    prev_r = r;
    prev_tau = tau;
  }

  const PeakAnalysis last = pf.analyze(1.0);
  const Peak* gl = global_peak(last);
  rights.push_back(gl->r);
  std::vector<double> exterior;
  for (const auto& p : last.peaks) {
    if (p.r > gl->r + 1e-9 && p.g - last.b_tau < tie_tol) exterior.push_back(p.r);
  }

  DropletData d;
  for (std::size_t v = 0; v < lefts.size(); ++v) {
    d.components.push_back({lefts[v], rights[v]});
  }
  for (const auto& g : gap_outposts) d.outposts.insert(d.outposts.end(), g.begin(), g.end());
  d.outposts.insert(d.outposts.end(), exterior.begin(), exterior.end());

  double mass = 0.0;
  for (const auto& c : d.components) {
    mass += integrate([&](double r) { return 2.0 * laplacian(pot, r) * r; }, c.lo, c.hi);
    d.masses.push_back(mass);
  }

  const std::size_t N = d.components.size();
  if (N == 1 && !exterior.empty()) {
    d.case_tag = CaseTag::case1;
  } else if (N == 2 && exterior.empty() && !gap_outposts[0].empty()) {
    d.case_tag = CaseTag::case2;
  }
  return d;
}

int inner_count(double m0, int n) {
  return static_cast<int>(std::floor(m0 * n + 1e-9));
}

double obstacle(const RadialPotential& pot, const DropletData& data, double r) {
  const auto& cs = data.components;
  if (cs.empty()) throw InvalidArgument("droplet data has no components");
  if (r < cs.front().lo) return pot.q(cs.front().lo);
  for (std::size_t v = 0; v < cs.size(); ++v) {
    if (r <= cs[v].hi) {
      if (r >= cs[v].lo) return pot.q(r);
      const double b = cs[v - 1].hi;
      return pot.q(b) + 2.0 * data.masses[v - 1] * std::log(r / b);
    }
  }
  const double b = cs.back().hi;
  return pot.q(b) + 2.0 * data.masses.back() * std::log(r / b);
}

double smooth_step(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double a = eta(u);
  return a / (a + eta(1.0 - u));
}

double bump(const BumpSpec& spec, double r) {
  const double h = spec.eps / 2.0;
  return smooth_step((r - (spec.center - spec.eps)) / h) *
         smooth_step(((spec.center + spec.eps) - r) / h);
}

Jet window_bump(double u) {
  const double v = 1.0 - u * u;
  if (!(v > 0.0)) return {0.0, 0.0, 0.0};
  const double z = std::exp(1.0 - 1.0 / v);
  if (z == 0.0) return {0.0, 0.0, 0.0};
  const double f1 = -2.0 * u / (v * v);
  const double f2 = -2.0 / (v * v) - 8.0 * u * u / (v * v * v);
  return {z, z * f1, z * (f2 + f1 * f1)};
}

RadialPotential ginibre() {
  DropletData d{{{0.0, 1.0}}, {}, {1.0}, CaseTag::other};
  return RadialPotential(std::make_shared<GinibreProfile>(), {0.0, kInf}, 3.0,
                         "ginibre", d);
}

RadialPotential build_case1(std::span<const double> t_in, std::span<const double> w_in,
                            double margin) {
  std::vector<double> t(t_in.begin(), t_in.end()), w(w_in.begin(), w_in.end());
  if (!(margin >= 0.0)) throw InvalidArgument("margin must be nonnegative");
  for (double tk : t) {
    if (!(tk > 1.0 && tk < 3.0)) throw InvalidArgument("outpost not in (1,3)");
  }
  check_windows(t, w);
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(1.0 + margin < t[k] - w[k] && t[k] + w[k] < 3.0 - margin)) {
      throw InvalidArgument("window touching {1,3}");
    }
  }
  DropletData d{{{0.0, 1.0}}, t, {1.0}, CaseTag::case1};
  RadialPotential pot(std::make_shared<Case1Profile>(t, w), {0.0, kInf}, 4.0, "case1",
                      d, {1.0, 3.0});
  require_valid(pot);
  return pot;
}

RadialPotential build_case2(Interval inner, Interval outer, double m0,
                            std::span<const double> t_in, std::span<const double> w_in,
                            double margin) {
  std::vector<double> t(t_in.begin(), t_in.end()), w(w_in.begin(), w_in.end());
  if (!(margin >= 0.0)) throw InvalidArgument("margin must be nonnegative");
  if (!(std::isfinite(inner.lo) && std::isfinite(outer.hi) && inner.lo >= 0.0 &&
        inner.lo < inner.hi && inner.hi < outer.lo && outer.lo < outer.hi)) {
    throw InvalidArgument("infeasible components: need 0 <= a0 < b0 < a1 < b1");
  }
  if (!(m0 > 0.0 && m0 < 1.0)) throw InvalidArgument("infeasible mass: M0 must lie in (0,1)");
  check_windows(t, w);
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(inner.hi + margin < t[k] - w[k] && t[k] + w[k] < outer.lo - margin)) {
      throw InvalidArgument("window touches component");
    }
  }
  DropletData d{{inner, outer}, t, {m0, 1.0}, CaseTag::case2};
  const double lo = inner.lo > 0.0 ? inner.lo / 2.0 : 0.0;
  const double r_max = outer.hi + 2.0;
  RadialPotential pot(std::make_shared<Case2Profile>(inner, outer, m0, t, w),
                      {lo, kInf}, r_max, "case2", d, {inner.hi, outer.lo});
  require_valid(pot);
  return pot;
}

std::vector<CheckResult> validate_potential(const RadialPotential& pot) {
  std::vector<CheckResult> out;
  const double lo = std::max(pot.smooth_window().lo, 1e-3);
  const double rmax = pot.r_max();
  const int probes = 2000;

  {
    CheckResult c{"derivatives", true, ""};
    const double h1 = 1e-5, h2 = 1e-5;
    for (int i = 0; i <= probes && c.passed; ++i) {
      const double r = lo + 2 * h2 + (rmax - lo - 4 * h2) * i / probes;
      const Jet j = pot.jet(r);
      const double d1 = (pot.q(r - 2 * h1) - 8 * pot.q(r - h1) + 8 * pot.q(r + h1) -
                         pot.q(r + 2 * h1)) / (12 * h1);
      const double d2 = (pot.dq(r - 2 * h2) - 8 * pot.dq(r - h2) + 8 * pot.dq(r + h2) -
                         pot.dq(r + 2 * h2)) / (12 * h2);
      if (std::abs(d1 - j.d1) > 1e-6 * std::max(1.0, std::abs(j.d1))) {
        c = {"derivatives", false, "dq mismatch at r = " + fmt(r) + ": " + fmt(j.d1) + " vs " + fmt(d1)};
      } else if (std::abs(d2 - j.d2) > 1e-6 * std::max(1.0, std::abs(j.d2))) {
        c = {"derivatives", false, "ddq mismatch at r = " + fmt(r) + ": " + fmt(j.d2) + " vs " + fmt(d2)};
      }
    }
    out.push_back(c);
  }

  {
    CheckResult c{"growth", true, ""};
    for (int i = 0; i <= 100; ++i) {
      const double r = rmax * (1.0 + i / 100.0);
      if (!(r * pot.dq(r) > 2.0 * 1.01)) {
        c = {"growth", false, "q - 2.02 log r not increasing at r = " + fmt(r)};
        break;
      }
    }
    out.push_back(c);
  }

  {
    CheckResult c{"matching", true, ""};
    for (double x : pot.junctions()) {
      const double h = 1e-9;
      const Jet a = pot.jet(x - h), b = pot.jet(x + h);
      if (std::abs(a.value - b.value) > 1e-7 || std::abs(a.d1 - b.d1) > 1e-6 ||
          std::abs(a.d2 - b.d2) > 1e-5) {
        c = {"matching", false, "C2 mismatch at r = " + fmt(x)};
        break;
      }
    }
    out.push_back(c);
  }

  DropletData found;
  try {
    found = classify(pot);
  } catch (const NumericError& e) {
    out.push_back({"classification", false, e.what()});
    return out;
  }
  {
    CheckResult c{"classification", true, ""};
    if (std::abs(found.masses.back() - 1.0) > 1e-8) {
      c = {"classification", false, "total mass " + fmt(found.masses.back())};
    }
    if (const auto& dec = pot.declared(); dec && c.passed) {
      bool ok = dec->case_tag == found.case_tag &&
                dec->components.size() == found.components.size() &&
                dec->outposts.size() == found.outposts.size();
      for (std::size_t v = 0; ok && v < dec->components.size(); ++v) {
        ok = std::abs(dec->components[v].lo - found.components[v].lo) <= 1e-6 &&
             std::abs(dec->components[v].hi - found.components[v].hi) <= 1e-6 &&
             std::abs(dec->masses[v] - found.masses[v]) <= 1e-8;
      }
      for (std::size_t p = 0; ok && p < dec->outposts.size(); ++p) {
        ok = std::abs(dec->outposts[p] - found.outposts[p]) <= 1e-8;
      }
      if (!ok) c = {"classification", false, "classified data differ from declared data"};
    }
    out.push_back(c);
  }

  const DropletData& data = pot.declared() ? *pot.declared() : found;
  const double tau_star = data.case_tag == CaseTag::case2 ? data.masses[0] : 1.0;

  {
    CheckResult c{"obstacle", true, ""};
    std::vector<double> rs;
    for (int i = 0; i <= 4 * probes; ++i) rs.push_back(lo + (rmax - lo) * i / (4.0 * probes));
    rs.insert(rs.end(), data.outposts.begin(), data.outposts.end());
    for (double r : rs) {
      bool in_droplet = false, near_edge = false, near_outpost = false;
      for (const auto& comp : data.components) {
        in_droplet = in_droplet || comp.contains(r);
        near_edge = near_edge || std::abs(r - comp.lo) < 1e-5 || std::abs(r - comp.hi) < 1e-5;
      }
      for (double tk : data.outposts) near_outpost = near_outpost || std::abs(r - tk) <= 1e-8;
      if (in_droplet || near_edge) continue;
      const double q = pot.q(r);
      const double d = q - obstacle(pot, data, r);
      const double eq_tol = 1e-14 * std::max(1.0, std::abs(q));
      if (d < -eq_tol) {
        c = {"obstacle", false, "Q below its obstacle at r = " + fmt(r)};
        break;
      }
      if (near_outpost ? std::abs(d) > 1e-12 : d <= eq_tol) {
        c = {"obstacle", false, "unexpected coincidence behavior at r = " + fmt(r)};
        break;
      }
    }
    out.push_back(c);
  }

  {
    CheckResult c{"stationarity", true, ""};
    for (double tk : data.outposts) {
      if (std::abs(tk * pot.dq(tk) - 2.0 * tau_star) > 1e-8) {
        c = {"stationarity", false, "r q'(r) != 2 tau at r = " + fmt(tk)};
        break;
      }
    }
    out.push_back(c);
  }

  {
    CheckResult c{"peaks", true, ""};
    const PeakAnalysis pa =
        find_peaks(pot, tau_star, {std::max(0.0, pot.smooth_window().lo), rmax}, 100, 10.0);
    std::vector<double> expect = data.outposts;
    if (data.case_tag == CaseTag::case2) {
      expect.push_back(data.components[0].hi);
      expect.push_back(data.components[1].lo);
    } else {
      expect.push_back(data.components.back().hi);
    }
    for (double r : expect) {
      const Peak* p = nearest_peak(pa, r);
      if (!p || std::abs(p->r - r) > 1e-6 || !p->significant ||
          std::abs(p->g - pa.b_tau) > 1e-10) {
        c = {"peaks", false, "no tied significant peak at r = " + fmt(r)};
        break;
      }
    }
    out.push_back(c);
  }

  {
    CheckResult c{"laplacian", true, ""};
    for (double tk : data.outposts) {
      if (!(laplacian(pot, tk) > 0.0)) {
        c = {"laplacian", false, "Laplacian not positive at r = " + fmt(tk)};
        break;
      }
    }
    out.push_back(c);
  }
  return out;
}

void to_json(nlohmann::json& j, const Interval& v) { j = nlohmann::json::array({v.lo, v.hi}); }

void to_json(nlohmann::json& j, const DropletData& d) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : d.components) comps.push_back(c);
  j = nlohmann::json{{"components", comps},
                     {"outposts", d.outposts},
                     {"masses", d.masses},
                     {"case_tag", to_string(d.case_tag)}};
}

}  // namespace outpost
