#include "outpost/finite_n.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <thread>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "outpost/error.hpp"
#include "outpost/rng.hpp"

namespace outpost {

namespace {

constexpr double kLog2 = 0.69314718055994530942;

// 21-point Kronrod rule with its embedded 10-point Gauss rule on [-1, 1].
struct Rule {
  std::array<double, 21> x{}, wk{}, wg{};
};

const Rule& gk21() {
  static const Rule rule = [] {
    using boost::math::quadrature::gauss;
    using boost::math::quadrature::gauss_kronrod;
    const auto& kx = gauss_kronrod<double, 21>::abscissa();
    const auto& kw = gauss_kronrod<double, 21>::weights();
    const auto& gw = gauss<double, 10>::weights();
    Rule r;
    r.x[0] = kx[0];
    r.wk[0] = kw[0];
    for (int i = 1; i <= 10; ++i) {
      const double g = i % 2 == 1 ? gw[(i - 1) / 2] : 0.0;
      r.x[2 * i - 1] = -kx[i];
      r.x[2 * i] = kx[i];
      r.wk[2 * i - 1] = r.wk[2 * i] = kw[i];
      r.wg[2 * i - 1] = r.wg[2 * i] = g;
    }
    return r;
  }();
  return rule;
}

struct Panel {
  double a = 0.0, b = 0.0, value = 0.0, error = 0.0;
};

template <class F>
Panel eval_panel(const F& f, double a, double b) {
  const Rule& R = gk21();
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double k = 0.0, g = 0.0;
  for (int i = 0; i < 21; ++i) {
    const double v = f(c + h * R.x[i]);
    k += R.wk[i] * v;
    g += R.wg[i] * v;
  }
  return {a, b, h * k, h * std::abs(k - g)};
}

// Globally adaptive integration over the given segments: the panel with the
// largest error estimate is bisected until the total error meets tolerance.
template <class F>
double adaptive(const F& f, const std::vector<std::pair<double, double>>& segments,
                double rel_tol, double abs_tol, int max_subdivisions, int j,
                std::vector<Panel>* panels_out = nullptr) {
  std::vector<Panel> panels;
  for (const auto& [a, b] : segments) {
    if (b > a) panels.push_back(eval_panel(f, a, b));
  }
  auto by_error = [&](std::size_t x, std::size_t y) {
    return panels[x].error < panels[y].error;
  };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(by_error)> heap(by_error);
  double total = 0.0, error = 0.0;
  for (std::size_t i = 0; i < panels.size(); ++i) {
    heap.push(i);
    total += panels[i].value;
    error += panels[i].error;
  }
  int splits = 0;
  while (!heap.empty() && error > std::max(abs_tol, rel_tol * std::abs(total))) {
    if (splits >= max_subdivisions) {
      throw NumericError("quadrature did not converge for j = " + std::to_string(j) +
                         " (error estimate " + std::to_string(error) + ")");
    }
    const std::size_t i = heap.top();
    heap.pop();
    const Panel p = panels[i];
    const double mid = 0.5 * (p.a + p.b);
    if (!(mid > p.a && mid < p.b)) {
      throw NumericError("quadrature panel underflow for j = " + std::to_string(j));
    }
    panels[i] = eval_panel(f, p.a, mid);
    panels.push_back(eval_panel(f, mid, p.b));
    heap.push(i);
    heap.push(panels.size() - 1);
    total += panels[i].value + panels.back().value - p.value;
    error += panels[i].error + panels.back().error - p.error;
    ++splits;
    // Refresh the running sums to keep cancellation from accumulating.
    if (splits % 256 == 0) {
      total = error = 0.0;
      for (const auto& q : panels) {
        total += q.value;
        error += q.error;
      }
    }
  }
  std::sort(panels.begin(), panels.end(),
            [](const Panel& x, const Panel& y) { return x.a < y.a; });
  total = 0.0;
  for (const auto& q : panels) total += q.value;
  if (!std::isfinite(total)) {
    throw NumericError("non-finite quadrature value for j = " + std::to_string(j));
  }
  if (panels_out) *panels_out = std::move(panels);
  return total;
}

std::vector<Interval> merge(std::vector<Interval> v) {
  std::sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  for (const auto& iv : v) {
    if (!out.empty() && iv.lo <= out.back().hi) {
      out.back().hi = std::max(out.back().hi, iv.hi);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

// Runs fn(j) for j in [0, n) over `threads` contiguous chunks.
template <class Fn>
void parallel_for(int n, int threads, const Fn& fn) {
  threads = std::clamp(threads, 1, std::max(1, n));
  if (threads == 1) {
    for (int j = 0; j < n; ++j) fn(j);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        const int lo = static_cast<int>(static_cast<long>(n) * t / threads);
        const int hi = static_cast<int>(static_cast<long>(n) * (t + 1) / threads);
        try {
          for (int j = lo; j < hi; ++j) fn(j);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct IndexSetup {
  double tau2 = 0.0;       // (2j + 1) / n
  double b_tau = 0.0;      // min of g_tau on the domain
  double hi = 0.0;         // upper integration limit
  std::vector<double> peaks;
  std::vector<Interval> windows;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

QuadMode parse_quad_mode(std::string_view name) {
  if (name == "windowed") return QuadMode::windowed;
  if (name == "full") return QuadMode::full;
  if (name == "both") return QuadMode::both;
  throw InvalidArgument("unknown quadrature mode '" + std::string(name) + "'");
}

const char* to_string(QuadMode mode) {
  switch (mode) {
    case QuadMode::windowed: return "windowed";
    case QuadMode::full: return "full";
    default: return "both";
  }
}

void QuadratureConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) {
    throw InvalidArgument("quadrature tolerances must be positive");
  }
  if (!(C >= 1.0)) throw InvalidArgument("window constant C must be at least 1");
  if (max_subdivisions < 1) throw InvalidArgument("max_subdivisions must be positive");
  if (threads < 1) throw InvalidArgument("threads must be positive");
}

Shape Shape::indicator(Interval iv) {
  if (!(iv.lo < iv.hi)) throw InvalidArgument("region interval must have lo < hi");
  Shape s;
  s.kind_ = Kind::indicator;
  s.lo_ = iv.lo;
  s.hi_ = iv.hi;
  return s;
}

Shape Shape::bump(BumpSpec b) {
  if (!(b.eps > 0.0)) throw InvalidArgument("bump half-width must be positive");
  Shape s;
  s.kind_ = Kind::bump;
  s.lo_ = b.center;
  s.hi_ = b.eps;
  return s;
}

Shape Shape::step(double lo, double hi, bool rising) {
  if (!(lo < hi)) throw InvalidArgument("step transition must have lo < hi");
  Shape s;
  s.kind_ = Kind::step;
  s.lo_ = lo;
  s.hi_ = hi;
  s.rising_ = rising;
  return s;
}

double Shape::operator()(double r) const {
  switch (kind_) {
    case Kind::indicator: return r >= lo_ && r <= hi_ ? 1.0 : 0.0;
    case Kind::bump: return outpost::bump({lo_, hi_}, r);
    default: {
      const double u = (r - lo_) / (hi_ - lo_);
      return smooth_step(rising_ ? u : 1.0 - u);
    }
  }
}

Interval Shape::support() const {
  switch (kind_) {
    case Kind::indicator: return {lo_, hi_};
    case Kind::bump: return {lo_ - hi_, lo_ + hi_};
    default: return rising_ ? Interval{lo_, std::numeric_limits<double>::infinity()}
                             : Interval{0.0, hi_};
  }
}

void Shape::breakpoints(std::vector<double>& out) const {
  if (kind_ == Kind::bump) {
    for (double f : {-1.0, -0.5, 0.5, 1.0}) out.push_back(lo_ + f * hi_);
  } else {
    out.push_back(lo_);
    out.push_back(hi_);
  }
}

RegionSet::RegionSet(std::vector<Statistic> stats) : stats_(std::move(stats)) {
  for (const auto& s : stats_) {
    if (s.above && s.split < 0) throw InvalidArgument("statistic split must be nonnegative");
  }
}

RegionSet RegionSet::hard(std::span<const Interval> intervals) {
  std::vector<Statistic> s;
  for (const auto& iv : intervals) s.push_back({Shape::indicator(iv), std::nullopt, 0});
  RegionSet rs(std::move(s));
  rs.check_disjoint(0);
  return rs;
}

RegionSet RegionSet::smooth(std::span<const BumpSpec> bumps) {
  std::vector<Statistic> s;
  for (const auto& b : bumps) s.push_back({Shape::bump(b), std::nullopt, 0});
  return RegionSet(std::move(s));
}

bool RegionSet::is_hard() const {
  for (const auto& s : stats_) {
    if (s.below.kind() != Shape::Kind::indicator) return false;
    if (s.above && s.above->kind() != Shape::Kind::indicator) return false;
  }
  return true;
}

void RegionSet::check_disjoint(int j) const {
  std::vector<Interval> iv;
  for (const auto& s : stats_) iv.push_back(s.shape(j).support());
  std::sort(iv.begin(), iv.end(), [](auto& a, auto& b) { return a.lo < b.lo; });
  for (std::size_t k = 1; k < iv.size(); ++k) {
    if (iv[k].lo < iv[k - 1].hi) throw InvalidArgument("regions overlap");
  }
}

double default_eps(const DropletData& data) {
  std::vector<std::pair<double, bool>> radii;
  for (const auto& c : data.components) {
    if (c.lo > 0.0) radii.push_back({c.lo, false});
    radii.push_back({c.hi, false});
  }
  for (double t : data.outposts) radii.push_back({t, true});
  std::sort(radii.begin(), radii.end());
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < radii.size(); ++i) {
    if (radii[i].second || radii[i - 1].second) {
      gap = std::min(gap, radii[i].first - radii[i - 1].first);
    }
  }
  if (!std::isfinite(gap) || !(gap > 0.0)) {
    throw InvalidArgument("droplet data has no outposts to place regions around");
  }
  return gap / 5.0;
}

RegionSet outpost_regions(const DropletData& data, double eps, int n, bool smooth) {
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  std::vector<Statistic> stats;
  auto outpost_stat = [&](double t) {
    return Statistic{smooth ? Shape::bump({t, eps}) : Shape::indicator({t - eps, t + eps}),
                     std::nullopt, 0};
  };
  if (data.case_tag == CaseTag::case1) {
    for (double t : data.outposts) stats.push_back(outpost_stat(t));
  } else if (data.case_tag == CaseTag::case2) {
    const double b0 = data.components[0].hi, a1 = data.components[1].lo;
    const double t1 = data.outposts.front(), tm = data.outposts.back();
    if (!(b0 + eps < t1 - eps && tm + eps < a1 - eps)) {
      throw InvalidArgument("eps too large for the spectral gap");
    }
    Statistic s0;
    s0.split = inner_count(data.masses[0], n);
    if (smooth) {
      s0.below = Shape::step(tm + eps, a1 - eps, true);
      s0.above = Shape::step(b0 + eps, t1 - eps, false);
    } else {
      s0.below = Shape::indicator({0.5 * (tm + a1), std::numeric_limits<double>::infinity()});
      s0.above = Shape::indicator({0.0, 0.5 * (b0 + t1)});
    }
    stats.push_back(s0);
    for (double t : data.outposts) stats.push_back(outpost_stat(t));
  } else {
    throw InvalidArgument("outpost regions need case1 or case2 droplet data");
  }
  RegionSet rs(std::move(stats));
  if (rs.is_hard()) {
    rs.check_disjoint(0);
    rs.check_disjoint(n);
  } else {
    for (std::size_t a = 0; a < data.outposts.size(); ++a) {
      for (std::size_t b = a + 1; b < data.outposts.size(); ++b) {
        if (std::abs(data.outposts[a] - data.outposts[b]) < 4.0 * eps) {
          throw InvalidArgument("2eps neighborhoods of outposts overlap");
        }
      }
    }
  }
  return rs;
}

std::vector<IndexRange> leading_indices(const DropletData& data, int n, double C) {
  const int L = static_cast<int>(std::ceil(C * std::log(static_cast<double>(n))));
  if (data.case_tag == CaseTag::case1) return {{std::max(0, n - L), n}};
  if (data.case_tag == CaseTag::case2) {
    const int m0 = inner_count(data.masses[0], n);
    return {{std::max(0, m0 - L), std::min(n, m0 + L)}};
  }
  return {{0, n}};
}

struct FiniteNEngine::Impl {
  RadialPotential pot;
  int n;
  QuadratureConfig cfg;
  Interval domain;
  std::vector<IndexSetup> setup;
  std::vector<double> scaled0;  // s = 0 integral in max-normalized units
  std::vector<double> log_norm0;

  Impl(const RadialPotential& p, int n_, QuadratureConfig c)
      : pot(p), n(n_), cfg(c), domain{std::max(0.0, p.smooth_window().lo), p.r_max()} {
    cfg.validate();
    if (n < 1) throw InvalidArgument("n must be positive");
    const PeakFinder pf(p, domain);
    const double nn = std::max(n, 2);
    const double eps_n = std::sqrt(cfg.C * std::log(nn) / nn);
    setup.resize(n);
    scaled0.resize(n);
    log_norm0.resize(n);
    parallel_for(n, cfg.threads, [&](int j) {
      IndexSetup& s = setup[j];
      s.tau2 = (2.0 * j + 1.0) / n;
      const PeakAnalysis pa = pf.analyze(s.tau2 / 2.0, std::max(n, 2), cfg.C);
      s.b_tau = pa.b_tau;
      std::vector<Interval> w;
      for (const auto& pk : pa.peaks) {
        if (!pk.significant) continue;
        s.peaks.push_back(pk.r);
        const double hw = std::max(eps_n, 8.0 / std::sqrt(n * pk.curvature / 4.0));
        w.push_back({std::max(domain.lo, pk.r - hw), std::min(domain.hi, pk.r + hw)});
      }
      if (w.empty()) {
        throw NumericError("no peak of g_tau found for j = " + std::to_string(j));
      }
      // Extend the upper limit until the integrand is below e^{-46}.
      s.hi = domain.hi;
      while (n * (g_tau(p, s.tau2 / 2.0, s.hi) - s.b_tau) < 46.0) {
        s.hi += 0.5;
        if (!p.smooth_window().contains(s.hi) || s.hi > 1e3 * domain.hi) {
          throw NumericError("integrand does not decay inside the smooth window for j = " +
                             std::to_string(j));
        }
      }
      for (auto& iv : w) {
        if (iv.hi >= domain.hi) iv.hi = s.hi;
      }
      s.windows = merge(std::move(w));
      const std::vector<double> none;
      scaled0[j] = integrate(j, none, nullptr, std::nullopt);
      log_norm0[j] = kLog2 - n * s.b_tau + std::log(scaled0[j]);
    });
  }

  // Integration segments for index j, optionally clipped to `clip`.
  std::vector<std::pair<double, double>> segments(int j, bool full,
                                                  const RegionSet* stats,
                                                  std::optional<Interval> clip) const {
    const IndexSetup& s = setup[j];
    const Interval range{domain.lo, s.hi};
    std::vector<Interval> pieces = full ? std::vector<Interval>{range} : s.windows;
    std::vector<double> cuts = s.peaks;
    cuts.insert(cuts.end(), pot.junctions().begin(), pot.junctions().end());
    if (stats) {
      for (const auto& st : stats->stats()) st.shape(j).breakpoints(cuts);
    }
    if (full) {
      const int grid = 256;
      for (int i = 1; i < grid; ++i) cuts.push_back(range.lo + range.width() * i / grid);
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<std::pair<double, double>> out;
    for (Interval p : pieces) {
      if (clip) {
        p.lo = std::max(p.lo, clip->lo);
        p.hi = std::min(p.hi, clip->hi);
      }
      if (!(p.hi > p.lo)) continue;
      double a = p.lo;
      for (double c : cuts) {
        if (c > a && c < p.hi) {
          out.push_back({a, c});
          a = c;
        }
      }
      out.push_back({a, p.hi});
    }
    return out;
  }

  double integrate_mode(int j, bool full, std::span<const double> s, const RegionSet* stats,
                        std::optional<Interval> clip, double abs_tol) const {
    const IndexSetup& st = setup[j];
    const double nd = n;
    auto f = [&](double r) {
      double e = -nd * (pot.q(r) - st.tau2 * std::log(r) - st.b_tau);
      if (stats) {
        for (std::size_t k = 0; k < s.size(); ++k) {
          if (s[k] != 0.0) e += s[k] * stats->stats()[k].shape(j)(r);
        }
      }
      return std::exp(e);
    };
    const auto segs = segments(j, full, stats, clip);
    if (segs.empty()) return 0.0;
    return adaptive(f, segs, cfg.rel_tol, abs_tol, cfg.max_subdivisions, j);
  }

  double integrate(int j, std::span<const double> s, const RegionSet* stats,
                   std::optional<Interval> clip, double abs_tol = -1.0) const {
    if (abs_tol < 0.0) abs_tol = cfg.abs_tol;
    switch (cfg.mode) {
      case QuadMode::windowed: return integrate_mode(j, false, s, stats, clip, abs_tol);
      case QuadMode::full: return integrate_mode(j, true, s, stats, clip, abs_tol);
      default: {
        const double w = integrate_mode(j, false, s, stats, clip, abs_tol);
        const double f = integrate_mode(j, true, s, stats, clip, abs_tol);
        if (std::abs(w - f) > 1e-8 * std::abs(f) + abs_tol) {
          throw NumericError("windowed and full quadrature disagree for j = " +
                             std::to_string(j) + ": " + fmt(w) + " vs " + fmt(f));
        }
        return f;
      }
    }
  }

  void check_index(int j) const {
    if (j < 0 || j >= n) {
      throw InvalidArgument("index j = " + std::to_string(j) + " outside [0, n)");
    }
  }

  // True when no statistic can be nonzero on the integration domain of j.
  bool inert(int j, const RegionSet& stats) const {
    if (cfg.mode != QuadMode::windowed) return false;
    for (const auto& st : stats.stats()) {
      const Interval sup = st.shape(j).support();
      for (const auto& w : setup[j].windows) {
        if (sup.lo < w.hi && sup.hi > w.lo) return false;
      }
    }
    return true;
  }
};

FiniteNEngine::FiniteNEngine(const RadialPotential& pot, int n, QuadratureConfig cfg)
    : impl_(std::make_unique<Impl>(pot, n, cfg)) {}
FiniteNEngine::~FiniteNEngine() = default;
FiniteNEngine::FiniteNEngine(FiniteNEngine&&) noexcept = default;

int FiniteNEngine::n() const { return impl_->n; }
const QuadratureConfig& FiniteNEngine::config() const { return impl_->cfg; }

double FiniteNEngine::log_norm(int j) const {
  impl_->check_index(j);
  return impl_->log_norm0[j];
}

double FiniteNEngine::log_norm(int j, std::span<const double> s,
                               const RegionSet& stats) const {
  impl_->check_index(j);
  if (static_cast<int>(s.size()) != stats.size()) {
    throw InvalidArgument("s and statistics arity mismatch");
  }
  for (double v : s) {
    if (!std::isfinite(v)) throw InvalidArgument("non-finite s");
  }
  if (std::all_of(s.begin(), s.end(), [](double v) { return v == 0.0; })) {
    return impl_->log_norm0[j];
  }
  const double I = impl_->integrate(j, s, &stats, std::nullopt);
  if (!(I > 0.0)) {
    throw NumericError("vanishing weighted norm for j = " + std::to_string(j));
  }
  return kLog2 - impl_->n * impl_->setup[j].b_tau + std::log(I);
}

std::vector<Interval> FiniteNEngine::windows(int j) const {
  impl_->check_index(j);
  return impl_->setup[j].windows;
}

MgfResult FiniteNEngine::joint_mgf(std::span<const double> s, const RegionSet& stats,
                                   std::span<const IndexRange> restrict_to) const {
  const int n = impl_->n;
  if (static_cast<int>(s.size()) != stats.size()) {
    throw InvalidArgument("s and statistics arity mismatch");
  }
  const double bound = std::log(static_cast<double>(std::max(n, 2)));
  for (double v : s) {
    if (!(std::abs(v) <= bound + 1e-12)) {
      throw InvalidArgument("|s_k| must not exceed log n = " + fmt(bound));
    }
  }
  MgfResult res;
  if (std::all_of(s.begin(), s.end(), [](double v) { return v == 0.0; })) return res;
  std::vector<double> d(n, 0.0);
  parallel_for(n, impl_->cfg.threads, [&](int j) {
    if (impl_->inert(j, stats)) return;
    d[j] = log_norm(j, s, stats) - impl_->log_norm0[j];
  });
  for (int j = 0; j < n; ++j) {
    bool inside = restrict_to.empty();
    for (const auto& r : restrict_to) inside = inside || (j >= r.lo && j < r.hi);
    if (inside) {
      res.log_value += d[j];
    } else {
      res.neglected_log += d[j];
    }
  }
  res.value = std::exp(res.log_value);
  return res;
}

std::vector<double> FiniteNEngine::region_probabilities(int j,
                                                        const RegionSet& regions) const {
  impl_->check_index(j);
  if (!regions.is_hard()) {
    throw InvalidArgument("region probabilities need hard-indicator regions");
  }
  std::vector<double> out;
  const double total = impl_->scaled0[j];
  for (const auto& st : regions.stats()) {
    const Interval sup = st.shape(j).support();
    const double I = impl_->integrate(j, {}, nullptr, sup,
                                      std::max(impl_->cfg.abs_tol * 1e-3,
                                               impl_->cfg.rel_tol * total * 1e-2));
    out.push_back(std::min(1.0, I / total));
  }
  return out;
}

CountLaw FiniteNEngine::exact_count_law(const RegionSet& regions, int cap,
                                        std::size_t entry_budget) const {
  if (!regions.is_hard()) {
    throw InvalidArgument("exact count law needs hard-indicator regions");
  }
  const int m = regions.size();
  if (m == 0) throw InvalidArgument("exact count law needs at least one region");
  if (cap < 0) throw InvalidArgument("cap must be nonnegative");
  const int n = impl_->n;
  regions.check_disjoint(0);
  for (const auto& st : regions.stats()) regions.check_disjoint(st.split);
  std::vector<std::vector<double>> pi(n);
  parallel_for(n, impl_->cfg.threads, [&](int j) { pi[j] = region_probabilities(j, regions); });
  CategoricalAccumulator acc(m, std::min(cap, n), entry_budget);
  std::vector<double> probs(m + 1);
  for (int j = 0; j < n; ++j) {
    double rest = 1.0;
    for (int k = 0; k < m; ++k) {
      probs[k + 1] = pi[j][k];
      rest -= pi[j][k];
    }
    probs[0] = std::max(0.0, rest);
    acc.add_site(probs);
  }
  return acc.to_law(0.0);
}

double log_norm(const RadialPotential& pot, int n, int j, std::span<const double> s,
                const RegionSet& stats, const QuadratureConfig& cfg) {
  return FiniteNEngine(pot, n, cfg).log_norm(j, s, stats);
}

MgfResult joint_mgf(const RadialPotential& pot, int n, std::span<const double> s,
                    const RegionSet& stats, const QuadratureConfig& cfg) {
  return FiniteNEngine(pot, n, cfg).joint_mgf(s, stats);
}

std::vector<double> region_probabilities(const RadialPotential& pot, int n, int j,
                                         const RegionSet& regions,
                                         const QuadratureConfig& cfg) {
  return FiniteNEngine(pot, n, cfg).region_probabilities(j, regions);
}

CountLaw exact_count_law(const RadialPotential& pot, int n, const RegionSet& regions,
                         int cap, const QuadratureConfig& cfg) {
  return FiniteNEngine(pot, n, cfg).exact_count_law(regions, cap);
}

// ---------------------------------------------------------------------------

namespace {

struct Cell {
  double a, b;    // radial extent
  double F0, F1;  // CDF at a and b
  double fa, fb;  // density at a and b
};

double hermite(const Cell& c, double t) {
  const double t2 = t * t, t3 = t2 * t;
  const double dx = c.b - c.a;
  return (2 * t3 - 3 * t2 + 1) * c.F0 + (t3 - 2 * t2 + t) * dx * c.fa +
         (-2 * t3 + 3 * t2) * c.F1 + (t3 - t2) * dx * c.fb;
}

}  // namespace

struct ModuliSampler::Impl {
  int n;
  std::vector<std::vector<Cell>> cells;
};

ModuliSampler::ModuliSampler(const RadialPotential& pot, int n, QuadratureConfig cfg)
    : impl_(std::make_unique<Impl>()) {
  FiniteNEngine engine(pot, n, cfg);
  const auto& E = *engine.impl_;
  impl_->n = n;
  impl_->cells.resize(n);
  const bool full = E.cfg.mode != QuadMode::windowed;
  parallel_for(n, E.cfg.threads, [&](int j) {
    const IndexSetup& st = E.setup[j];
    auto f = [&](double r) {
      return std::exp(-static_cast<double>(n) *
                      (pot.q(r) - st.tau2 * std::log(r) - st.b_tau));
    };
    std::vector<Panel> panels;
    const double T = adaptive(f, E.segments(j, full, nullptr, std::nullopt), E.cfg.rel_tol,
                              E.cfg.abs_tol, E.cfg.max_subdivisions, j, &panels);
    // Split panels until each holds at most 1e-3 of the mass and the Hermite
    // interpolant reproduces the cell's midpoint mass to 1e-10 relative
    // (plus 1e-14 of the total).
    std::vector<Cell> out;
    double F = 0.0;
    for (const auto& p : panels) {
      struct Item { double a, b, mass; int depth; };
      std::vector<Item> stack{{p.a, p.b, p.value, 0}};
      while (!stack.empty()) {
        const Item it = stack.back();
        stack.pop_back();
        const double mid = 0.5 * (it.a + it.b);
        const double left = eval_panel(f, it.a, mid).value;
        const double fa = f(it.a), fb = f(it.b);
        const double predicted = 0.5 * it.mass + (it.b - it.a) * (fa - fb) / 8.0;
        const bool small = it.mass <= 1e-3 * T;
        const bool smooth =
            std::abs(left - predicted) <= 1e-10 * it.mass + 1e-14 * T;
        if (small && smooth) {
          out.push_back({it.a, it.b, F / T, (F + it.mass) / T, fa / T, fb / T});
          F += it.mass;
          continue;
        }
        if (it.depth > 60 || !(mid > it.a && mid < it.b)) {
          throw NumericError("sampling grid resolution failure for j = " +
                             std::to_string(j));
        }
        // Right half first so the left half is processed next.
        stack.push_back({mid, it.b, it.mass - left, it.depth + 1});
        stack.push_back({it.a, mid, left, it.depth + 1});
      }
    }
    for (auto& c : out) {
      c.F0 *= T / F;
      c.F1 *= T / F;
      c.fa *= T / F;
      c.fb *= T / F;
    }
    out.back().F1 = 1.0;
    impl_->cells[j] = std::move(out);
  });
}

ModuliSampler::~ModuliSampler() = default;
ModuliSampler::ModuliSampler(ModuliSampler&&) noexcept = default;

int ModuliSampler::n() const { return impl_->n; }

double ModuliSampler::quantile(int j, double u) const {
  if (j < 0 || j >= impl_->n) throw InvalidArgument("index j outside [0, n)");
  if (!(u > 0.0 && u < 1.0)) throw InvalidArgument("probability must lie in (0, 1)");
  const auto& cs = impl_->cells[j];
  auto it = std::lower_bound(cs.begin(), cs.end(), u,
                             [](const Cell& c, double v) { return c.F1 < v; });
  if (it == cs.end()) it = std::prev(cs.end());
  double lo = 0.0, hi = 1.0;
  for (int iter = 0; iter < 60; ++iter) {
    const double t = 0.5 * (lo + hi);
    if (hermite(*it, t) < u) lo = t; else hi = t;
  }
  return it->a + 0.5 * (lo + hi) * (it->b - it->a);
}

ModuliSample ModuliSampler::sample(std::uint64_t seed) const {
  ModuliSample s{impl_->n, seed, std::vector<double>(impl_->n)};
  for (int j = 0; j < impl_->n; ++j) {
    s.radii[j] = quantile(j, stream_uniform(seed, static_cast<std::uint64_t>(j)));
  }
  return s;
}

ModuliSample sample_moduli(const RadialPotential& pot, int n, std::uint64_t seed,
                           const QuadratureConfig& cfg) {
  return ModuliSampler(pot, n, cfg).sample(seed);
}

MultiIndex count_regions(const RegionSet& regions, std::span<const double> radii) {
  if (!regions.is_hard()) throw InvalidArgument("counting needs hard-indicator regions");
  MultiIndex counts(regions.size(), 0);
  for (std::size_t j = 0; j < radii.size(); ++j) {
    for (int k = 0; k < regions.size(); ++k) {
      if (regions.stats()[k].shape(static_cast<int>(j))(radii[j]) > 0.0) ++counts[k];
    }
  }
  return counts;
}

void write_moduli_csv(std::ostream& os, const ModuliSample& sample) {
  os << "j,r\n";
  char buf[64];
  for (std::size_t j = 0; j < sample.radii.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", j, sample.radii[j]);
    os << buf;
  }
}

}  // namespace outpost
