#include "outpost/heine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>
#include <unordered_map>

#include "outpost/error.hpp"
#include "outpost/rng.hpp"

namespace outpost {

namespace {

constexpr int kMaxSites = 10'000'000;

// log(1 + sum_k exp(a_k)) with one max-subtraction.
double log1p_sum_exp(std::span<const double> a) {
  double mx = 0.0;
  for (double v : a) mx = std::max(mx, v);
  double s = std::exp(-mx);
  for (double v : a) s += std::exp(v - mx);
  return mx + std::log(s);
}

// log(theta_k q_k^j) for each k.
std::vector<double> log_odds(const HeineParams& params, int j) {
  std::vector<double> a(params.m());
  for (int k = 0; k < params.m(); ++k) {
    a[k] = std::log(params.thetas()[k]) + j * std::log(params.qs()[k]);
  }
  return a;
}

// Upper bound on sum_{j > J} sum_k weight_k theta_k q_k^j.
double geometric_tail(const HeineParams& params, int J,
                      std::span<const double> weight = {}) {
  double t = 0.0;
  for (int k = 0; k < params.m(); ++k) {
    const double q = params.qs()[k];
    const double w = weight.empty() ? 1.0 : weight[k];
    t += w * params.thetas()[k] * std::exp((J + 1.0) * std::log(q)) / (1.0 - q);
  }
  return t;
}

int tail_index(const HeineParams& params, double tail,
               std::span<const double> weight = {}) {
  for (int J = 0; J < kMaxSites; ++J) {
    if (geometric_tail(params, J, weight) < tail) return J;
  }
  throw NumericError("site truncation did not converge; q too close to 1");
}

// log prod_{j > J} P(Y_j = 0).
double log_prob_empty_tail(const HeineParams& params, int J) {
  const int stop = tail_index(params, 1e-18);
  double s = 0.0;
  for (int j = J + 1; j <= stop; ++j) s += log1p_sum_exp(log_odds(params, j));
  return -s;
}

}  // namespace

HeineParams HeineParams::validate(std::span<const double> thetas,
                                  std::span<const double> qs) {
  if (thetas.empty() || qs.empty()) {
    throw InvalidArgument("parameter sequences must be nonempty");
  }
  if (thetas.size() != qs.size()) {
    throw InvalidArgument("theta and q length mismatch");
  }
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    if (!std::isfinite(thetas[k]) || !std::isfinite(qs[k])) {
      throw InvalidArgument("non-finite parameter");
    }
    if (thetas[k] <= 0.0) throw InvalidArgument("theta must be positive");
    if (qs[k] <= 0.0 || qs[k] >= 1.0) throw InvalidArgument("q out of range");
  }
  HeineParams p;
  p.thetas_.assign(thetas.begin(), thetas.end());
  p.qs_.assign(qs.begin(), qs.end());
  return p;
}

SiteDistribution site_probabilities(const HeineParams& params, int j) {
  if (j < 0) throw InvalidArgument("site index must be nonnegative");
  const auto a = log_odds(params, j);
  const double L = log1p_sum_exp(a);
  SiteDistribution d{j, std::vector<double>(params.m() + 1)};
  d.probs[0] = std::exp(-L);
  for (int k = 0; k < params.m(); ++k) d.probs[k + 1] = std::exp(a[k] - L);
  return d;
}

int truncation_index(const HeineParams& params, double tail) {
  return tail_index(params, tail);
}

double log_partition(const HeineParams& params) {
  const int stop = tail_index(params, 1e-18);
  double s = 0.0;
  for (int j = 0; j <= stop; ++j) s += log1p_sum_exp(log_odds(params, j));
  return s;
}

CountLaw pmf_table(const HeineParams& params, double tail_tol,
                   const PmfOptions& options) {
  if (!(tail_tol > 0.0 && tail_tol < 1.0)) {
    throw InvalidArgument("tail tolerance must lie in (0, 1)");
  }
  const int J = tail_index(params, 0.5 * tail_tol);
  std::vector<SiteDistribution> sites;
  sites.reserve(J + 1);
  for (int j = 0; j <= J; ++j) sites.push_back(site_probabilities(params, j));
  const double keep_tail = std::exp(log_prob_empty_tail(params, J));

  int cap = std::min(J + 1, 32);
  while (true) {
    CategoricalAccumulator acc(params.m(), cap, options.entry_budget);
    for (const auto& s : sites) acc.add_site(s.probs);
    if (acc.overflow() > 0.5 * tail_tol && cap < J + 1) {
      cap = std::min(J + 1, 2 * cap);
      continue;
    }
    // Restrict to the event that no site beyond J is occupied.
    std::vector<double> rescale(params.m() + 1, 0.0);
    rescale[0] = keep_tail;
    acc.add_site(rescale);
    CountLaw law = acc.to_law(0.0, options.cell_floor);
    if (law.mass_deficit() > tail_tol) {
      throw NumericError("pmf table deficit exceeds the requested tolerance");
    }
    return law;
  }
}

PointProbability pmf_point(const HeineParams& params, std::span<const int> alpha,
                           double tail_tol, std::size_t budget) {
  const int m = params.m();
  if (static_cast<int>(alpha.size()) != m) {
    throw InvalidArgument("multi-index arity mismatch");
  }
  for (int a : alpha) {
    if (a < 0) throw InvalidArgument("multi-index entries must be nonnegative");
  }
  if (!(tail_tol > 0.0 && tail_tol < 1.0)) {
    throw InvalidArgument("tail tolerance must lie in (0, 1)");
  }
  const int J = tail_index(params, 0.5 * tail_tol);
  int total = 0;
  for (int a : alpha) total += a;
  if (total > J + 1) {
    // Disjoint sets of these sizes do not fit below the truncation.
    return {0.0, 1.0 - std::exp(log_prob_empty_tail(params, J))};
  }

  std::vector<std::size_t> stride(m);
  std::size_t box = 1;
  for (int k = m - 1; k >= 0; --k) {
    stride[k] = box;
    box *= static_cast<std::size_t>(alpha[k]) + 1;
  }
  if (static_cast<double>(box) * (J + 1) > static_cast<double>(budget)) {
    throw BudgetExceeded("pmf_point enumeration budget exceeded");
  }

  // coef[beta] = sum over disjoint families within sites 0..j with
  // |J_k| = beta_k of prod theta_k q_k^(sum J_k), scaled by exp(-log_scale).
  std::vector<double> coef(box, 0.0);
  coef[0] = 1.0;
  double log_scale = 0.0;
  std::vector<int> beta(m);
  for (int j = 0; j <= J; ++j) {
    std::vector<double> w(m);
    for (int k = 0; k < m; ++k) {
      w[k] = params.thetas()[k] * std::pow(params.qs()[k], j);
    }
    for (std::size_t f = box; f-- > 0;) {
      std::size_t rem = f;
      for (int k = 0; k < m; ++k) {
        beta[k] = static_cast<int>(rem / stride[k]);
        rem %= stride[k];
      }
      double add = 0.0;
      for (int k = 0; k < m; ++k) {
        if (beta[k] > 0) add += w[k] * coef[f - stride[k]];
      }
      coef[f] += add;
    }
    const double mx = *std::max_element(coef.begin(), coef.end());
    if (mx > 1e100) {
      for (double& c : coef) c /= mx;
      log_scale += std::log(mx);
    }
  }
  const double num = coef[box - 1];
  const double bound = 1.0 - std::exp(log_prob_empty_tail(params, J));
  if (num <= 0.0) return {0.0, bound};
  return {std::exp(std::log(num) + log_scale - log_partition(params)), bound};
}

double log_mgf(const HeineParams& params, std::span<const double> s) {
  const int m = params.m();
  if (static_cast<int>(s.size()) != m) {
    throw InvalidArgument("mgf argument arity mismatch");
  }
  std::vector<double> weight(m);
  for (int k = 0; k < m; ++k) {
    if (!std::isfinite(s[k])) throw InvalidArgument("mgf argument not finite");
    if (s[k] > 700.0) throw InvalidArgument("mgf argument too large (s > 700)");
    weight[k] = std::exp(s[k]) + 1.0;
  }
  const int J = tail_index(params, 1e-16, weight);
  double acc = 0.0;
  std::vector<double> shifted(m);
  for (int j = 0; j <= J; ++j) {
    const auto a = log_odds(params, j);
    for (int k = 0; k < m; ++k) shifted[k] = a[k] + s[k];
    acc += log1p_sum_exp(shifted) - log1p_sum_exp(a);
  }
  return acc;
}

double mgf(const HeineParams& params, std::span<const double> s) {
  return std::exp(log_mgf(params, s));
}

std::vector<double> mean_vector(const HeineParams& params) {
  const int J = tail_index(params, 1e-17);
  std::vector<double> mu(params.m(), 0.0);
  for (int j = 0; j <= J; ++j) {
    const auto d = site_probabilities(params, j);
    for (int k = 0; k < params.m(); ++k) mu[k] += d.probs[k + 1];
  }
  return mu;
}

std::vector<double> variance_vector(const HeineParams& params) {
  const int J = tail_index(params, 1e-17);
  std::vector<double> v(params.m(), 0.0);
  for (int j = 0; j <= J; ++j) {
    const auto d = site_probabilities(params, j);
    for (int k = 0; k < params.m(); ++k) {
      v[k] += d.probs[k + 1] * (1.0 - d.probs[k + 1]);
    }
  }
  return v;
}

double covariance(const HeineParams& params, int p, int q) {
  if (p == q) throw InvalidArgument("covariance requires distinct coordinates");
  if (p < 0 || q < 0 || p >= params.m() || q >= params.m()) {
    throw InvalidArgument("coordinate out of range");
  }
  const int J = tail_index(params, 1e-17);
  double c = 0.0;
  for (int j = 0; j <= J; ++j) {
    const auto d = site_probabilities(params, j);
    c -= d.probs[p + 1] * d.probs[q + 1];
  }
  return c;
}

HeineSample sample(const HeineParams& params, int count, std::uint64_t seed,
                   double tail_tol, int threads) {
  if (count < 1) throw InvalidArgument("sample count must be positive");
  if (!(tail_tol > 0.0 && tail_tol < 1.0)) {
    throw InvalidArgument("tail tolerance must lie in (0, 1)");
  }
  const int J = tail_index(params, tail_tol);
  const int m = params.m();
  // Cumulative site tables.
  std::vector<std::vector<double>> cum(J + 1);
  for (int j = 0; j <= J; ++j) {
    auto d = site_probabilities(params, j);
    std::partial_sum(d.probs.begin(), d.probs.end(), d.probs.begin());
    cum[j] = std::move(d.probs);
  }

  HeineSample out;
  out.truncation = J;
  out.tv_bound = geometric_tail(params, J);
  out.counts.assign(count, MultiIndex(m, 0));

  auto work = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i))));
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      auto& c = out.counts[i];
      for (int j = 0; j <= J; ++j) {
        const double u = unif(rng);
        const auto& cj = cum[j];
        for (int k = 1; k <= m; ++k) {
          if (u >= cj[k - 1] && u < cj[k]) {
            ++c[k - 1];
            break;
          }
        }
      }
    }
  };
  threads = std::clamp(threads, 1, count);
  if (threads == 1) {
    work(0, count);
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back(work, count * t / threads, count * (t + 1) / threads);
    }
  }
  return out;
}

void CoordinateMap::check() const {
  if (target < 1) throw InvalidArgument("coordinate map target arity must be positive");
  std::vector<int> hits(target, 0);
  for (const auto* v : {&from_a, &from_b}) {
    for (int t : *v) {
      if (t < 0 || t >= target) {
        throw InvalidArgument("coordinate map sends a coordinate out of range");
      }
      ++hits[t];
    }
  }
  for (int h : hits) {
    if (h == 0) throw InvalidArgument("coordinate map leaves a target coordinate empty");
  }
}

CountLaw convolve_mapped(const CountLaw& a, const CountLaw& b,
                         const CoordinateMap& map) {
  map.check();
  if (static_cast<int>(map.from_a.size()) != a.arity() ||
      static_cast<int>(map.from_b.size()) != b.arity()) {
    throw InvalidArgument("convolution arity mismatch");
  }
  const int m = map.target;
  std::vector<int> cap(m, 0);
  for (int i = 0; i < a.arity(); ++i) cap[map.from_a[i]] += a.cap()[i];
  for (int i = 0; i < b.arity(); ++i) cap[map.from_b[i]] += b.cap()[i];
  std::vector<std::uint64_t> stride(m);
  std::uint64_t s = 1;
  for (int k = m - 1; k >= 0; --k) {
    stride[k] = s;
    s *= static_cast<std::uint64_t>(cap[k]) + 1;
  }

  std::unordered_map<std::uint64_t, double> acc;
  acc.reserve(a.entries().size() * 4);
  for (const auto& ea : a.entries()) {
    std::uint64_t base = 0;
    for (int i = 0; i < a.arity(); ++i) base += stride[map.from_a[i]] * ea.alpha[i];
    for (const auto& eb : b.entries()) {
      std::uint64_t f = base;
      for (int i = 0; i < b.arity(); ++i) f += stride[map.from_b[i]] * eb.alpha[i];
      acc[f] += ea.p * eb.p;
    }
  }
  std::vector<CountEntry> out;
  out.reserve(acc.size());
  for (const auto& [f, p] : acc) {
    MultiIndex alpha(m);
    std::uint64_t rem = f;
    for (int k = 0; k < m; ++k) {
      alpha[k] = static_cast<int>(rem / stride[k]);
      rem %= stride[k];
    }
    out.push_back({std::move(alpha), p});
  }
  const double da = a.mass_deficit();
  const double db = b.mass_deficit();
  return CountLaw(m, std::move(out), da + db - da * db, std::move(cap));
}

double q_pochhammer(double z, double q, int k) {
  double p = 1.0;
  double zq = z;
  for (int i = 0; i < k; ++i) {
    p *= 1.0 - zq;
    zq *= q;
  }
  return p;
}

double q_pochhammer_inf(double z, double q) {
  double logp = 0.0;
  double zq = z;
  while (std::abs(zq) > 1e-18) {
    logp += std::log1p(-zq);
    zq *= q;
  }
  return std::exp(logp);
}

double heine_1d_pmf(double theta, double q, int k) {
  const double logp = 0.5 * k * (k - 1.0) * std::log(q) + k * std::log(theta) -
                      std::log(q_pochhammer(q, q, k)) -
                      std::log(q_pochhammer_inf(-theta, q));
  return std::exp(logp);
}

}  // namespace outpost
