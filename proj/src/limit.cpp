#include "outpost/limit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "outpost/error.hpp"

namespace outpost {
namespace {

// Weights w_k(j) = vartheta_k rho_k^(2j+1) of one Heine family.
struct Family {
  std::vector<double> vartheta;
  std::vector<double> rho;

  int size() const { return static_cast<int>(rho.size()); }

  // Upper bound on sum_{j' >= j} sum_k w_k(j').
  double tail(int j) const {
    double t = 0.0;
    for (int k = 0; k < size(); ++k) {
      t += vartheta[k] * std::pow(rho[k], 2.0 * j + 1.0) / (1.0 - rho[k] * rho[k]);
    }
    return t;
  }
};

constexpr double kTail = 1e-17;
constexpr int kMaxSites = 1'000'000;

Moments family_moments(const Family& f) {
  const int m = f.size();
  Moments mo{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0),
             std::vector<std::vector<double>>(m, std::vector<double>(m, 0.0))};
  std::vector<double> pw(m), pi(m);
  for (int k = 0; k < m; ++k) pw[k] = f.vartheta[k] * f.rho[k];
  for (int j = 0; j < kMaxSites; ++j) {
    double denom = 1.0;
    for (int k = 0; k < m; ++k) denom += pw[k];
    for (int k = 0; k < m; ++k) pi[k] = pw[k] / denom;
    for (int p = 0; p < m; ++p) {
      mo.mean[p] += pi[p];
      mo.variance[p] += pi[p] * (1.0 - pi[p]);
      for (int q = 0; q < m; ++q) {
        if (q != p) mo.covariance[p][q] -= pi[p] * pi[q];
      }
    }
    for (int k = 0; k < m; ++k) pw[k] *= f.rho[k] * f.rho[k];
    if (f.tail(j + 1) < kTail) break;
  }
  for (int p = 0; p < m; ++p) mo.covariance[p][p] = mo.variance[p];
  return mo;
}

// sum_j log((1 + sum_k e^{s_k} w_k(j)) / (1 + sum_k w_k(j))).
double family_log_mgf(const Family& f, std::span<const double> s) {
  const int m = f.size();
  std::vector<double> pw(m), es(m);
  double emax = 1.0;
  for (int k = 0; k < m; ++k) {
    pw[k] = f.vartheta[k] * f.rho[k];
    es[k] = std::exp(s[k]);
    emax = std::max(emax, es[k]);
  }
  double acc = 0.0;
  for (int j = 0; j < kMaxSites; ++j) {
    double num = 1.0, den = 1.0;
    for (int k = 0; k < m; ++k) {
      num += es[k] * pw[k];
      den += pw[k];
    }
    acc += std::log1p((num - den) / den);
    for (int k = 0; k < m; ++k) pw[k] *= f.rho[k] * f.rho[k];
    if (emax * f.tail(j + 1) < kTail) break;
  }
  return acc;
}

HeineParams to_params(const Family& f) {
  std::vector<double> th(f.size()), q(f.size());
  for (int k = 0; k < f.size(); ++k) {
    th[k] = f.vartheta[k] * f.rho[k];
    q[k] = f.rho[k] * f.rho[k];
  }
  return HeineParams::validate(th, q);
}

double positive_laplacian(const RadialPotential& pot, double r) {
  const double d = laplacian(pot, r);
  if (!(d > 0.0)) {
    throw InvalidArgument("Laplacian not positive at r = " + std::to_string(r));
  }
  return d;
}

void require_increasing(const std::vector<double>& t) {
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (!(t[k] > t[k - 1])) throw InvalidArgument("outposts must be strictly increasing");
  }
}

Moments remap(const Moments& a, const std::vector<int>& to, int m) {
  Moments out{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0),
              std::vector<std::vector<double>>(m, std::vector<double>(m, 0.0))};
  for (std::size_t p = 0; p < to.size(); ++p) {
    out.mean[to[p]] += a.mean[p];
    for (std::size_t q = 0; q < to.size(); ++q) {
      out.covariance[to[p]][to[q]] += a.covariance[p][q];
    }
  }
  for (int p = 0; p < m; ++p) out.variance[p] = out.covariance[p][p];
  return out;
}

Family tilde_family(const Case2Limit& l) { return {l.tilde_vartheta, l.tilde_rho}; }
Family hat_family(const Case2Limit& l) { return {l.hat_vartheta, l.hat_rho}; }

}  // namespace

Case1Limit case1(const DropletData& data, const RadialPotential& pot) {
  if (data.case_tag != CaseTag::case1) throw InvalidArgument("droplet data is not case 1");
  if (data.components.empty()) throw InvalidArgument("droplet has no components");
  if (data.outposts.empty()) throw InvalidArgument("no outposts");
  require_increasing(data.outposts);
  const double b0 = data.components.back().hi;
  const double lb = positive_laplacian(pot, b0);
  Family f;
  for (double t : data.outposts) {
    if (!(t > b0)) throw InvalidArgument("outpost must lie outside the droplet (t > b0)");
    f.vartheta.push_back(std::sqrt(lb / positive_laplacian(pot, t)));
    f.rho.push_back(b0 / t);
  }
  return Case1Limit{f.size(), b0, data.outposts, f.vartheta, f.rho, to_params(f)};
}

Moments case1_moments(const Case1Limit& lim) {
  return family_moments({lim.vartheta, lim.rho});
}

double case1_predicted_mgf(const Case1Limit& lim, std::span<const double> s) {
  if (static_cast<int>(s.size()) != lim.m) throw InvalidArgument("s has the wrong length");
  return std::exp(family_log_mgf({lim.vartheta, lim.rho}, s));
}

Case2Limit case2(const DropletData& data, const RadialPotential& pot, int n) {
  if (data.case_tag != CaseTag::case2) throw InvalidArgument("droplet data is not case 2");
  if (n < 2) throw InvalidArgument("n must be at least 2");
  if (data.components.size() != 2 || data.masses.size() != 2) {
    throw InvalidArgument("case 2 needs exactly two components");
  }
  require_increasing(data.outposts);
  const double b0 = data.components[0].hi, a1 = data.components[1].lo;
  const double M0 = data.masses[0];
  if (!(M0 > 0.0 && M0 < 1.0)) throw InvalidArgument("M0 must lie in (0, 1)");
  for (double t : data.outposts) {
    if (!(t > b0 && t < a1)) throw InvalidArgument("outpost must lie in the gap (b0, a1)");
  }

  const int m0 = inner_count(M0, n);
  const double x = std::max(0.0, M0 * n - m0);
  const double lb = positive_laplacian(pot, b0), la = positive_laplacian(pot, a1);
  const double rho0 = b0 / a1;
  Family tilde{{std::sqrt(la / lb) * std::pow(rho0, -2.0 * x)}, {rho0}};
  Family hat;
  for (double t : data.outposts) {
    const double lt = positive_laplacian(pot, t);
    tilde.rho.push_back(t / a1);
    tilde.vartheta.push_back(std::sqrt(la / lt) * std::pow(t / a1, -2.0 * x));
    hat.rho.push_back(b0 / t);
    hat.vartheta.push_back(std::sqrt(lb / lt) * std::pow(b0 / t, 2.0 * x));
  }
  hat.rho.push_back(rho0);
  hat.vartheta.push_back(1.0 / tilde.vartheta[0]);

  const int m = static_cast<int>(data.outposts.size());
  CoordinateMap map{m + 1, {}, {}};
  for (int k = 0; k <= m; ++k) {
    map.from_a.push_back(k);
    map.from_b.push_back(k < m ? k + 1 : 0);
  }
  return Case2Limit{n, m, M0, m0, x, b0, a1, data.outposts, tilde.rho, tilde.vartheta,
                    hat.rho, hat.vartheta, to_params(tilde), to_params(hat), map};
}

CountLaw case2_predicted_law(const Case2Limit& lim, double tail_tol) {
  if (!(tail_tol > 0.0 && tail_tol < 1.0)) throw InvalidArgument("tail_tol must lie in (0, 1)");
  const double part = tail_tol / 4.0;
  const CountLaw a = pmf_table(lim.tilde, part).pruned(part);
  const CountLaw b = pmf_table(lim.hat, part).pruned(part);
  return convolve_mapped(a, b, lim.map);
}

double case2_predicted_log_mgf(const Case2Limit& lim, std::span<const double> s) {
  if (static_cast<int>(s.size()) != lim.m + 1) throw InvalidArgument("s has the wrong length");
  const double bound = std::log(static_cast<double>(lim.n));
  for (double v : s) {
    if (!(std::abs(v) <= bound)) throw InvalidArgument("|s_k| must not exceed log n");
  }
  std::vector<double> sh(lim.m + 1);
  for (int k = 0; k <= lim.m; ++k) sh[k] = s[lim.map.from_b[k]];
  return family_log_mgf(tilde_family(lim), s) + family_log_mgf(hat_family(lim), sh);
}

double case2_predicted_mgf(const Case2Limit& lim, std::span<const double> s) {
  return std::exp(case2_predicted_log_mgf(lim, s));
}

Case2Moments case2_moments(const Case2Limit& lim) {
  Case2Moments r;
  r.tilde = family_moments(tilde_family(lim));
  r.hat = family_moments(hat_family(lim));
  const int m = lim.m + 1;
  const Moments a = remap(r.tilde, lim.map.from_a, m);
  const Moments b = remap(r.hat, lim.map.from_b, m);
  r.combined = a;
  for (int p = 0; p < m; ++p) {
    r.combined.mean[p] += b.mean[p];
    r.combined.variance[p] += b.variance[p];
    for (int q = 0; q < m; ++q) r.combined.covariance[p][q] += b.covariance[p][q];
  }
  r.cross.assign(m, std::vector<double>(m, 0.0));
  return r;
}

void to_json(nlohmann::json& j, const Case1Limit& l) {
  j = {{"case", "case1"},
       {"m", l.m},
       {"b0", l.b0},
       {"t", l.t},
       {"vartheta", l.vartheta},
       {"rho", l.rho},
       {"theta", l.params.thetas()},
       {"q", l.params.qs()}};
}

void to_json(nlohmann::json& j, const Case2Limit& l) {
  j = {{"case", "case2"},
       {"n", l.n},
       {"m", l.m},
       {"M0", l.M0},
       {"m0", l.m0},
       {"x_n", l.x_n},
       {"b0", l.b0},
       {"a1", l.a1},
       {"t", l.t},
       {"tilde_rho", l.tilde_rho},
       {"tilde_vartheta", l.tilde_vartheta},
       {"hat_rho", l.hat_rho},
       {"hat_vartheta", l.hat_vartheta},
       {"tilde_theta", l.tilde.thetas()},
       {"tilde_q", l.tilde.qs()},
       {"hat_theta", l.hat.thetas()},
       {"hat_q", l.hat.qs()},
       {"map", {{"from_tilde", l.map.from_a}, {"from_hat", l.map.from_b}}}};
}

}  // namespace outpost
