#include "outpost/count_law.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "outpost/error.hpp"

namespace outpost {

namespace {

bool lex_less(const CountEntry& a, const CountEntry& b) {
  return a.alpha < b.alpha;
}

// Advances `idx` through the box [0, extent] in lexicographic order (last
// coordinate fastest). Returns false after the last index.
bool next_index(std::vector<int>& idx, const std::vector<int>& extent) {
  for (int k = static_cast<int>(idx.size()) - 1; k >= 0; --k) {
    if (idx[k] < extent[k]) {
      ++idx[k];
      return true;
    }
    idx[k] = 0;
  }
  return false;
}

}  // namespace

CountLaw::CountLaw(int m, std::vector<CountEntry> entries, double mass_deficit,
                   std::vector<int> cap)
    : m_(m), mass_deficit_(mass_deficit), cap_(std::move(cap)) {
  if (m < 1) throw InvalidArgument("count law arity must be positive");
  if (static_cast<int>(cap_.size()) != m) {
    throw InvalidArgument("cap must have one entry per coordinate");
  }
  if (!(mass_deficit >= 0.0)) {
    throw InvalidArgument("mass deficit must be nonnegative");
  }
  std::sort(entries.begin(), entries.end(), lex_less);
  for (auto& e : entries) {
    if (static_cast<int>(e.alpha.size()) != m) {
      throw InvalidArgument("entry arity does not match law arity");
    }
    if (!entries_.empty() && entries_.back().alpha == e.alpha) {
      entries_.back().p += e.p;
    } else {
      entries_.push_back(std::move(e));
    }
  }
}

CountLaw CountLaw::point_mass(MultiIndex alpha) {
  const int m = static_cast<int>(alpha.size());
  std::vector<int> cap = alpha;
  return CountLaw(m, {CountEntry{std::move(alpha), 1.0}}, 0.0, std::move(cap));
}

double CountLaw::probability(std::span<const int> alpha) const {
  CountEntry key{MultiIndex(alpha.begin(), alpha.end()), 0.0};
  auto it = std::lower_bound(entries_.begin(), entries_.end(), key, lex_less);
  if (it != entries_.end() && it->alpha == key.alpha) return it->p;
  return 0.0;
}

double CountLaw::total_mass() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.p;
  return s;
}

std::vector<double> CountLaw::mean() const {
  std::vector<double> mu(m_, 0.0);
  for (const auto& e : entries_) {
    for (int k = 0; k < m_; ++k) mu[k] += e.p * e.alpha[k];
  }
  return mu;
}

std::vector<std::vector<double>> CountLaw::covariance_matrix() const {
  const auto mu = mean();
  std::vector<std::vector<double>> c(m_, std::vector<double>(m_, 0.0));
  for (const auto& e : entries_) {
    for (int a = 0; a < m_; ++a) {
      const double da = e.alpha[a] - mu[a];
      for (int b = 0; b < m_; ++b) c[a][b] += e.p * da * (e.alpha[b] - mu[b]);
    }
  }
  return c;
}

double CountLaw::mgf(std::span<const double> s) const {
  if (static_cast<int>(s.size()) != m_) {
    throw InvalidArgument("mgf argument arity mismatch");
  }
  double total = 0.0;
  for (const auto& e : entries_) {
    double dot = 0.0;
    for (int k = 0; k < m_; ++k) dot += s[k] * e.alpha[k];
    total += e.p * std::exp(dot);
  }
  return total;
}

CountLaw CountLaw::marginal(int k) const {
  if (k < 0 || k >= m_) throw InvalidArgument("marginal coordinate out of range");
  std::vector<double> p(cap_[k] + 1, 0.0);
  for (const auto& e : entries_) p[e.alpha[k]] += e.p;
  std::vector<CountEntry> out;
  for (int a = 0; a <= cap_[k]; ++a) {
    if (p[a] > 0.0) out.push_back({{a}, p[a]});
  }
  return CountLaw(1, std::move(out), mass_deficit_, {cap_[k]});
}

CountLaw CountLaw::pruned(double budget) const {
  std::vector<std::size_t> order(entries_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return entries_[a].p < entries_[b].p;
  });
  std::vector<bool> keep(entries_.size(), true);
  double dropped = 0.0;
  for (std::size_t i : order) {
    if (dropped + entries_[i].p > budget) break;
    dropped += entries_[i].p;
    keep[i] = false;
  }
  std::vector<CountEntry> out;
  out.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (keep[i]) out.push_back(entries_[i]);
  }
  return CountLaw(m_, std::move(out), mass_deficit_ + dropped, cap_);
}

TvInterval tv_distance(const CountLaw& a, const CountLaw& b) {
  if (a.arity() != b.arity()) throw InvalidArgument("tv_distance arity mismatch");
  const auto ea = a.entries();
  const auto eb = b.entries();
  double l1 = 0.0;
  std::size_t i = 0, j = 0;
  while (i < ea.size() || j < eb.size()) {
    if (j == eb.size() || (i < ea.size() && ea[i].alpha < eb[j].alpha)) {
      l1 += ea[i++].p;
    } else if (i == ea.size() || eb[j].alpha < ea[i].alpha) {
      l1 += eb[j++].p;
    } else {
      l1 += std::abs(ea[i++].p - eb[j++].p);
    }
  }
  const double half = 0.5 * l1;
  const double slack = 0.5 * (a.mass_deficit() + b.mass_deficit());
  return {std::clamp(half - slack, 0.0, 1.0), std::clamp(half + slack, 0.0, 1.0)};
}

CategoricalAccumulator::CategoricalAccumulator(int m, int cap,
                                               std::size_t entry_budget)
    : m_(m), cap_(cap), stride_(m), extent_(m, 0) {
  if (m < 1) throw InvalidArgument("accumulator arity must be positive");
  if (cap < 0) throw InvalidArgument("cap must be nonnegative");
  double cells = 1.0;
  for (int k = 0; k < m; ++k) cells *= cap + 1.0;
  if (cells > static_cast<double>(entry_budget)) {
    throw BudgetExceeded("count table of " + std::to_string(cells) +
                         " cells exceeds the entry budget");
  }
  std::size_t s = 1;
  for (int k = m - 1; k >= 0; --k) {
    stride_[k] = s;
    s *= static_cast<std::size_t>(cap) + 1;
  }
  table_.assign(s, 0.0);
  table_[0] = 1.0;
}

std::size_t CategoricalAccumulator::flat(std::span<const int> alpha) const {
  std::size_t f = 0;
  for (int k = 0; k < m_; ++k) f += stride_[k] * alpha[k];
  return f;
}

void CategoricalAccumulator::add_site(std::span<const double> probs) {
  if (static_cast<int>(probs.size()) != m_ + 1) {
    throw InvalidArgument("site distribution arity mismatch");
  }
  ++sites_;
  bool any = false;
  for (int k = 1; k <= m_; ++k) any = any || probs[k] > 0.0;
  if (!any) {
    // Category 0 only; rescale in case probs[0] < 1 due to rounding.
    if (probs[0] != 1.0) {
      std::vector<int> idx(m_, 0);
      do {
        table_[flat(idx)] *= probs[0];
      } while (next_index(idx, extent_));
    }
    return;
  }

  // Mass pushed past the cap.
  for (int k = 0; k < m_; ++k) {
    if (extent_[k] < cap_ || probs[k + 1] == 0.0) continue;
    std::vector<int> idx(m_, 0);
    double edge = 0.0;
    do {
      if (idx[k] == cap_) edge += table_[flat(idx)];
    } while (next_index(idx, extent_));
    overflow_ += probs[k + 1] * edge;
  }

  std::vector<int> grown = extent_;
  for (int k = 0; k < m_; ++k) {
    if (probs[k + 1] > 0.0) grown[k] = std::min(cap_, extent_[k] + 1);
  }

  // In-place update in reverse lexicographic order: cell alpha reads only
  // cells alpha - e_k, which precede it and are still unmodified.
  std::vector<int> idx = grown;
  while (true) {
    const std::size_t f = flat(idx);
    bool inside_old = true;
    for (int k = 0; k < m_; ++k) inside_old = inside_old && idx[k] <= extent_[k];
    double v = inside_old ? probs[0] * table_[f] : 0.0;
    for (int k = 0; k < m_; ++k) {
      if (idx[k] == 0 || probs[k + 1] == 0.0) continue;
      // Source must lie in the old box.
      bool src_ok = idx[k] - 1 <= extent_[k];
      for (int l = 0; l < m_ && src_ok; ++l) {
        if (l != k) src_ok = idx[l] <= extent_[l];
      }
      if (src_ok) v += probs[k + 1] * table_[f - stride_[k]];
    }
    table_[f] = v;

    int k = m_ - 1;
    while (k >= 0 && idx[k] == 0) {
      idx[k] = grown[k];
      --k;
    }
    if (k < 0) break;
    --idx[k];
  }
  extent_ = grown;
}

CountLaw CategoricalAccumulator::to_law(double extra_deficit,
                                        double cell_floor) const {
  std::vector<CountEntry> out;
  double kept = 0.0;
  std::vector<int> idx(m_, 0);
  do {
    const double p = table_[flat(idx)];
    if (p >= cell_floor) {
      out.push_back({idx, p});
      kept += p;
    }
  } while (next_index(idx, extent_));
  // Everything not kept (overflow, floor-dropped cells, and any truncation
  // mass the caller accounts for) is deficit.
  const double deficit = std::max(0.0, 1.0 - kept - extra_deficit) + extra_deficit;
  std::vector<int> cap(m_, cap_);
  return CountLaw(m_, std::move(out), deficit, std::move(cap));
}

void to_json(nlohmann::json& j, const CountLaw& law) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : law.entries()) {
    entries.push_back({{"alpha", e.alpha}, {"p", e.p}});
  }
  j = nlohmann::json{{"m", law.arity()},
                     {"entries", std::move(entries)},
                     {"mass_deficit", law.mass_deficit()},
                     {"cap", law.cap()}};
}

void from_json(const nlohmann::json& j, CountLaw& law) {
  const int m = j.at("m").get<int>();
  std::vector<CountEntry> entries;
  for (const auto& e : j.at("entries")) {
    entries.push_back({e.at("alpha").get<MultiIndex>(), e.at("p").get<double>()});
  }
  std::vector<int> cap;
  if (j.at("cap").is_array()) {
    cap = j.at("cap").get<std::vector<int>>();
  } else {
    cap.assign(m, j.at("cap").get<int>());
  }
  law = CountLaw(m, std::move(entries), j.at("mass_deficit").get<double>(),
                 std::move(cap));
}

}  // namespace outpost
