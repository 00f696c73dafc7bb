#include "outpost/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>

#include <nlohmann/json.hpp>

#include "outpost/error.hpp"
#include "outpost/heine.hpp"
#include "outpost/limit.hpp"

namespace outpost {
namespace {

using nlohmann::json;

Interval interval_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidArgument("interval must be [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

// All vectors in values^dim, first coordinate slowest.
std::vector<std::vector<double>> s_grid(const std::vector<double>& values, int dim) {
  std::vector<std::vector<double>> out;
  std::vector<int> idx(dim, 0);
  const int base = static_cast<int>(values.size());
  while (true) {
    std::vector<double> s(dim);
    for (int k = 0; k < dim; ++k) s[k] = values[idx[k]];
    out.push_back(std::move(s));
    int k = dim - 1;
    while (k >= 0 && ++idx[k] == base) idx[k--] = 0;
    if (k < 0) break;
  }
  return out;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void ExperimentConfig::validate() const {
  if (case_name != "case1" && case_name != "case2" && case_name != "ginibre") {
    throw InvalidArgument("case must be case1, case2 or ginibre");
  }
  if (n.empty()) throw InvalidArgument("n schedule is empty");
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (n[i] < 2) throw InvalidArgument("n must be at least 2");
    if (i > 0 && n[i] <= n[i - 1]) throw InvalidArgument("n schedule must be strictly increasing");
  }
  if (s_values.empty()) throw InvalidArgument("s grid is empty");
  const double bound = std::log(static_cast<double>(n.front()));
  for (double s : s_values) {
    if (!(std::abs(s) <= bound)) throw InvalidArgument("|s| must not exceed log n");
  }
  if (eps && !(*eps > 0.0)) throw InvalidArgument("eps must be positive");
  if (!(tail_tol > 0.0 && tail_tol < 1.0)) throw InvalidArgument("tail_tol must lie in (0, 1)");
  if (cap < 1) throw InvalidArgument("cap must be positive");
  if ((!regions.empty() || !bumps.empty()) && case_name != "case1") {
    throw InvalidArgument("explicit regions and bumps are supported for case1 only");
  }
  if (case_name == "case2" && components.size() != 2) {
    throw InvalidArgument("case2 needs two components");
  }
  quad.validate();
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  ExperimentConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "case") {
        c.case_name = v.get<std::string>();
      } else if (key == "t") {
        c.t = v.get<std::vector<double>>();
      } else if (key == "w") {
        c.w = v.get<std::vector<double>>();
      } else if (key == "components") {
        c.components.clear();
        for (const auto& iv : v) c.components.push_back(interval_from(iv));
      } else if (key == "M0") {
        c.M0 = v.get<double>();
      } else if (key == "margin") {
        c.margin = v.get<double>();
      } else if (key == "n") {
        c.n = v.is_array() ? v.get<std::vector<int>>() : std::vector{v.get<int>()};
      } else if (key == "C") {
        c.quad.C = v.get<double>();
      } else if (key == "rel_tol") {
        c.quad.rel_tol = v.get<double>();
      } else if (key == "mode") {
        c.quad.mode = parse_quad_mode(v.get<std::string>());
      } else if (key == "threads") {
        c.quad.threads = v.get<int>();
      } else if (key == "regions") {
        c.regions.clear();
        for (const auto& iv : v) c.regions.push_back(interval_from(iv));
      } else if (key == "bumps") {
        c.bumps.clear();
        for (const auto& b : v) c.bumps.push_back({b.at("center").get<double>(), b.at("eps").get<double>()});
      } else if (key == "eps") {
        c.eps = v.get<double>();
      } else if (key == "s") {
        c.s_values = v.get<std::vector<double>>();
      } else if (key == "tail_tol") {
        c.tail_tol = v.get<double>();
      } else if (key == "cap") {
        c.cap = v.get<int>();
      } else if (key == "seed") {
        c.seed = v.get<std::uint64_t>();
      } else {
        throw InvalidArgument("unknown config key: " + key);
      }
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed config: ") + e.what());
  }
  return c;
}

void to_json(json& j, const ExperimentConfig& c) {
  json comps = json::array(), regions = json::array(), bumps = json::array();
  for (const auto& iv : c.components) comps.push_back({iv.lo, iv.hi});
  for (const auto& iv : c.regions) regions.push_back({iv.lo, iv.hi});
  for (const auto& b : c.bumps) bumps.push_back({{"center", b.center}, {"eps", b.eps}});
  j = {{"case", c.case_name},
       {"t", c.t},
       {"w", c.w},
       {"components", comps},
       {"M0", c.M0},
       {"margin", c.margin},
       {"n", c.n},
       {"C", c.quad.C},
       {"rel_tol", c.quad.rel_tol},
       {"mode", to_string(c.quad.mode)},
       {"regions", regions},
       {"bumps", bumps},
       {"s", c.s_values},
       {"tail_tol", c.tail_tol},
       {"cap", c.cap},
       {"seed", c.seed}};
  if (c.eps) j["eps"] = *c.eps;
}

RadialPotential build_potential(const ExperimentConfig& c) {
  if (c.case_name == "ginibre") return ginibre();
  if (c.case_name == "case1") return build_case1(c.t, c.w, c.margin);
  if (c.components.size() != 2) throw InvalidArgument("case2 needs two components");
  return build_case2(c.components[0], c.components[1], c.M0, c.t, c.w, c.margin);
}

StatisticSet statistics_for(const ExperimentConfig& c, const DropletData& data, int n) {
  const double eps0 = default_eps(data);
  const double eps = c.eps.value_or(eps0);
  // default_eps is a fifth of the smallest gap; 2 eps neighbourhoods must not meet.
  if (4.0 * eps >= 5.0 * eps0) {
    throw InvalidArgument("eps too large: 2 eps neighbourhoods of special radii overlap");
  }
  StatisticSet st{outpost_regions(data, eps, n, false), outpost_regions(data, eps, n, true)};
  const int m = static_cast<int>(data.outposts.size());
  if (!c.regions.empty()) {
    if (static_cast<int>(c.regions.size()) != m) throw InvalidArgument("one region per outpost");
    st.hard = RegionSet::hard(c.regions);
  }
  if (!c.bumps.empty()) {
    if (static_cast<int>(c.bumps.size()) != m) throw InvalidArgument("one bump per outpost");
    st.smooth = RegionSet::smooth(c.bumps);
  }
  return st;
}

ConvergenceRow converge_row(const ExperimentConfig& c, const RadialPotential& pot, int n) {
  const auto start = std::chrono::steady_clock::now();
  if (c.case_name == "ginibre") throw InvalidArgument("converge needs case1 or case2");
  const DropletData& data = *pot.declared();
  const StatisticSet st = statistics_for(c, data, n);
  const FiniteNEngine engine(pot, n, c.quad);

  ConvergenceRow row;
  row.n = n;
  std::function<double(const std::vector<double>&)> predicted_mgf;
  if (c.case_name == "case1") {
    const Case1Limit lim = case1(data, pot);
    row.predicted = pmf_table(lim.params, c.tail_tol);
    row.limit = lim;
    predicted_mgf = [lim](const std::vector<double>& s) { return case1_predicted_mgf(lim, s); };
  } else {
    const Case2Limit lim = case2(data, pot, n);
    row.x_n = lim.x_n;
    row.predicted = case2_predicted_law(lim, c.tail_tol);
    row.limit = lim;
    predicted_mgf = [lim](const std::vector<double>& s) { return case2_predicted_mgf(lim, s); };
  }
  row.limit["n"] = n;
  row.limit["x_n"] = row.x_n;

  row.exact = engine.exact_count_law(st.hard, c.cap);
  row.tv = tv_distance(row.exact, row.predicted);
  for (const auto& s : s_grid(c.s_values, st.smooth.size())) {
    const double want = predicted_mgf(s);
    const double smooth = engine.joint_mgf(s, st.smooth).value;
    const double hard = engine.joint_mgf(s, st.hard).value;
    row.mgf_err_max = std::max(row.mgf_err_max, std::abs(smooth - want) / want);
    row.mgf_err_hard_max = std::max(row.mgf_err_hard_max, std::abs(hard - want) / want);
  }
  if (!std::isfinite(row.mgf_err_max) || !std::isfinite(row.mgf_err_hard_max) ||
      !std::isfinite(row.tv.upper)) {
    throw NumericError("non-finite error measure at n = " + std::to_string(n));
  }
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

ConvergenceReport converge(const ExperimentConfig& c) {
  c.validate();
  if (c.case_name == "ginibre") throw InvalidArgument("converge needs case1 or case2");
  const RadialPotential pot = build_potential(c);
  ConvergenceReport report{c, {}};
  for (int n : c.n) report.rows.push_back(converge_row(c, pot, n));
  return report;
}

void write_converge_csv(std::ostream& os, const ConvergenceReport& report) {
  os << "n,tv_lo,tv_hi,mgf_err_max,seconds\n";
  for (const auto& r : report.rows) {
    os << r.n << ',' << format_number(r.tv.lower) << ',' << format_number(r.tv.upper) << ','
       << format_number(r.mgf_err_max) << ',' << format_number(r.seconds) << '\n';
  }
}

void write_pmf_csv(std::ostream& os, const ConvergenceRow& row) {
  const int m = row.exact.arity();
  std::map<MultiIndex, std::pair<double, double>> cells;
  for (const auto& e : row.exact.entries()) cells[e.alpha].first = e.p;
  for (const auto& e : row.predicted.entries()) cells[e.alpha].second = e.p;
  for (int k = 0; k < m; ++k) os << "alpha_" << k << ',';
  os << "p_exact,p_predicted\n";
  for (const auto& [alpha, p] : cells) {
    if (p.first < 1e-16 && p.second < 1e-16) continue;
    for (int a : alpha) os << a << ',';
    os << format_number(p.first) << ',' << format_number(p.second) << '\n';
  }
}

void to_json(json& j, const ConvergenceRow& r) {
  j = {{"n", r.n},
       {"x_n", r.x_n},
       {"tv_lo", r.tv.lower},
       {"tv_hi", r.tv.upper},
       {"mgf_err_max", r.mgf_err_max},
       {"mgf_err_hard_max", r.mgf_err_hard_max},
       {"seconds", r.seconds},
       {"exact_deficit", r.exact.mass_deficit()},
       {"predicted_deficit", r.predicted.mass_deficit()},
       {"limit", r.limit}};
}

void to_json(json& j, const ConvergenceReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    json row = r;
    json echo = report.config;
    echo["n"] = r.n;
    row["config"] = echo;
    rows.push_back(row);
  }
  j = {{"config", report.config}, {"rows", rows}};
}

}  // namespace outpost
