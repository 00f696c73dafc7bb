#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "outpost/error.hpp"
#include "outpost/experiment.hpp"
#include "outpost/finite_n.hpp"
#include "outpost/heine.hpp"
#include "outpost/radial_potential.hpp"

using namespace outpost;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kNumeric = 1;
constexpr int kInvalid = 2;

// Flags shared by the potential-driven subcommands; each one overrides the
// config file only when given.
struct PotentialFlags {
  std::string config;
  std::string case_name;
  std::vector<double> t, w, components, s;
  double M0 = 0, margin = 0, C = 0, rel_tol = 0, eps = 0, tail_tol = 0;
  std::vector<int> n;
  int cap = 0, threads = 1;
  std::uint64_t seed = 0;
  std::string quad_mode;
  std::string out;
  std::vector<CLI::Option*> opts;

  void add(CLI::App* app, bool schedule) {
    app->add_option("--config", config, "JSON experiment config")->check(CLI::ExistingFile);
    opts = {
        app->add_option("--case", case_name, "case1, case2 or ginibre"),
        app->add_option("--t", t, "outpost radii")->delimiter(','),
        app->add_option("--w", w, "window half-widths")->delimiter(','),
        app->add_option("--components", components, "a0,b0,a1,b1 (case2)")->delimiter(','),
        app->add_option("--M0", M0, "inner component mass (case2)"),
        app->add_option("--margin", margin, "builder margin"),
        app->add_option("--n", n, schedule ? "n schedule" : "number of particles")->delimiter(','),
        app->add_option("--C", C, "peak window constant"),
        app->add_option("--rel-tol", rel_tol, "quadrature relative tolerance"),
        app->add_option("--eps", eps, "region half-width"),
        app->add_option("--s", s, "per-coordinate s values of the MGF grid")->delimiter(','),
        app->add_option("--tail-tol", tail_tol, "Heine tail tolerance"),
        app->add_option("--cap", cap, "count cap per coordinate"),
        app->add_option("--seed", seed, "random seed"),
        app->add_option("--threads", threads, "worker threads"),
        app->add_option("--quad-mode", quad_mode, "windowed, full or both")
            ->check(CLI::IsMember({"windowed", "full", "both"})),
    };
    app->add_option("--out", out, "output directory");
  }

  bool given(std::size_t i) const { return opts[i]->count() > 0; }

  ExperimentConfig resolve() const {
    ExperimentConfig c;
    if (!config.empty()) {
      std::ifstream in(config);
      json j;
      try {
        in >> j;
      } catch (const json::exception& e) {
        throw InvalidArgument(std::string("cannot parse config: ") + e.what());
      }
      c = config_from_json(j);
    }
    if (given(0)) c.case_name = case_name;
    if (given(1)) c.t = t;
    if (given(2)) c.w = w;
    if (given(3)) {
      if (components.size() != 4) throw InvalidArgument("--components needs a0,b0,a1,b1");
      c.components = {{components[0], components[1]}, {components[2], components[3]}};
    }
    if (given(4)) c.M0 = M0;
    if (given(5)) c.margin = margin;
    if (given(6)) c.n = n;
    if (given(7)) c.quad.C = C;
    if (given(8)) c.quad.rel_tol = rel_tol;
    if (given(9)) c.eps = eps;
    if (given(10)) c.s_values = s;
    if (given(11)) c.tail_tol = tail_tol;
    if (given(12)) c.cap = cap;
    if (given(13)) c.seed = seed;
    if (given(14)) c.quad.threads = threads;
    if (given(15)) c.quad.mode = parse_quad_mode(quad_mode);
    return c;
  }
};

fs::path out_dir(const std::string& out) {
  const fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InvalidArgument("cannot create output directory " + dir.string());
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw NumericError("cannot write " + path.string());
  f << text;
}

std::string law_csv(const CountLaw& law) {
  std::ostringstream os;
  for (int k = 0; k < law.arity(); ++k) os << "alpha_" << k << ',';
  os << "p\n";
  for (const auto& e : law.entries()) {
    for (int a : e.alpha) os << a << ',';
    os << format_number(e.p) << '\n';
  }
  return os.str();
}

std::string with_newline(const json& j) { return j.dump(2) + "\n"; }

struct HeineFlags {
  std::vector<double> theta, q;
  bool pmf = false;
  double tol = 1e-12;
  int samples = 0;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
};

int run_heine(const HeineFlags& f) {
  const HeineParams p = HeineParams::validate(f.theta, f.q);
  json report;
  report["theta"] = p.thetas();
  report["q"] = p.qs();
  report["mean"] = mean_vector(p);
  report["variance"] = variance_vector(p);
  json cov = json::array();
  for (int a = 0; a < p.m(); ++a) {
    json row = json::array();
    for (int b = 0; b < p.m(); ++b) row.push_back(a == b ? variance_vector(p)[a] : covariance(p, a, b));
    cov.push_back(row);
  }
  report["covariance"] = cov;
  std::string pmf_text, sample_text;
  if (f.pmf) {
    const CountLaw law = pmf_table(p, f.tol);
    report["pmf"] = law;
    pmf_text = law_csv(law);
  }
  if (f.samples > 0) {
    const HeineSample s = sample(p, f.samples, f.seed, f.tol, f.threads);
    report["samples"] = s.counts;
    report["sample_truncation"] = s.truncation;
    report["sample_tv_bound"] = s.tv_bound;
    std::ostringstream os;
    os << "sample";
    for (int k = 0; k < p.m(); ++k) os << ",alpha_" << k;
    os << '\n';
    for (std::size_t i = 0; i < s.counts.size(); ++i) {
      os << i;
      for (int a : s.counts[i]) os << ',' << a;
      os << '\n';
    }
    sample_text = os.str();
  }
  if (!f.out.empty()) {
    const fs::path dir = out_dir(f.out);
    write_file(dir / "heine.json", with_newline(report));
    if (f.pmf) write_file(dir / "heine_pmf.csv", pmf_text);
    if (f.samples > 0) write_file(dir / "heine_samples.csv", sample_text);
  }
  if (f.pmf) std::cout << pmf_text;
  if (f.samples > 0) std::cout << sample_text;
  if (!f.pmf && f.samples == 0) std::cout << with_newline(report);
  return kOk;
}

int run_converge(const PotentialFlags& f) {
  const ExperimentConfig c = f.resolve();
  c.validate();
  if (c.case_name == "ginibre") throw InvalidArgument("converge needs case1 or case2");
  // Builder and validator failures are configuration errors here.
  std::optional<RadialPotential> pot;
  try {
    pot = build_potential(c);
  } catch (const NumericError& e) {
    throw InvalidArgument(e.what());
  }
  ConvergenceReport report{c, {}};
  for (int n : c.n) report.rows.push_back(converge_row(c, *pot, n));

  const fs::path dir = out_dir(f.out);
  std::ostringstream csv;
  write_converge_csv(csv, report);
  write_file(dir / "converge.csv", csv.str());
  write_file(dir / "converge.json", with_newline(json(report)));
  for (const auto& row : report.rows) {
    std::ostringstream pmf;
    write_pmf_csv(pmf, row);
    write_file(dir / ("pmf_n" + std::to_string(row.n) + ".csv"), pmf.str());
  }
  std::cout << csv.str();
  return kOk;
}

int run_validate(const PotentialFlags& f) {
  const ExperimentConfig c = f.resolve();
  RadialPotential pot = ginibre();
  try {
    pot = build_potential(c);
  } catch (const NumericError& e) {
    std::cout << "FAIL " << e.what() << '\n';
    return kInvalid;
  }
  const auto checks = validate_potential(pot);
  bool ok = true;
  json report;
  report["label"] = pot.label();
  report["checks"] = json::array();
  for (const auto& ch : checks) {
    std::cout << (ch.passed ? "PASS " : "FAIL ") << ch.name;
    if (!ch.detail.empty()) std::cout << ": " << ch.detail;
    std::cout << '\n';
    report["checks"].push_back({{"name", ch.name}, {"passed", ch.passed}, {"detail", ch.detail}});
    ok = ok && ch.passed;
  }
  const DropletData d = classify(pot);
  const char* tag = d.outposts.empty() ? "none" : to_string(d.case_tag);
  std::cout << "case: " << tag << '\n';
  report["classification"] = d;
  report["case"] = tag;
  if (!f.out.empty()) write_file(out_dir(f.out) / "validate.json", with_newline(report));
  return ok ? kOk : kInvalid;
}

int run_sample(const PotentialFlags& f, int reps) {
  const ExperimentConfig c = f.resolve();
  c.validate();
  if (c.n.size() != 1) throw InvalidArgument("sample needs a single --n");
  if (reps < 1) throw InvalidArgument("--reps must be positive");
  const int n = c.n.front();
  const RadialPotential pot = build_potential(c);
  const ModuliSampler sampler(pot, n, c.quad);
  const ModuliSample first = sampler.sample(c.seed);

  const fs::path dir = out_dir(f.out);
  std::ostringstream moduli;
  write_moduli_csv(moduli, first);
  write_file(dir / "moduli.csv", moduli.str());
  if (reps > 1 || c.case_name != "ginibre") {
    std::optional<RegionSet> regions;
    if (c.case_name != "ginibre") regions = statistics_for(c, *pot.declared(), n).hard;
    std::ostringstream counts;
    counts << "rep,seed";
    const int m = regions ? regions->size() : 0;
    for (int k = 0; k < m; ++k) counts << ",N_" << k;
    counts << '\n';
    for (int r = 0; r < reps; ++r) {
      const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(r);
      const ModuliSample s = r == 0 ? first : sampler.sample(seed);
      counts << r << ',' << seed;
      if (regions) {
        for (int v : count_regions(*regions, s.radii)) counts << ',' << v;
      }
      counts << '\n';
    }
    write_file(dir / "counts.csv", counts.str());
  }
  std::cout << moduli.str();
  return kOk;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const BudgetExceeded& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-dimensional Heine laws and finite-n outpost statistics"};
  app.require_subcommand(1);

  HeineFlags hf;
  auto* heine = app.add_subcommand("heine", "Heine pmf, moments and samples");
  heine->add_option("--theta", hf.theta, "theta_1..theta_m")->required()->delimiter(',');
  heine->add_option("--q", hf.q, "q_1..q_m")->required()->delimiter(',');
  heine->add_flag("--pmf", hf.pmf, "print the pmf table");
  heine->add_option("--tol", hf.tol, "tail tolerance");
  heine->add_option("--sample", hf.samples, "number of samples");
  heine->add_option("--seed", hf.seed, "random seed");
  heine->add_option("--threads", hf.threads, "worker threads");
  heine->add_option("--out", hf.out, "output directory");

  PotentialFlags cf, vf, sf;
  auto* conv = app.add_subcommand("converge", "finite-n law against the limit law");
  cf.add(conv, true);
  auto* val = app.add_subcommand("validate-potential", "run the potential validator");
  vf.add(val, false);
  auto* samp = app.add_subcommand("sample", "sample the moduli at one n");
  sf.add(samp, false);
  int reps = 1;
  samp->add_option("--reps", reps, "number of samples (counts.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  if (*heine) return guarded([&] { return run_heine(hf); });
  if (*conv) return guarded([&] { return run_converge(cf); });
  if (*val) return guarded([&] { return run_validate(vf); });
  return guarded([&] { return run_sample(sf, reps); });
}
