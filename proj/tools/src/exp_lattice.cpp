#include <cmath>
#include <string>

#include "experiments.hpp"
#include "qpww/melnikov.hpp"
#include "qpww/normalform.hpp"
#include "qpww/resonance.hpp"

namespace qpww::cli {

namespace {

std::string joined(std::span<const long> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

std::string joined(std::span<const int> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

Json tuple_json(const resonance::ResonanceTuple& t) {
  Json j;
  j["sites"] = array(t.sites());
  j["signs"] = array(t.signs());
  j["momentum_holds"] = t.momentum_holds();
  j["frequency_holds"] = t.frequency_holds();
  j["trivial"] = resonance::is_trivial(t);
  return j;
}

Json matrix_json(const Eigen::MatrixXd& m, double scale = 1.0) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(number(scale * m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

Json triple_json(const melnikov::Triple& t) { return {{"l", t.l}, {"j", t.j}, {"k", t.k}}; }

Json report_json(const melnikov::MelnikovReport& r, bool with_radius) {
  Json j;
  j["pass"] = r.pass;
  j["min_divisor"] = number(r.min_divisor);
  j["argmin"] = r.argmin ? triple_json(*r.argmin) : Json(nullptr);
  j["checked"] = r.checked;
  j["certified"] = r.certified;
  j["violation_count"] = r.violation_count;
  Json v = Json::array();
  for (const auto& x : r.violations)
    v.push_back({{"at", triple_json(x.at)}, {"divisor", number(x.divisor)}, {"threshold", number(x.threshold)}});
  j["violations"] = v;
  if (with_radius) {
    long long finite = 0;
    for (const auto& e : r.radius) finite += std::isfinite(e.radius) ? 1 : 0;
    j["radius_finite"] = finite;
    j["radius_infinite"] = static_cast<long long>(r.radius.size()) - finite;
  }
  return j;
}

melnikov::MelnikovParams read_melnikov_params(Config& c, int nu, double eps, int workers) {
  Config t = c.table("params");
  auto p = melnikov::MelnikovParams::defaults(nu, eps);
  p.gamma = t.get<double>("gamma", p.gamma);
  p.eta_m = t.get<double>("eta_m", p.gamma * p.gamma * p.gamma);
  p.tau = t.get<double>("tau", p.tau);
  p.loss_d = t.get<double>("loss_d", p.loss_d);
  p.l_max = t.get<int>("l_max", 20);
  p.j_max = t.get<long>("j_max", 10000);
  p.max_violations = t.get<std::size_t>("max_violations", p.max_violations);
  p.workers = workers;
  try {
    p.validate(nu);
  } catch (const InvalidArgument& e) {
    throw ConfigError(t.prefix() + ": " + e.what());
  }
  return p;
}

// Triples beyond R(l) visited on a stride of the j line: the reduction
// bound claims they pass; this recomputes their divisors directly.
struct BeyondCheck {
  long long sampled = 0;
  long long violations = 0;
  double min_margin = std::numeric_limits<double>::infinity();
};

BeyondCheck check_beyond(std::span<const double> omega, const DiagonalModel& d, std::span<const int> v,
                         const melnikov::MelnikovParams& p, const melnikov::MelnikovReport& r, long stride) {
  BeyondCheck b;
  for (const auto& e : r.radius) {
    if (!std::isfinite(e.radius)) continue;
    long m = 0;
    for (std::size_t i = 0; i < e.l.size(); ++i) m += static_cast<long>(v[i]) * e.l[i];
    const double threshold = p.eta_m * std::pow(melnikov::bracket(e.l), -p.tau);
    for (long j = -p.j_max; j <= p.j_max; ++j) {
      const long k = j + m;
      if (j == 0 || k == 0 || std::labs(k) > p.j_max) continue;
      if (static_cast<double>(std::min(std::labs(j), std::labs(k))) < e.radius) continue;
      if ((j + 3 * p.j_max) % stride != 0) continue;
      ++b.sampled;
      const double div = std::abs(melnikov::second_divisor(omega, d, e.l, j, k));
      b.min_margin = std::min(b.min_margin, div / threshold);
      if (div < threshold) ++b.violations;
    }
  }
  return b;
}

}  // namespace

Experiment build_resonances(Config& c, const Common& common) {
  const int n = c.get<int>("order", 4);
  const long bound = c.get<long>("bound", 200);
  resonance::EnumerateOptions opt;
  opt.include_trivial = c.get<bool>("include_trivial", false);
  opt.max_results = c.get<std::size_t>("max_results", opt.max_results);
  opt.workers = common.workers;
  if (n < 3 || n > 6) throw ConfigError("order: must lie in 3..6");
  if (bound < 1 || bound > 5000) throw ConfigError("bound: must lie in 1..5000");

  return {[=] {
    const auto tuples = resonance::enumerate_resonances(n, bound, opt);
    Csv csv({"sites", "signs", "momentum_holds", "frequency_holds", "trivial", "bf_lambda", "bf_b"});
    Json list = Json::array();
    long long bf_matched = 0, nontrivial = 0;
    for (const auto& t : tuples) {
      Json j = tuple_json(t);
      const bool trivial = resonance::is_trivial(t);
      std::optional<std::pair<long, long>> bf;
      if (!trivial) {
        ++nontrivial;
        bf = resonance::benjamin_feir_parameters(t);
        bf_matched += bf ? 1 : 0;
      }
      j["benjamin_feir"] = bf ? Json::array({bf->first, bf->second}) : Json(nullptr);
      list.push_back(j);
      csv.row({joined(t.sites()), joined(t.signs()), static_cast<long long>(t.momentum_holds()),
               static_cast<long long>(t.frequency_holds()), static_cast<long long>(trivial),
               bf ? Csv::Cell(static_cast<long long>(bf->first)) : Csv::Cell(std::string()),
               bf ? Csv::Cell(static_cast<long long>(bf->second)) : Csv::Cell(std::string())});
    }
    Json s;
    s["experiment"] = "resonances";
    s["order"] = n;
    s["bound"] = bound;
    s["include_trivial"] = opt.include_trivial;
    s["count"] = tuples.size();
    s["nontrivial"] = nontrivial;
    s["benjamin_feir_matched"] = bf_matched;
    s["tuples"] = list;
    Artifacts a;
    a.json("summary.json", s);
    a.csv("resonances.csv", csv);
    return a;
  }};
}

Experiment build_bf_family(Config& c, const Common&) {
  const long lambda_max = c.get<long>("lambda_max", 5);
  const long b_max = c.get<long>("b_max", 5);
  const long bound = c.get<long>("bound", 0);
  if (lambda_max < 1 || b_max < 1) throw ConfigError("lambda_max, b_max: must be >= 1");

  return {[=] {
    Csv csv({"lambda", "b", "sites", "signs", "momentum_holds", "frequency_holds", "trivial"});
    Json list = Json::array();
    for (long lam = -lambda_max; lam <= lambda_max; ++lam) {
      if (lam == 0) continue;
      for (long b = 1; b <= b_max; ++b) {
        const auto t = resonance::benjamin_feir(lam, b);
        long top = 0;
        for (long j : t.sites()) top = std::max(top, std::labs(j));
        if (bound > 0 && top > bound) continue;
        Json j = tuple_json(t);
        j["lambda"] = lam;
        j["b"] = b;
        list.push_back(j);
        csv.row({static_cast<long long>(lam), static_cast<long long>(b), joined(t.sites()), joined(t.signs()),
                 static_cast<long long>(t.momentum_holds()), static_cast<long long>(t.frequency_holds()),
                 static_cast<long long>(resonance::is_trivial(t))});
      }
    }
    Json s;
    s["experiment"] = "bf-family";
    s["lambda_max"] = lambda_max;
    s["b_max"] = b_max;
    s["bound"] = bound;
    s["count"] = list.size();
    s["tuples"] = list;
    Artifacts a;
    a.json("summary.json", s);
    a.csv("bf_family.csv", csv);
    return a;
  }};
}

Experiment build_twist(Config& c, const Common&) {
  const TangentialSet s = read_sites(c);
  const auto zeta = c.get<std::vector<double>>("zeta", {});
  if (!zeta.empty() && static_cast<int>(zeta.size()) != s.nu())
    throw ConfigError("zeta: length must equal the number of sites");
  for (double z : zeta)
    if (z < 0.0) throw ConfigError("zeta: actions must be nonnegative");

  return {[=] {
    const auto t = normalform::twist_matrix(s);
    const auto wb = s.omega_bar();
    Json j;
    j["experiment"] = "twist";
    j["sites"] = array(s.sites());
    j["A"] = matrix_json(t.a);
    j["two_pi_A"] = matrix_json(t.a, 2.0 * spectral::kPi);
    j["determinant"] = number(t.determinant());
    j["omega_bar"] = array(wb);
    if (!zeta.empty()) {
      j["zeta"] = array(zeta);
      j["omega"] = array(normalform::frequency_amplitude(t, wb, zeta));
    }
    Artifacts a;
    a.json("summary.json", j);
    return a;
  }};
}

Experiment build_melnikov(Config& c, const Common& common) {
  const TangentialSet s = read_sites(c, {1, 2});
  const double eps = c.get<double>("eps", 0.05);
  if (!(eps > 0.0)) throw ConfigError("eps: must be positive");
  const auto zeta_unit = read_zeta_unit(c, s.nu());
  const auto p = read_melnikov_params(c, s.nu(), eps, common.workers);
  std::vector<double> zeta(zeta_unit);
  for (auto& z : zeta) z *= eps * eps;
  Config dc = c.table("diagonal");
  DiagonalModel d;
  d.m1 = dc.get<double>("m1", melnikov::m1_model(s, zeta));
  d.m_half = dc.get<double>("m_half", 0.0);
  d.m0 = dc.get<double>("m0", 0.0);
  const auto checks = c.get<std::vector<std::string>>("checks", {"diophantine", "zero", "second"});
  for (const auto& k : checks)
    if (k != "diophantine" && k != "zero" && k != "second" && k != "lossy")
      throw ConfigError("checks: unknown check '" + k + "'");
  const double sample = c.get<double>("beyond_sample", 0.1);
  if (sample < 0.0 || sample > 1.0) throw ConfigError("beyond_sample: must lie in [0, 1]");

  return {[=] {
    const auto omega = normalform::frequency_amplitude(s, zeta);
    const auto v = s.velocity();
    Json j;
    j["experiment"] = "melnikov";
    j["sites"] = array(s.sites());
    j["eps"] = number(eps);
    j["zeta"] = array(zeta);
    j["omega"] = array(omega);
    j["params"] = {{"gamma", number(p.gamma)}, {"tau", number(p.tau)},   {"eta_m", number(p.eta_m)},
                   {"loss_d", number(p.loss_d)}, {"l_max", p.l_max}, {"j_max", p.j_max}};
    j["diagonal"] = {{"m1", number(d.m1)}, {"m_half", number(d.m_half)}, {"m0", number(d.m0)}};
    Json reports;
    Artifacts a;
    bool pass = true;
    for (const auto& k : checks) {
      melnikov::MelnikovReport r;
      if (k == "diophantine")
        r = melnikov::diophantine_check(omega, p.gamma, p.tau, p.l_max, p.workers, p.max_violations);
      else if (k == "zero")
        r = melnikov::zero_melnikov(omega, d.m1, v, p.gamma, p.tau, p.l_max, p.workers, p.max_violations);
      else if (k == "lossy")
        r = melnikov::second_melnikov_lossy(omega, d, v, p);
      else
        r = melnikov::second_melnikov(omega, d, v, p);
      Json rj = report_json(r, k == "second");
      pass = pass && r.pass;
      if (k == "second") {
        Csv rad({"l", "momentum", "radius"});
        for (const auto& e : r.radius) {
          long m = 0;
          for (std::size_t i = 0; i < e.l.size(); ++i) m += static_cast<long>(v[i]) * e.l[i];
          rad.row({joined(e.l), static_cast<long long>(m), e.radius});
        }
        a.csv("radius.csv", rad);
        // Violations outside the enumerated ball would contradict the reduction.
        long long outside = 0;
        for (const auto& x : r.violations) {
          for (const auto& e : r.radius)
            if (e.l == x.at.l && static_cast<double>(std::min(std::labs(x.at.j), std::labs(x.at.k))) >= e.radius)
              ++outside;
        }
        rj["violations_outside_ball"] = outside;
        if (sample > 0.0) {
          const long stride = std::max(1L, std::lround(1.0 / sample));
          const auto b = check_beyond(omega, d, v, p, r, stride);
          rj["beyond_radius"] = {{"stride", stride},
                                 {"sampled", b.sampled},
                                 {"violations", b.violations},
                                 {"min_ratio", number(b.min_margin)}};
          pass = pass && b.violations == 0;
        }
      }
      reports[k] = rj;
    }
    j["reports"] = reports;
    j["pass"] = pass;
    a.json("summary.json", j);
    return a;
  }};
}

Experiment build_measure(Config& c, const Common& common) {
  const TangentialSet s = read_sites(c, {1, 2});
  const auto eps = c.get<std::vector<double>>("eps", {0.1, 0.05, 0.025});
  const long long samples = c.get<long long>("samples", 10000);
  const double gamma_exponent = c.get<double>("gamma_exponent", 2.5);
  const double tau = c.get<double>("tau", s.nu() + 1.0);
  const int l_max = c.get<int>("l_max", 200);
  if (eps.empty()) throw ConfigError("eps: at least one value is required");
  for (double e : eps)
    if (!(e > 0.0)) throw ConfigError("eps: values must be positive");
  if (samples < 1) throw ConfigError("samples: must be >= 1");
  if (!(tau > s.nu() - 1.0)) throw ConfigError("tau: must exceed nu - 1");
  if (l_max < 1) throw ConfigError("l_max: must be >= 1");
  const std::uint64_t seed = common.seed;
  const int workers = common.workers;

  return {[=] {
    Csv csv({"eps", "gamma", "fraction", "passed", "samples"});
    Json points = Json::array();
    std::vector<std::pair<double, double>> by_eps;
    for (double e : eps) {
      melnikov::MelnikovParams p;
      p.gamma = std::pow(e, gamma_exponent);
      p.tau = tau;
      p.l_max = l_max;
      p.workers = workers;
      const auto r = melnikov::measure_estimate(s, e, p, samples, seed);
      csv.row({e, p.gamma, r.fraction, r.passed, r.samples});
      points.push_back({{"eps", number(e)},
                        {"gamma", number(p.gamma)},
                        {"fraction", number(r.fraction)},
                        {"passed", r.passed},
                        {"samples", r.samples}});
      by_eps.emplace_back(e, r.fraction);
    }
    std::sort(by_eps.begin(), by_eps.end(), [](auto a, auto b) { return a.first > b.first; });
    bool monotone = true;
    for (std::size_t i = 1; i < by_eps.size(); ++i) monotone = monotone && by_eps[i].second >= by_eps[i - 1].second;
    Json j;
    j["experiment"] = "measure";
    j["sites"] = array(s.sites());
    j["seed"] = seed;
    j["tau"] = number(tau);
    j["l_max"] = l_max;
    j["gamma_exponent"] = number(gamma_exponent);
    j["points"] = points;
    j["nondecreasing_as_eps_decreases"] = monotone;
    Artifacts a;
    a.json("summary.json", j);
    a.csv("measure.csv", csv);
    return a;
  }};
}

}  // namespace qpww::cli
