#include <algorithm>
#include <cmath>
#include <sstream>

#include "experiments.hpp"
#include "qpww/linop.hpp"
#include "qpww/melnikov.hpp"
#include "qpww/normalform.hpp"
#include "qpww/qpsolver.hpp"

namespace qpww::cli {

namespace {

struct SolverSettings {
  qpsolver::SolveParams params;
  qpsolver::ResidualConfig residual;
  bool continuation = true;
  int max_halvings = 8;
};

SolverSettings read_solver(Config& c, int nu, int workers, const wavesys::WaveConfig& wave, int default_bound) {
  SolverSettings s;
  auto& p = s.params;
  p.schedule = c.get<std::vector<int>>("schedule", {default_bound});
  p.tolerance = c.get<double>("tolerance", p.tolerance);
  p.max_iterations = c.get<int>("max_iterations", p.max_iterations);
  p.damping = c.get<double>("damping", p.damping);
  p.basin = c.get<double>("basin", p.basin);
  p.phase_sites = c.get<std::vector<int>>("phase_sites", {});
  p.workers = workers;
  s.continuation = c.get<bool>("continuation", true);
  s.max_halvings = c.get<int>("max_halvings", s.max_halvings);
  s.residual.sobolev = c.get<double>("sobolev", s.residual.sobolev);
  s.residual.wave = wave;
  try {
    p.validate(nu);
  } catch (const InvalidArgument& e) {
    throw ConfigError(c.prefix() + ": " + e.what());
  }
  if (s.max_halvings < 0) throw ConfigError(c.path_of("max_halvings") + ": must be >= 0");
  return s;
}

qpsolver::SolveResult run_solver(const TangentialSet& s, const std::vector<double>& zeta_unit, double eps,
                                 const SolverSettings& st) {
  if (st.continuation)
    return qpsolver::solve_continuation(s, zeta_unit, eps, st.params, st.residual, st.max_halvings);
  std::vector<double> z(zeta_unit);
  for (auto& v : z) v *= eps * eps;
  auto p = st.params;
  p.zeta = z;
  return qpsolver::newton_refine(qpsolver::first_order_ansatz(s, z, p.schedule.front()), p, st.residual);
}

bool by_imag(spectral::cplx a, spectral::cplx b) {
  return a.imag() < b.imag() || (a.imag() == b.imag() && a.real() < b.real());
}

}  // namespace

Experiment build_solve_qp(Config& c, const Common& common) {
  const TangentialSet s = read_sites(c, {1});
  const double eps = c.get<double>("eps", 0.02);
  if (!(eps > 0.0)) throw ConfigError("eps: must be positive");
  const auto zeta_unit = read_zeta_unit(c, s.nu());
  const auto wave = read_wave(c);
  Config sc = c.table("solver");
  const auto st = read_solver(sc, s.nu(), common.workers, wave, 16);
  Config snap = c.table("snapshots");
  const double t_max = snap.get<double>("t_max", 10.0);
  const int n_times = snap.get<int>("n_times", 11);
  const int n_x = snap.get<int>("n_x", 64);
  if (n_times < 1 || n_x < 1 || !(t_max >= 0.0)) throw ConfigError("snapshots: need n_times, n_x >= 1 and t_max >= 0");

  return {[=] {
    const auto r = run_solver(s, zeta_unit, eps, st);
    const auto& e = r.embedding;
    std::vector<double> zeta(zeta_unit);
    for (auto& v : zeta) v *= eps * eps;
    const auto t = normalform::twist_matrix(s);
    const auto wb = s.omega_bar();
    const auto predicted = normalform::frequency_amplitude(t, wb, zeta);
    std::vector<double> two_pi_zeta(zeta);
    for (auto& v : two_pi_zeta) v *= 2.0 * spectral::kPi;
    const auto reconciled = normalform::frequency_amplitude(t, wb, two_pi_zeta);
    const auto act = qpsolver::actions(e);
    std::vector<double> remainder, reconciled_remainder;
    double action_defect = 0.0;
    for (int i = 0; i < s.nu(); ++i) {
      remainder.push_back(e.omega[i] - predicted[i]);
      reconciled_remainder.push_back(e.omega[i] - reconciled[i]);
      action_defect = std::max(action_defect, std::abs(act[i] - zeta[i]));
    }
    const auto res = qpsolver::residual(e, st.residual);

    Csv log_csv({"iteration", "bound", "residual", "constraint_defect", "step"});
    Json log = Json::array();
    for (const auto& it : r.log) {
      log_csv.row({static_cast<long long>(it.iteration), static_cast<long long>(it.bound), it.residual,
                   it.constraint_defect, it.step});
      log.push_back({{"iteration", it.iteration},
                     {"bound", it.bound},
                     {"residual", number(it.residual)},
                     {"constraint_defect", number(it.constraint_defect)},
                     {"step", number(it.step)},
                     {"omega", array(it.omega)}});
    }
    std::vector<double> times;
    for (int k = 0; k < n_times; ++k) times.push_back(n_times == 1 ? 0.0 : t_max * k / (n_times - 1));
    std::ostringstream surface;
    qpsolver::FullEmbedding(e).write_csv(surface, times, n_x);

    Json j;
    j["experiment"] = "solve-qp";
    j["sites"] = array(s.sites());
    j["eps"] = number(eps);
    j["zeta"] = array(zeta);
    j["schedule"] = st.params.schedule;
    j["omega"] = array(e.omega);
    j["omega_bar"] = array(wb);
    j["omega_twist"] = array(predicted);
    j["omega_minus_twist"] = array(remainder);
    j["omega_twist_reconciled"] = array(reconciled);
    j["omega_minus_twist_reconciled"] = array(reconciled_remainder);
    j["actions"] = array(act);
    j["action_defect"] = number(action_defect);
    j["residual"] = {{"sobolev", number(st.residual.sobolev)}, {"norm", number(res.norm)}, {"l2", number(res.l2)}};
    j["iterations"] = r.iterations;
    j["log"] = log;
    Artifacts a;
    a.json("summary.json", j);
    a.csv("residual.csv", log_csv);
    a.files.emplace_back("surface.csv", surface.str());
    return a;
  }};
}

Experiment build_linop_spectrum(Config& c, const Common& common) {
  const TangentialSet s = read_sites(c, {1});
  const bool flat = c.get<bool>("flat", false);
  const double eps = c.get<double>("eps", 0.02);
  if (!flat && !(eps > 0.0)) throw ConfigError("eps: must be positive");
  const auto zeta_unit = read_zeta_unit(c, s.nu());
  const auto wave = read_wave(c);
  Config sc = c.table("solver");
  const auto st = read_solver(sc, s.nu(), common.workers, wave, 16);
  Config tc = c.table("truncation");
  linop::Truncation tr;
  tr.j_max = tc.get<long>("j_max", tr.j_max);
  tr.l_bound = tc.get<int>("l_bound", tr.l_bound);
  tr.normal_only = tc.get<bool>("normal_only", tr.normal_only);
  tr.momenta = tc.get<std::vector<long>>("momenta", {});
  Config fc = c.table("fit");
  const bool do_fit = fc.get<bool>("enabled", true);
  linop::FitWindow w;
  w.j_min = fc.get<long>("j_min", 0);
  w.j_fit = fc.get<long>("j_fit", 0);
  if (tr.j_max < 2 * s.max_abs()) throw ConfigError("truncation.j_max: must be >= 2 max|S|");
  const int workers = common.workers;

  return {[=] {
    qpsolver::TorusEmbedding e = qpsolver::zero_embedding(s, st.params.schedule.back());
    std::vector<double> zeta(static_cast<std::size_t>(s.nu()), 0.0);
    int iterations = 0;
    if (!flat) {
      auto r = run_solver(s, zeta_unit, eps, st);
      e = std::move(r.embedding);
      iterations = r.iterations;
      zeta = zeta_unit;
      for (auto& v : zeta) v *= eps * eps;
    }
    const auto op = linop::assemble_linearized(e, wave, tr, workers);
    const auto eig = linop::eigen_decompose(op, workers);

    Csv csv({"momentum", "re", "im"});
    std::vector<spectral::cplx> all;
    double max_re = 0.0;
    for (const auto& b : eig) {
      std::vector<spectral::cplx> v(b.values.data(), b.values.data() + b.values.size());
      std::sort(v.begin(), v.end(), by_imag);
      for (auto z : v) {
        csv.row({static_cast<long long>(b.momentum), z.real(), z.imag()});
        max_re = std::max(max_re, std::abs(z.real()));
        all.push_back(z);
      }
    }
    Json j;
    j["experiment"] = "linop-spectrum";
    j["sites"] = array(s.sites());
    j["flat"] = flat;
    j["eps"] = flat ? Json(nullptr) : number(eps);
    j["zeta"] = array(zeta);
    j["omega"] = array(e.omega);
    j["solver_iterations"] = iterations;
    j["truncation"] = {{"j_max", tr.j_max}, {"l_bound", tr.l_bound}, {"normal_only", tr.normal_only}};
    j["blocks"] = op.blocks().size();
    j["dimension"] = op.dimension();
    j["eigenvalue_count"] = all.size();
    j["max_abs_real"] = number(max_re);
    j["off_block_mass"] = number(linop::off_block_mass(op));
    if (flat) {
      auto want = linop::flat_eigenvalues(op);
      auto got = all;
      std::sort(got.begin(), got.end(), by_imag);
      std::sort(want.begin(), want.end(), by_imag);
      double dist = got.size() == want.size() ? 0.0 : std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) dist = std::max(dist, std::abs(got[i] - want[i]));
      j["flat_distance"] = number(dist);
    }
    Artifacts a;
    if (do_fit) {
      const auto fit = linop::diagonalize_and_fit(op, s, w, workers);
      const auto& m = fit.model;
      Json d;
      d["m1"] = number(m.m1);
      d["m_half"] = number(m.m_half);
      d["m0"] = number(m.m0);
      d["fit_residual"] = number(m.fit_residual);
      d["r_bound"] = m.r_bound();
      d["r"] = array(m.r);
      d["r_weighted_sup"] = number(m.r_weighted_sup());
      d["window"] = {{"j_min", fit.window.j_min}, {"j_fit", fit.window.j_fit}};
      const double model = melnikov::m1_model(s, zeta);
      d["m1_model"] = number(model);
      d["m1_ratio"] = model != 0.0 ? number(m.m1 / model) : Json(nullptr);
      Json branches = Json::array();
      for (const auto& br : fit.branches)
        branches.push_back({{"j", br.j}, {"lambda", complex_pair(br.lambda)}, {"mass", number(br.mass)}});
      d["branches"] = branches;
      j["diagonal_model"] = d;
      a.json("diagonal_model.json", d);
    }
    a.json("summary.json", j);
    a.csv("eigenvalues.csv", csv);
    return a;
  }};
}

}  // namespace qpww::cli
