#include <cmath>
#include <sstream>

#include "experiments.hpp"
#include "qpww/dno.hpp"

namespace qpww::cli {

using spectral::cplx;
using spectral::Field;
using spectral::ModeSpace;

namespace {

template <class Fn>
Field circle_field(const ModeSpace& s, Fn&& fn) {
  return Field::sample(s, [&](std::span<const double> t) { return cplx(fn(t[0])); });
}

Json conservation_json(const wavesys::ConservationReport& r) {
  Json j;
  j["max_rel_energy_drift"] = number(r.max_rel_energy_drift);
  j["max_rel_momentum_drift"] = number(r.max_rel_momentum_drift);
  j["max_abs_momentum_drift"] = number(r.max_abs_momentum_drift);
  j["max_mean_eta_drift"] = number(r.max_mean_eta_drift);
  j["max_mean_psi_defect"] = number(r.max_mean_psi_defect);
  return j;
}

}  // namespace

Experiment build_evolve(Config& c, const Common&) {
  const int j_max = c.get<int>("j_max", 64);
  const double eps = c.get<double>("eps", 0.01);
  const auto modes = c.get<std::vector<int>>("modes", {1});
  const double T = c.get<double>("T", 10.0);
  const double dt = c.get<double>("dt", 1e-3);
  wavesys::EvolveOptions opt;
  opt.save_every = c.get<int>("save_every", opt.save_every);
  opt.n_modes = c.get<int>("n_modes", opt.n_modes);
  opt.error_check_every = c.get<int>("error_check_every", opt.error_check_every);
  opt.error_tolerance = c.get<double>("error_tolerance", opt.error_tolerance);
  opt.mean_eta = c.get<double>("mean_eta", 0.0);
  opt.mean_psi = c.get<double>("mean_psi", 0.0);
  const auto wave = read_wave(c);
  if (j_max < 1) throw ConfigError("j_max: must be >= 1");
  for (int m : modes)
    if (m < 1 || m > j_max) throw ConfigError("modes: entries must lie in [1, j_max]");
  if (!(dt > 0.0) || !(T >= 0.0)) throw ConfigError("dt, T: need dt > 0 and T >= 0");
  if (opt.save_every < 1) throw ConfigError("save_every: must be >= 1");
  if (opt.n_modes < 0 || opt.n_modes > j_max) throw ConfigError("n_modes: must lie in [0, j_max]");

  return {[=] {
    const auto s = ModeSpace::circle(j_max);
    // eta = eps sum cos(m x), psi = eps sum sin(m x).
    wavesys::SurfaceState s0(circle_field(s,
                                          [&](double x) {
                                            double v = 0.0;
                                            for (int m : modes) v += std::cos(m * x);
                                            return eps * v;
                                          }),
                             circle_field(s, [&](double x) {
                               double v = 0.0;
                               for (int m : modes) v += std::sin(m * x);
                               return eps * v;
                             }));
    const auto traj = wavesys::evolve(s0, T, dt, wave, opt);
    std::ostringstream csv;
    wavesys::write_trajectory_csv(csv, traj);

    Json j;
    j["experiment"] = "evolve";
    j["j_max"] = j_max;
    j["eps"] = number(eps);
    j["modes"] = modes;
    j["T"] = number(T);
    j["dt"] = number(dt);
    j["snapshots"] = traj.snapshots.size();
    j["conservation"] = conservation_json(traj.report);
    const auto& last = traj.snapshots.back();
    j["final"] = {{"t", number(last.t)},
                  {"hamiltonian", number(last.hamiltonian)},
                  {"momentum", number(last.momentum)},
                  {"mean_eta", number(last.mean_eta)},
                  {"mean_psi", number(last.mean_psi)}};
    Artifacts a;
    a.json("summary.json", j);
    a.files.emplace_back("trajectory.csv", csv.str());
    return a;
  }};
}

Experiment build_dno_test(Config& c, const Common&) {
  const int j_max = c.get<int>("j_max", 256);
  const int order = c.get<int>("order", 8);
  const auto ks = c.get<std::vector<int>>("k", {1, 2});
  const auto amps = c.get<std::vector<double>>("a", {0.005, 0.01, 0.02});
  const double tolerance = c.get<double>("tolerance", 1e-9);
  if (j_max < 4) throw ConfigError("j_max: must be >= 4");
  if (order < 0) throw ConfigError("order: must be >= 0");
  for (int k : ks)
    if (k < 1) throw ConfigError("k: entries must be >= 1");

  return {[=] {
    const auto s = ModeSpace::circle(j_max);
    dno::DnoConfig cfg;
    cfg.order = order;
    Csv csv({"k", "a", "relative_error"});
    Json cases = Json::array();
    double worst = 0.0;
    for (int k : ks)
      for (double a : amps) {
        // Phi = e^{ky} cos kx restricted to y = a cos 2x.
        auto eta = [a](double x) { return a * std::cos(2 * x); };
        auto eta_x = [a](double x) { return -2 * a * std::sin(2 * x); };
        const Field e = circle_field(s, eta);
        const Field psi = circle_field(s, [&](double x) { return std::exp(k * eta(x)) * std::cos(k * x); });
        const Field want = circle_field(s, [&](double x) {
          const double ex = std::exp(k * eta(x));
          return k * ex * std::cos(k * x) + k * eta_x(x) * ex * std::sin(k * x);
        });
        const double err = (dno::dno_apply(e, psi, cfg) - want).norm() / want.norm();
        worst = std::max(worst, err);
        csv.row({static_cast<long long>(k), a, err});
        cases.push_back({{"k", k}, {"a", number(a)}, {"relative_error", number(err)}, {"pass", err <= tolerance}});
      }
    Json j;
    j["experiment"] = "dno-test";
    j["j_max"] = j_max;
    j["order"] = order;
    j["tolerance"] = number(tolerance);
    j["cases"] = cases;
    j["max_relative_error"] = number(worst);
    j["pass"] = worst <= tolerance;
    Artifacts out;
    out.json("summary.json", j);
    out.csv("dno.csv", csv);
    return out;
  }};
}

}  // namespace qpww::cli
