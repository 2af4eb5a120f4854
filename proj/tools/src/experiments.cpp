#include "experiments.hpp"

namespace qpww::cli {

const std::map<std::string, Builder>& experiments() {
  static const std::map<std::string, Builder> table{
      {"evolve", build_evolve},         {"dno-test", build_dno_test},
      {"resonances", build_resonances}, {"bf-family", build_bf_family},
      {"twist", build_twist},           {"melnikov", build_melnikov},
      {"measure", build_measure},       {"solve-qp", build_solve_qp},
      {"linop-spectrum", build_linop_spectrum},
  };
  return table;
}

TangentialSet read_sites(Config& c, const std::vector<long>& fallback) {
  auto sites = c.get<std::vector<long>>("sites", fallback);
  if (sites.empty()) throw ConfigError(c.path_of("sites") + ": at least one site is required");
  try {
    return TangentialSet(std::move(sites));
  } catch (const InvalidArgument& e) {
    throw ConfigError(c.path_of("sites") + ": " + e.what());
  }
}

wavesys::WaveConfig read_wave(Config& c) {
  Config w = c.table("wave");
  wavesys::WaveConfig cfg;
  cfg.gravity = w.get<double>("gravity", cfg.gravity);
  cfg.dno.order = w.get<int>("dno_order", cfg.dno.order);
  cfg.dno.divergence_ratio = w.get<double>("divergence_ratio", cfg.dno.divergence_ratio);
  cfg.dno.divergence_run = w.get<int>("divergence_run", cfg.dno.divergence_run);
  if (!(cfg.gravity > 0.0)) throw ConfigError(w.path_of("gravity") + ": must be positive");
  if (cfg.dno.order < 0) throw ConfigError(w.path_of("dno_order") + ": must be >= 0");
  return cfg;
}

std::vector<double> read_zeta_unit(Config& c, int nu) {
  auto z = c.get<std::vector<double>>("zeta_unit", std::vector<double>(static_cast<std::size_t>(nu), 1.0));
  if (static_cast<int>(z.size()) != nu) throw ConfigError(c.path_of("zeta_unit") + ": length must equal the number of sites");
  for (double v : z)
    if (!(v > 0.0)) throw ConfigError(c.path_of("zeta_unit") + ": entries must be positive");
  return z;
}

}  // namespace qpww::cli
