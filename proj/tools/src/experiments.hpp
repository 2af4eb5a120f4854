#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "config.hpp"
#include "output.hpp"
#include "qpww/sites.hpp"
#include "qpww/wavesys.hpp"

namespace qpww::cli {

/// Keys shared by every experiment.
struct Common {
  std::string name;
  std::uint64_t seed = 0;
  int workers = 1;
};

/// Parsing happens when the experiment is built; run() does the numerical work.
struct Experiment {
  std::function<Artifacts()> run;
};

using Builder = std::function<Experiment(Config&, const Common&)>;

/// Subcommand name to builder, in a fixed order.
const std::map<std::string, Builder>& experiments();

Experiment build_evolve(Config& c, const Common& common);
Experiment build_dno_test(Config& c, const Common& common);
Experiment build_resonances(Config& c, const Common& common);
Experiment build_bf_family(Config& c, const Common& common);
Experiment build_twist(Config& c, const Common& common);
Experiment build_melnikov(Config& c, const Common& common);
Experiment build_measure(Config& c, const Common& common);
Experiment build_solve_qp(Config& c, const Common& common);
Experiment build_linop_spectrum(Config& c, const Common& common);

// Shared readers.
TangentialSet read_sites(Config& c, const std::vector<long>& fallback = {});
wavesys::WaveConfig read_wave(Config& c);
/// zeta_unit list of length nu; default all ones.
std::vector<double> read_zeta_unit(Config& c, int nu);

}  // namespace qpww::cli
