#include "run.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <fftw3.h>
#include <fmt/format.h>
#include <openssl/opensslv.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "experiments.hpp"
#include "qpww/error.hpp"

#ifndef QPWW_VERSION
#define QPWW_VERSION "0.0.0"
#endif

namespace qpww::cli {

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& data) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << data;
  if (!f) throw std::runtime_error("cannot write " + p.string());
}

Json versions() {
  return {{"qpww", QPWW_VERSION},
          {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
          {"fftw", std::string(fftw_version)},
          {"fmt", fmt::format("{}.{}.{}", FMT_VERSION / 10000, FMT_VERSION / 100 % 100, FMT_VERSION % 100)},
          {"openssl", OPENSSL_VERSION_TEXT}};
}

fs::path output_dir(const std::string& cli_out, const std::string& config_out, const std::string& name) {
  if (!cli_out.empty()) return cli_out;
  const char* env = std::getenv(kOutputRootEnv);
  const fs::path root = env && *env ? fs::path(env) : fs::path("out");
  if (!config_out.empty()) {
    const fs::path p(config_out);
    return p.is_absolute() ? p : root / p;
  }
  return root / name;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quasi-periodic water wave experiments"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  for (const auto& [name, builder] : experiments()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "experiment config file (YAML)")->required();
    sub->add_option("--out", out_dir, "output directory (overrides the config and " + std::string(kOutputRootEnv) + ")");
  }
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  const std::string name = app.get_subcommands().front()->get_name();

  // Parse and validate everything before touching the file system.
  std::string text;
  std::string config_out;
  Common common;
  Experiment exp;
  try {
    text = read_file(config_path);
    Config cfg = Config::parse(text);
    const auto declared = cfg.get<std::string>("experiment", name);
    if (declared != name) throw ConfigError("experiment: config is for '" + declared + "', not '" + name + "'");
    common.name = name;
    common.seed = cfg.get<std::uint64_t>("seed", 0);
    common.workers = cfg.get<int>("workers", 1);
    if (common.workers < 1) throw ConfigError("workers: must be >= 1");
    config_out = cfg.get<std::string>("output", "");
    exp = experiments().at(name)(cfg, common);
    cfg.finish();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  const fs::path dir = output_dir(out_dir, config_out, name);
  Json manifest;
  manifest["experiment"] = name;
  manifest["config_sha256"] = sha256_hex(text);
  manifest["seed"] = common.seed;
  manifest["workers"] = common.workers;
  manifest["versions"] = versions();

  const auto start = std::chrono::steady_clock::now();
  Artifacts artifacts;
  int code = kExitOk;
  Json error = nullptr;
  try {
    artifacts = exp.run();
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    code = kExitNumerical;
    error = {{"kind", "numerical"}, {"message", e.what()}};
  } catch (const std::exception& e) {
    code = kExitNumerical;
    error = {{"kind", "runtime"}, {"message", e.what()}};
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  manifest["status"] = code == kExitOk ? "ok" : "failed";
  manifest["exit_code"] = code;
  manifest["error"] = error;
  Json files = Json::array();
  for (const auto& f : artifacts.files) files.push_back({{"name", f.first}, {"sha256", sha256_hex(f.second)}});
  manifest["files"] = files;
  manifest["wall_seconds"] = seconds;

  try {
    fs::create_directories(dir);
    for (const auto& [file, data] : artifacts.files) write_file(dir / file, data);
    write_file(dir / "manifest.json", dump_json(manifest));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInternal;
  }
  if (code != kExitOk)
    err << name << " failed: " << error["message"].get<std::string>() << '\n';
  else
    out << name << ": wrote " << artifacts.files.size() + 1 << " files to " << dir.string() << '\n';
  return code;
}

}  // namespace qpww::cli
