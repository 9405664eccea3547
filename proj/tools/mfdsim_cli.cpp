#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "mfdsim/csv.hpp"
#include "mfdsim/errors.hpp"
#include "mfdsim/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mfdsim;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kInvalid = 2;

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

unsigned worker_count(std::size_t jobs) {
  unsigned n = 1;
  if (const char* env = std::getenv("MFD_MOBSIM_THREADS")) {
    const auto v = csv::to_int(env);
    if (v && *v > 0) n = static_cast<unsigned>(*v);
  }
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(1, jobs)));
}

/// Runs one scenario end to end; returns an exit code and prints diagnostics.
int simulate_one(const fs::path& config_path, const fs::path& out_dir, bool timings, std::mutex& log) {
  auto say = [&](const std::string& msg) {
    std::lock_guard lock(log);
    std::cerr << msg << '\n';
  };
  try {
    const auto t0 = std::chrono::steady_clock::now();
    const ScenarioConfig cfg = load_config(config_path);
    const Scenario scenario = build_scenario(cfg);
    const auto t1 = std::chrono::steady_clock::now();
    const SimulationRun run = simulate_scenario(scenario);
    const auto t2 = std::chrono::steady_clock::now();
    auto files = write_simulation(out_dir, scenario, run);
    const auto t3 = std::chrono::steady_clock::now();

    RunManifest m;
    m.config_hash = sha256_hex(read_bytes(config_path));
    const fs::path abs_cfg = fs::absolute(config_path).lexically_normal();
    m.inputs.push_back({abs_cfg.string(), sha256_file(abs_cfg)});
    if (cfg.demand.file) {
      const auto p = fs::absolute(*cfg.demand.file).lexically_normal();
      m.inputs.push_back({p.string(), sha256_file(p)});
    }
    if (cfg.network.path)
      for (const char* f : {"nodes.csv", "links.csv", "segments.csv", "zones.csv"}) {
        const auto p = fs::absolute(*cfg.network.path / f).lexically_normal();
        if (fs::exists(p)) m.inputs.push_back({p.string(), sha256_file(p)});
      }
    m.outputs = digest_files(out_dir, files);
    if (timings) {
      using sec = std::chrono::duration<double>;
      m.timings = {{"load", sec(t1 - t0).count()}, {"simulate", sec(t2 - t1).count()}, {"write", sec(t3 - t2).count()}};
    }
    io::write_json(out_dir / "manifest.json", to_json(m));
    const auto& last = run.result.last;
    if (!last.learning.converged)
      say("warning: " + cfg.name + ": within-day learning did not converge in " +
          std::to_string(cfg.learning.max_iterations) + " iterations");
    say(cfg.name + ": " + std::to_string(last.output.trip_count) + " trips, " +
        std::to_string(last.output.unserved.size()) + " unserved -> " + out_dir.string());
    return kOk;
  } catch (const ConfigError& e) {
    say("invalid config " + config_path.string() + ": " + e.what());
    return kInvalid;
  } catch (const ParseError& e) {
    say("invalid input: " + std::string(e.what()));
    return kInvalid;
  } catch (const std::exception& e) {
    say("simulation failed: " + std::string(e.what()));
    return kRuntime;
  }
}

int cmd_simulate(const std::vector<std::string>& configs, const fs::path& out, bool timings) {
  std::mutex log;
  std::vector<int> codes(configs.size(), kOk);
  auto out_for = [&](std::size_t k) {
    return configs.size() == 1 ? out : out / fs::path(configs[k]).stem();
  };
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < configs.size(); k = next++) codes[k] = simulate_one(configs[k], out_for(k), timings, log);
  };
  std::vector<std::thread> pool;
  const unsigned n = worker_count(configs.size());
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  int code = kOk;
  for (int c : codes) code = std::max(code, c);
  return code;
}

int cmd_analyze(const fs::path& dir, const fs::path& out) {
  try {
    const LoadedRun run = load_run(dir);
    const Analysis a = analyze_run(run);
    write_analysis(out.empty() ? dir : out, a);
    std::cerr << "analysis written to " << (out.empty() ? dir : out).string() << '\n';
    return kOk;
  } catch (const ParseError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "analysis failed: " << e.what() << '\n';
    return kRuntime;
  }
}

int cmd_fit(const fs::path& samples_path, const std::string& kind, const fs::path& out, const SolverConfig& solver) {
  MfdKind k;
  if (kind == "vMFD")
    k = MfdKind::vMFD;
  else if (kind == "pMFD")
    k = MfdKind::pMFD;
  else {
    std::cerr << "invalid --kind '" << kind << "': expected vMFD or pMFD\n";
    return kInvalid;
  }
  std::vector<MfdSample> samples;
  try {
    samples = io::read_mfd_samples(samples_path);
  } catch (const ParseError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kInvalid;
  }
  if (samples.size() < 20) {
    std::cerr << "invalid input: " << samples.size() << " samples, at least 20 needed\n";
    return kInvalid;
  }
  try {
    const FitReport r = fit_mfd(fit_samples(samples, k == MfdKind::pMFD), k, solver);
    io::write_json(out, io::to_json(r));
    std::cerr << "RMSN " << r.rmsn << " -> " << out.string() << '\n';
    return kOk;
  } catch (const FitError& e) {
    std::cerr << "fit error: " << e.what() << '\n';
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "fit failed: " << e.what() << '\n';
    return kRuntime;
  }
}

int cmd_report(const std::vector<std::string>& dirs, const fs::path& out) {
  if (dirs.size() < 2) {
    std::cerr << "report needs at least two analysis directories\n";
    return kInvalid;
  }
  std::vector<std::string> names;
  std::vector<nlohmann::json> kpis;
  std::vector<std::vector<MfdSample>> samples;
  try {
    for (const auto& d : dirs) {
      kpis.push_back(io::read_json(fs::path(d) / "kpis.json"));
      std::string name = kpis.back().value("scenario", "");
      if (name.empty() || std::find(names.begin(), names.end(), name) != names.end()) name = d;
      names.push_back(name);
      samples.push_back(io::read_mfd_samples(fs::path(d) / "mfd_samples.csv"));
    }
  } catch (const ParseError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kInvalid;
  }
  try {
    const auto cmp = compare_kpis(names, kpis);
    fs::create_directories(out);
    io::write_json(out / "comparison.json", cmp);
    csv::Writer w(out / "mfd_compare.csv");
    w.row({"scenario", "t_s", "A_V", "P_V", "gamma", "A_P", "P_P"});
    for (std::size_t k = 0; k < names.size(); ++k)
      for (const auto& s : samples[k])
        w.row({names[k], csv::fmt(s.t_s), csv::fmt(s.A_V), csv::fmt(s.P_V), csv::fmt(s.gamma), csv::fmt(s.A_P),
               csv::fmt(s.P_P)});
    std::cerr << "comparison written to " << out.string() << '\n';
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "incomparable analyses: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "report failed: " << e.what() << '\n';
    return kRuntime;
  }
}

int cmd_validate(const std::string& config, const std::string& manifest) {
  if (!manifest.empty()) {
    try {
      const auto problems = verify_manifest(manifest);
      for (const auto& p : problems) std::cerr << p << '\n';
      if (!problems.empty()) return kInvalid;
      std::cerr << "manifest ok\n";
      return kOk;
    } catch (const std::exception& e) {
      std::cerr << "invalid manifest: " << e.what() << '\n';
      return kInvalid;
    }
  }
  if (config.empty()) {
    std::cerr << "validate needs a config path or --manifest\n";
    return kInvalid;
  }
  try {
    const ScenarioConfig cfg = load_config(config);
    const Scenario s = build_scenario(cfg);
    ScenarioInputs in = s.inputs();
    validate_sim_config(in.config);
    for (const auto& l : s.bus_lines)
      for (const auto& p : validate_bus_line(l, s.network)) throw ConfigError("transit", p);
    for (const auto& l : s.rail_lines)
      for (const auto& p : validate_rail_line(l, s.network)) throw ConfigError("transit", p);
    std::cerr << cfg.name << ": config ok (" << s.trips.size() << " trips)\n";
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kInvalid;
  } catch (const ParseError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kInvalid;
  } catch (const DomainError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "validation failed: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal mesoscopic simulation and MFD analysis"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Run scenarios and write simulation outputs");
  std::vector<std::string> configs;
  std::string sim_out = "out";
  bool timings = false;
  sim->add_option("config", configs, "Scenario config JSON file(s)")->required()->check(CLI::ExistingFile);
  sim->add_option("-o,--out", sim_out, "Output directory (one subdirectory per config when several)");
  sim->add_flag("--record-timings", timings, "Store wall-clock stage timings in the manifest");

  auto* ana = app.add_subcommand("analyze", "Compute MFD samples, hysteresis and KPIs from a simulation directory");
  std::string ana_dir, ana_out;
  ana->add_option("dir", ana_dir, "Simulation output directory")->required();
  ana->add_option("-o,--out", ana_out, "Output directory (defaults to the input directory)");

  auto* fit = app.add_subcommand("fit", "Fit the vMFD or pMFD model to mfd_samples.csv");
  std::string fit_in, fit_kind = "vMFD", fit_out = "fit_report.json";
  SolverConfig solver;
  fit->add_option("samples", fit_in, "mfd_samples.csv")->required();
  fit->add_option("-k,--kind", fit_kind, "vMFD or pMFD");
  fit->add_option("-o,--out", fit_out, "Report path");
  fit->add_option("--restarts", solver.restarts, "Jittered restarts");
  fit->add_option("--seed", solver.seed, "Restart seed");

  auto* rep = app.add_subcommand("report", "Compare two or more analysed scenarios");
  std::vector<std::string> rep_dirs;
  std::string rep_out = "report";
  rep->add_option("dirs", rep_dirs, "Analysis directories; the first is the baseline")->required();
  rep->add_option("-o,--out", rep_out, "Output directory");

  auto* val = app.add_subcommand("validate", "Validate a scenario config or verify a run manifest");
  std::string val_config, val_manifest;
  val->add_option("config", val_config, "Scenario config JSON file");
  val->add_option("--manifest", val_manifest, "manifest.json to verify");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  if (sim->parsed()) return cmd_simulate(configs, sim_out, timings);
  if (ana->parsed()) return cmd_analyze(ana_dir, ana_out);
  if (fit->parsed()) return cmd_fit(fit_in, fit_kind, fit_out, solver);
  if (rep->parsed()) return cmd_report(rep_dirs, rep_out);
  if (val->parsed()) return cmd_validate(val_config, val_manifest);
  return kInvalid;
}
