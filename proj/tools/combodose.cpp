// combodose: simulate, oc, serve, target.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <pthread.h>

#include <CLI11.hpp>
#include <httplib.h>

#include "combodose/conduct_service.hpp"
#include "combodose/config.hpp"
#include "combodose/errors.hpp"
#include "combodose/event_log.hpp"
#include "combodose/tables.hpp"

namespace fs = std::filesystem;
using namespace combodose;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

// Input problems the user can fix: bad config, missing files, malformed tables.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream os(p, std::ios::binary);
  os << content;
  if (!os) throw Error("cannot write " + p.string());
}

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

int cmd_simulate(const std::string& config_path, std::optional<int> trials,
                 std::optional<std::uint64_t> seed, std::optional<std::string> out,
                 std::optional<int> workers) {
  RunConfig rc = load_run_config(config_path);
  if (!out) out = env("COMBODOSE_OUT_DIR");
  if (!workers) {
    if (const auto w = env("COMBODOSE_WORKERS")) {
      try {
        workers = std::stoi(*w);
      } catch (const std::exception&) {
        throw ConfigError("COMBODOSE_WORKERS must be an integer", {"workers"});
      }
    }
  }
  if (trials) rc.trials = *trials;
  if (seed) rc.seed = *seed;
  if (out) rc.out_dir = *out;
  if (workers) rc.workers = *workers;
  if (rc.trials < 1) throw ConfigError("trials must be at least 1", {"trials"});
  if (rc.workers < 1) throw ConfigError("workers must be at least 1", {"workers"});

  const Scenario sc = load_scenario(rc.scenario_path);
  const auto design = rc.design.simulation_design();
  if (sc.kind == ScenarioKind::tabular &&
      (sc.x_levels != design.grid.x_levels || sc.y_levels != design.grid.y_levels)) {
    throw ConfigError("tabular scenario levels do not match the design grid", {"scenario"});
  }

  const fs::path dir(rc.out_dir);
  fs::create_directories(dir / "events");
  const auto results = replicate(sc, design, rc.trials, rc.seed, rc.workers);

  std::vector<TrialRow> rows;
  rows.reserve(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    rows.push_back(to_row(results[i], static_cast<int>(i)));
    char name[32];
    std::snprintf(name, sizeof name, "trial_%05zu.jsonl", i);
    std::ostringstream ev;
    write_event_log(ev, results[i].events);
    write_file(dir / "events" / name, ev.str());
  }
  std::ostringstream table;
  write_results_table(table, rows, sc);
  write_file(dir / "results.csv", table.str());
  const auto oc = operating_characteristics(rows, sc);
  write_file(dir / "oc_summary.json", format_oc_summary(oc, sc));
  std::ostringstream surface;
  write_surface_table(surface, sc, design.lattice_resolution);
  write_file(dir / "utility_surface.csv", surface.str());
  write_file(dir / "scenario.json", to_json(sc).dump(2) + "\n");
  // Output location and worker count do not affect results, so they are
  // left out to keep artifacts comparable across runs.
  auto cfg = to_json(rc);
  cfg.erase("out");
  cfg.erase("workers");
  cfg["scenario"] = "scenario.json";
  write_file(dir / "config.json", cfg.dump(2) + "\n");

  std::cerr << "simulated " << rc.trials << " trials of " << sc.name << "; early stops "
            << oc.pct_early_stop << "%, mean recommended utility "
            << oc.recommended_true_utility.mean << "\n";
  return 0;
}

int cmd_oc(const std::string& results_path, const std::string& scenario_path,
           std::optional<std::string> out) {
  const Scenario sc = load_scenario(scenario_path);
  std::ifstream in(results_path);
  if (!in) throw UsageError("cannot open " + results_path);
  std::vector<TrialRow> rows;
  try {
    rows = read_results_table(in);
  } catch (const InvalidParams& e) {
    throw UsageError(results_path + ": " + e.what());
  }
  if (rows.empty()) throw UsageError(results_path + ": no trials");
  const std::string summary = format_oc_summary(operating_characteristics(rows, sc), sc);
  if (out) {
    write_file(*out, summary);
  } else {
    std::cout << summary;
  }
  return 0;
}

int cmd_serve(const std::optional<std::string>& config_path, int port, const std::string& host,
              const std::string& data_dir) {
  ServiceOptions opts;
  opts.data_dir = data_dir;
  if (config_path) {
    opts.defaults = parse_design_config(read_json_file(*config_path),
                                        {"scenario", "trials", "seed", "out", "workers"});
  }

  // Signals are handled on a dedicated thread so the server can be stopped
  // outside a signal handler.
  sigset_t mask;
  sigemptyset(&mask);
  sigaddset(&mask, SIGINT);
  sigaddset(&mask, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &mask, nullptr);

  ConductService service(opts);
  httplib::Server server;
  mount(server, service);
  // httplib's default adds SO_REUSEPORT, which would let a second server share a busy port.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  if (!server.bind_to_port(host, port)) {
    throw UsageError("cannot bind " + host + ":" + std::to_string(port) + " (port busy?)");
  }
  std::thread watcher([&] {
    int sig = 0;
    sigwait(&mask, &sig);
    server.stop();
  });
  std::cerr << "serving on " << host << ":" << port << " with " << service.session_ids().size()
            << " sessions from " << data_dir << "\n";
  server.listen_after_bind();
  // A normal return from listen means stop() ran, so the watcher has exited.
  watcher.join();
  std::cerr << "shut down\n";
  return 0;
}

int cmd_target(const std::string& scenario_path, int resolution) {
  const Scenario sc = load_scenario(scenario_path);
  const auto t = brute_force_target(sc, resolution);
  std::cout << "{\"x\": " << format_double(t.x) << ", \"y\": " << format_double(t.y)
            << ", \"utility\": " << format_double(t.utility) << "}\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage Bayesian dose-combination design"};
  app.require_subcommand(1);

  std::string config;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
  auto* sim = app.add_subcommand("simulate", "replicate trials under a scenario");
  sim->add_option("--config", config, "run configuration")->required();
  sim->add_option("--trials", trials);
  sim->add_option("--seed", seed);
  sim->add_option("--out", out, "output directory (env COMBODOSE_OUT_DIR)");
  sim->add_option("--workers", workers, "parallel trials (env COMBODOSE_WORKERS)");

  std::string results;
  std::string scenario;
  std::optional<std::string> oc_out;
  auto* oc = app.add_subcommand("oc", "operating characteristics from a results table");
  oc->add_option("--results", results)->required();
  oc->add_option("--scenario", scenario)->required();
  oc->add_option("--out", oc_out, "write the summary here instead of stdout");

  std::optional<std::string> serve_config;
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string data_dir = "sessions";
  auto* serve = app.add_subcommand("serve", "run the conduct service");
  serve->add_option("--config", serve_config, "default design for new sessions");
  serve->add_option("--port", port);
  serve->add_option("--host", host);
  serve->add_option("--data", data_dir, "session log directory");

  std::string target_scenario;
  int resolution = 1001;
  auto* target = app.add_subcommand("target", "brute-force target combination of a scenario");
  target->add_option("--scenario", target_scenario)->required();
  target->add_option("--resolution", resolution);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sim) return cmd_simulate(config, trials, seed, out, workers);
    if (*oc) return cmd_oc(results, scenario, oc_out);
    if (*serve) return cmd_serve(serve_config, port, host, data_dir);
    if (*target) return cmd_target(target_scenario, resolution);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
