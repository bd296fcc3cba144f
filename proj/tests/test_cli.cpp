#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kSource = COMBODOSE_SOURCE_DIR;

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("combodose_cli_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// Runs the CLI with stdout/stderr captured under `dir`; returns the exit code.
int run(const std::string& args, const fs::path& dir) {
  const std::string cmd = std::string(COMBODOSE_CLI) + " " + args + " >" + (dir / "stdout").string() +
                          " 2>" + (dir / "stderr").string();
  const int rc = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

json small_config(const fs::path& scenario) {
  json j;
  std::ifstream(kSource / "configs/default.json") >> j;
  j["scenario"] = scenario.string();
  j["mcmc"]["n_burn"] = 200;
  j["mcmc"]["n_keep"] = 100;
  j["lattice_resolution"] = 21;
  return j;
}

fs::path write_config(const fs::path& dir, const json& j, const std::string& name = "run.json") {
  std::ofstream(dir / name) << j.dump(2);
  return dir / name;
}

int count_lines(const std::string& s) {
  return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

int free_port() {
  const int fd = socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  socklen_t len = sizeof addr;
  int port = -1;
  if (bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0 &&
      getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0) {
    port = ntohs(addr.sin_port);
  }
  close(fd);
  return port;
}

}  // namespace

TEST_CASE("simulate writes results, summary and surface tables") {
  const auto dir = scratch("simulate");
  const auto cfg = write_config(dir, small_config(kSource / "scenarios/parametric_1.json"));
  const auto out = dir / "out";
  REQUIRE(run("simulate --config " + cfg.string() + " --trials 2 --out " + out.string(), dir) == 0);
  const auto table = slurp(out / "results.csv");
  CHECK(count_lines(table) == 3);
  CHECK(json::parse(slurp(out / "oc_summary.json"))["n_trials"] == 2);
  CHECK(count_lines(slurp(out / "utility_surface.csv")) == 21 * 21 + 1);
  CHECK(fs::exists(out / "events/trial_00000.jsonl"));
  CHECK(fs::exists(out / "events/trial_00001.jsonl"));

  // oc recomputes the same bytes from the table.
  REQUIRE(run("oc --results " + (out / "results.csv").string() + " --scenario " +
                  (out / "scenario.json").string(),
              dir) == 0);
  CHECK(slurp(dir / "stdout") == slurp(out / "oc_summary.json"));

  // A different worker count and output location give identical artifacts.
  const auto out2 = dir / "out2";
  REQUIRE(run("simulate --config " + cfg.string() + " --trials 2 --workers 2 --out " + out2.string(), dir) == 0);
  for (const auto* f : {"results.csv", "oc_summary.json", "utility_surface.csv", "config.json",
                        "events/trial_00000.jsonl", "events/trial_00001.jsonl"}) {
    CHECK_MESSAGE(slurp(out / f) == slurp(out2 / f), f);
  }

  // Environment overrides.
  const auto out3 = dir / "out3";
  const std::string env = "COMBODOSE_OUT_DIR=" + out3.string() + " ";
  const int rc = std::system((env + COMBODOSE_CLI + " simulate --config " + cfg.string() +
                              " --trials 1 2>/dev/null").c_str());
  CHECK(WEXITSTATUS(rc) == 0);
  CHECK(fs::exists(out3 / "results.csv"));
  fs::remove_all(dir);
}

TEST_CASE("simulate rejects bad configs with exit 2") {
  const auto dir = scratch("badcfg");
  CHECK(run("simulate --config " + write_config(dir, small_config(dir / "missing.json")).string(), dir) == 2);
  CHECK(slurp(dir / "stderr").find("scenario") != std::string::npos);

  auto m1 = small_config(kSource / "scenarios/parametric_1.json");
  m1["design"]["m1"] = 3;
  CHECK(run("simulate --config " + write_config(dir, m1).string(), dir) == 2);
  CHECK(slurp(dir / "stderr").find("m1 must equal 2") != std::string::npos);

  auto zero = small_config(kSource / "scenarios/parametric_1.json");
  zero["trials"] = 0;
  CHECK(run("simulate --config " + write_config(dir, zero).string(), dir) == 2);
  CHECK(run("simulate --config " + (dir / "nothing.json").string(), dir) == 2);
  CHECK(run("simulate", dir) == 2);
  CHECK(run("frobnicate", dir) == 2);
  fs::remove_all(dir);
}

TEST_CASE("oc rejects truncated and empty tables") {
  const auto dir = scratch("oc");
  const auto cfg = write_config(dir, small_config(kSource / "scenarios/parametric_1.json"));
  const auto out = dir / "out";
  REQUIRE(run("simulate --config " + cfg.string() + " --trials 3 --out " + out.string(), dir) == 0);
  const auto table = slurp(out / "results.csv");
  const auto scenario = (out / "scenario.json").string();

  std::istringstream is(table);
  std::string header, r1, r2, r3;
  std::getline(is, header);
  std::getline(is, r1);
  std::getline(is, r2);
  std::getline(is, r3);
  std::ofstream(dir / "short.csv") << header << '\n' << r1 << '\n' << r2 << '\n';
  CHECK(run("oc --results " + (dir / "short.csv").string() + " --scenario " + scenario, dir) == 2);

  std::ofstream(dir / "cut.csv") << header << '\n' << r1 << '\n' << r2.substr(0, r2.size() / 2) << '\n';
  CHECK(run("oc --results " + (dir / "cut.csv").string() + " --scenario " + scenario, dir) == 2);
  CHECK(slurp(dir / "stderr").find("line 3") != std::string::npos);

  std::ofstream(dir / "empty.csv") << header << '\n';
  CHECK(run("oc --results " + (dir / "empty.csv").string() + " --scenario " + scenario, dir) == 2);
  CHECK(slurp(dir / "stderr").find("no trials") != std::string::npos);
  CHECK(run("oc --results " + (dir / "absent.csv").string() + " --scenario " + scenario, dir) == 2);
  fs::remove_all(dir);
}

TEST_CASE("target prints the documented optimum") {
  const auto dir = scratch("target");
  const auto path = kSource / "scenarios/parametric_1.json";
  REQUIRE(run("target --scenario " + path.string(), dir) == 0);
  const auto got = json::parse(slurp(dir / "stdout"));
  json sc;
  std::ifstream(path) >> sc;
  CHECK(got["utility"].get<double>() == doctest::Approx(sc["target"]["utility"].get<double>()).epsilon(1e-9));
  fs::remove_all(dir);
}

TEST_CASE("serve answers health checks and shuts down on SIGINT") {
  const auto dir = scratch("serve");
  const int port = free_port();
  REQUIRE(port > 0);
  const pid_t pid = fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    const std::string p = std::to_string(port);
    const std::string data = (dir / "sessions").string();
    const std::string err = (dir / "serve.err").string();
    if (freopen(err.c_str(), "w", stderr) == nullptr || freopen("/dev/null", "w", stdout) == nullptr) _exit(126);
    execl(COMBODOSE_CLI, COMBODOSE_CLI, "serve", "--port", p.c_str(), "--data", data.c_str(),
          static_cast<char*>(nullptr));
    _exit(127);
  }
  // Kills the server if a REQUIRE below bails out early.
  struct Reaper {
    pid_t pid;
    bool done = false;
    ~Reaper() {
      if (!done) {
        kill(pid, SIGKILL);
        waitpid(pid, nullptr, 0);
      }
    }
  } reaper{pid};
  httplib::Client cli("127.0.0.1", port);
  httplib::Result res;
  for (int k = 0; k < 100 && !res; ++k) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    res = cli.Get("/healthz");
  }
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["status"] == "ok");
  const auto created = cli.Post("/sessions", std::string(R"({"seed": 3})"), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const std::string id = json::parse(created->body)["id"];

  // Port now busy.
  CHECK(run("serve --port " + std::to_string(port) + " --data " + (dir / "other").string(), dir) == 2);

  kill(pid, SIGINT);
  int status = 0;
  waitpid(pid, &status, 0);
  reaper.done = true;
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);
  CHECK(fs::exists(dir / "sessions" / (id + ".jsonl")));
  CHECK(slurp(dir / "serve.err").find("shut down") != std::string::npos);
  fs::remove_all(dir);
}
