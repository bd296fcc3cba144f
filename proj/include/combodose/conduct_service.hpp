#pragma once

// Live trial conduct over HTTP+JSON. The service core is transport-free so it
// can be driven directly in tests; `mount` binds it to an httplib server.
//
// Each session is persisted as an append-only JSONL file in the data
// directory: a header line with the design and seed, then one line per
// recorded cohort. Restarting the service replays every file.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "combodose/config.hpp"
#include "combodose/trial_engine.hpp"

namespace httplib {
class Server;
}

namespace combodose {

struct ServiceOptions {
  std::filesystem::path data_dir = "sessions";
  // Design used when a create request leaves fields out.
  DesignConfig defaults;
};

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

class ConductService {
 public:
  // Throws Error if an existing session file cannot be replayed.
  explicit ConductService(ServiceOptions options);
  ~ConductService();

  ConductService(const ConductService&) = delete;
  ConductService& operator=(const ConductService&) = delete;

  // Body: optional design overrides (same layout as the config file) and an
  // optional "seed".
  ServiceResponse create_session(const nlohmann::json& body);
  ServiceResponse get_session(const std::string& id);
  // Body: {"operation_token": "...", "outcomes": [{"patient", "z_T", "z_E"}]}.
  ServiceResponse record_cohort(const std::string& id, const nlohmann::json& body);
  ServiceResponse get_posterior(const std::string& id);
  ServiceResponse get_recommendation(const std::string& id);
  ServiceResponse health() const;

  std::vector<std::string> session_ids() const;

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;
  void load(const std::filesystem::path& file);

  ServiceOptions options_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

// Registers the routes on `server`. The service must outlive the server.
void mount(httplib::Server& server, ConductService& service);

}  // namespace combodose
