#include "combodose/conduct_service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>

#include <httplib.h>

#include "combodose/errors.hpp"
#include "combodose/event_log.hpp"

namespace combodose {

using nlohmann::json;

namespace {

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string random_id() {
  static std::mutex m;
  static std::random_device rd;
  static std::mt19937_64 gen(rd());
  std::lock_guard lock(m);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(gen()));
  return buf;
}

ServiceResponse error(int status, const std::string& code, const std::string& message,
                      std::vector<std::string> fields = {}) {
  return {status, {{"error", code}, {"message", message}, {"fields", fields}}};
}

ServiceResponse not_found(const std::string& id) {
  return error(404, "not_found", "unknown session " + id);
}

json matrix(const std::vector<double>& flat, int rows, int cols) {
  json m = json::array();
  for (int i = 0; i < rows; ++i) {
    json row = json::array();
    for (int j = 0; j < cols; ++j) row.push_back(flat[static_cast<std::size_t>(i * cols + j)]);
    m.push_back(row);
  }
  return m;
}

json diagnostics_json(const ChainSet& c) {
  json params = json::array();
  for (const auto& d : c.diagnostics) {
    params.push_back({{"name", d.name}, {"acceptance", d.acceptance}, {"split_rhat", d.split_rhat}});
  }
  const double rhat = c.max_split_rhat();
  return {{"n_chains", c.n_chains},
          {"draws_per_chain", c.draws_per_chain()},
          {"max_split_rhat", rhat},
          {"rhat_warning", !(rhat < 1.05)},
          {"parameters", params}};
}

std::string action_for(const CohortEvent& ev, bool stage_changed) {
  if (ev.status == TrialStatus::completed) return "completed";
  if (is_stopped(ev.status)) return "stopped";
  if (stage_changed) return "stage_transition";
  return "next_assignment";
}

std::vector<Outcome> parse_outcomes(const json& body, std::vector<std::string>& bad) {
  std::vector<Outcome> out;
  if (!body.contains("outcomes") || !body.at("outcomes").is_array()) {
    bad.emplace_back("outcomes");
    return out;
  }
  const auto& arr = body.at("outcomes");
  for (std::size_t k = 0; k < arr.size(); ++k) {
    const auto& o = arr[k];
    const std::string base = "outcomes[" + std::to_string(k) + "]";
    if (!o.is_object()) {
      bad.push_back(base);
      continue;
    }
    Outcome v;
    const auto field = [&](const char* key, int& dst, bool binary) {
      if (!o.contains(key) || !o.at(key).is_number_integer()) {
        bad.push_back(base + "." + key);
        return;
      }
      dst = o.at(key).get<int>();
      if (binary && dst != 0 && dst != 1) bad.push_back(base + "." + key);
    };
    field("patient", v.patient, false);
    field("z_T", v.z_T, true);
    field("z_E", v.z_E, true);
    for (const auto& [key, value] : o.items()) {
      if (key != "patient" && key != "z_T" && key != "z_E") bad.push_back(base + "." + key);
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

struct ConductService::Session {
  std::mutex mutex;
  std::string id;
  std::filesystem::path log_path;
  std::string created;
  std::string updated;
  std::uint64_t seed = 0;
  DesignConfig design;
  std::unique_ptr<Trial> trial;
  // operation token -> (request outcomes, response body)
  std::map<std::string, std::pair<json, json>> operations;

  Session(std::string id_, std::filesystem::path path, DesignConfig d, std::uint64_t s)
      : id(std::move(id_)), log_path(std::move(path)), seed(s), design(std::move(d)) {
    TrialOptions opts;
    opts.lattice_resolution = design.lattice_resolution;
    opts.summary_lattice_resolution = design.lattice_resolution;
    opts.fit_efficacy_in_stage1 = true;
    trial = std::make_unique<Trial>(design.grid(), design.constants, design.tradeoff, design.mcmc,
                                    seed, opts);
  }

  void append(const json& line) {
    std::ofstream os(log_path, std::ios::app);
    os << line.dump() << '\n';
    os.flush();
    if (!os) throw Error("cannot append to session log " + log_path.string());
  }

  // Applies outcomes and builds the response body. Shared by live requests
  // and replay so both produce identical responses.
  json apply(const std::string& token, const std::vector<Outcome>& outcomes) {
    const int stage_before = trial->state().stage;
    const CohortEvent ev = trial->record(outcomes);
    const auto& st = trial->state();
    json body = {{"session", id},
                 {"operation_token", token},
                 {"action", action_for(ev, st.stage != stage_before && st.status == TrialStatus::active)},
                 {"status", to_string(st.status)},
                 {"stage", st.stage},
                 {"enrolled", st.enrolled()},
                 {"event", to_json(ev)},
                 {"next_assignment", trial->pending() ? to_json(*trial->pending()) : json(nullptr)},
                 {"stop_rule", ev.stop_rule ? to_json(*ev.stop_rule) : json(nullptr)},
                 {"recommendation",
                  ev.recommendation ? to_json(*ev.recommendation) : json(nullptr)},
                 {"diagnostics", diagnostics_json(*trial->chains())}};
    return body;
  }

  json view() const {
    const auto& st = trial->state();
    json events = json::array();
    for (const auto& e : trial->events()) events.push_back(to_json(e));
    return {{"id", id},
            {"created", created},
            {"updated", updated},
            {"seed", seed},
            {"design", to_json(design)},
            {"status", to_string(st.status)},
            {"stage", st.stage},
            {"cohort1", st.cohort1},
            {"cohort2", st.cohort2},
            {"enrolled", st.enrolled()},
            {"N", st.constants.N()},
            {"dlt_count", st.data.dlt_count()},
            {"no_admissible_dose", st.no_admissible_dose},
            {"x_levels", st.grid.x_levels},
            {"y_levels", st.grid.y_levels},
            {"pending", trial->pending() ? to_json(*trial->pending()) : json(nullptr)},
            {"events", events}};
  }
};

ConductService::ConductService(ServiceOptions options) : options_(std::move(options)) {
  std::filesystem::create_directories(options_.data_dir);
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(options_.data_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) load(f);
}

ConductService::~ConductService() = default;

void ConductService::load(const std::filesystem::path& file) {
  std::ifstream is(file);
  std::string line;
  int line_no = 0;
  std::shared_ptr<Session> s;
  try {
    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json j = json::parse(line);
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "session") {
        if (s) throw Error("duplicate session header");
        auto design = parse_design_config(j.at("design"));
        s = std::make_shared<Session>(j.at("id").get<std::string>(), file, std::move(design),
                                      j.at("seed").get<std::uint64_t>());
        s->created = j.at("created").get<std::string>();
        s->updated = s->created;
      } else if (kind == "cohort") {
        if (!s) throw Error("cohort record before session header");
        std::vector<Outcome> outcomes;
        for (const auto& o : j.at("outcomes")) outcomes.push_back(outcome_from_json(o));
        const std::string token = j.at("operation_token").get<std::string>();
        json body = s->apply(token, outcomes);
        const CohortEvent logged = cohort_event_from_json(j.at("event"));
        const CohortEvent& replayed = s->trial->events().back();
        if (logged.assignments != replayed.assignments || logged.status != replayed.status ||
            logged.next_allocation_seed != replayed.next_allocation_seed) {
          throw Error("replay diverged from the recorded event");
        }
        s->operations[token] = {j.at("outcomes"), std::move(body)};
        s->updated = j.at("recorded_at").get<std::string>();
      } else {
        throw Error("unknown record kind " + kind);
      }
    }
  } catch (const std::exception& ex) {
    throw Error(file.string() + " line " + std::to_string(line_no) + ": " + ex.what());
  }
  if (!s) throw Error(file.string() + ": missing session header");
  sessions_[s->id] = s;
}

std::shared_ptr<ConductService::Session> ConductService::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::vector<std::string> ConductService::session_ids() const {
  std::shared_lock lock(sessions_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, s] : sessions_) ids.push_back(id);
  return ids;
}

ServiceResponse ConductService::health() const {
  return {200, {{"status", "ok"}, {"sessions", static_cast<int>(session_ids().size())}}};
}

ServiceResponse ConductService::create_session(const json& body) {
  if (!body.is_object()) return error(400, "bad_request", "request body must be a JSON object");
  json merged = to_json(options_.defaults);
  for (const auto& [key, value] : body.items()) {
    if (key == "seed") continue;
    if (merged.contains(key) && merged[key].is_object() && value.is_object()) {
      merged[key].update(value);
    } else {
      merged[key] = value;
    }
  }
  // theta_T is shared by the design and the utility; one override sets both.
  if (body.contains("design") && body["design"].is_object() && body["design"].contains("theta_T") &&
      !(body.contains("utility") && body["utility"].is_object() &&
        body["utility"].contains("theta_T"))) {
    merged["utility"]["theta_T"] = body["design"]["theta_T"];
  }
  DesignConfig design;
  try {
    design = parse_design_config(merged);
  } catch (const ConfigError& e) {
    return error(422, "validation_failed", e.what(), e.fields());
  }
  std::uint64_t seed = 0;
  if (body.contains("seed")) {
    if (!body["seed"].is_number_unsigned()) {
      return error(422, "validation_failed", "seed must be a non-negative integer", {"seed"});
    }
    seed = body["seed"].get<std::uint64_t>();
  } else {
    seed = std::random_device{}();
    seed = (seed << 32) ^ std::random_device{}();
  }

  std::string id;
  do {
    id = random_id();
  } while (find(id));
  auto s = std::make_shared<Session>(id, options_.data_dir / (id + ".jsonl"), design, seed);
  s->created = now_utc();
  s->updated = s->created;
  s->append({{"kind", "session"},
             {"id", id},
             {"created", s->created},
             {"seed", seed},
             {"design", to_json(design)}});
  {
    std::unique_lock lock(sessions_mutex_);
    sessions_[id] = s;
  }
  std::lock_guard lock(s->mutex);
  json view = s->view();
  return {201, view};
}

ServiceResponse ConductService::get_session(const std::string& id) {
  const auto s = find(id);
  if (!s) return not_found(id);
  std::lock_guard lock(s->mutex);
  return {200, s->view()};
}

ServiceResponse ConductService::record_cohort(const std::string& id, const json& body) {
  const auto s = find(id);
  if (!s) return not_found(id);
  if (!body.is_object()) return error(400, "bad_request", "request body must be a JSON object");
  std::vector<std::string> bad;
  std::string token;
  if (!body.contains("operation_token") || !body["operation_token"].is_string() ||
      body["operation_token"].get<std::string>().empty()) {
    bad.emplace_back("operation_token");
  } else {
    token = body["operation_token"].get<std::string>();
  }
  const auto outcomes = parse_outcomes(body, bad);
  for (const auto& [key, value] : body.items()) {
    if (key != "operation_token" && key != "outcomes") bad.push_back(key);
  }
  if (!bad.empty()) return error(422, "validation_failed", "invalid cohort outcomes", bad);

  std::lock_guard lock(s->mutex);
  if (const auto it = s->operations.find(token); it != s->operations.end()) {
    if (it->second.first != body["outcomes"]) {
      return error(409, "token_conflict",
                   "operation token was already used with different outcomes",
                   {"operation_token"});
    }
    return {200, it->second.second};
  }
  const auto& pending = s->trial->pending();
  if (s->trial->state().status != TrialStatus::active || !pending) {
    return error(409, "no_pending_cohort",
                 "session is " + to_string(s->trial->state().status) + "; no cohort is pending");
  }
  // Outcomes must name exactly the pending patients.
  std::vector<int> expected;
  for (const auto& a : pending->patients) expected.push_back(a.patient);
  std::vector<int> given;
  for (const auto& o : outcomes) given.push_back(o.patient);
  std::sort(expected.begin(), expected.end());
  std::sort(given.begin(), given.end());
  if (expected != given) {
    return error(422, "outcome_mismatch",
                 "outcomes must cover exactly the pending patients", {"outcomes"});
  }

  json response;
  try {
    response = s->apply(token, outcomes);
  } catch (const InvalidParams& e) {
    return error(422, "validation_failed", e.what(), {"outcomes"});
  }
  s->updated = now_utc();
  s->append({{"kind", "cohort"},
             {"operation_token", token},
             {"recorded_at", s->updated},
             {"outcomes", body["outcomes"]},
             {"event", to_json(s->trial->events().back())}});
  s->operations[token] = {body["outcomes"], response};
  return {200, response};
}

ServiceResponse ConductService::get_posterior(const std::string& id) {
  const auto s = find(id);
  if (!s) return not_found(id);
  std::lock_guard lock(s->mutex);
  const auto& summary = s->trial->summary();
  if (!summary) return error(409, "no_fit", "no cohort has been recorded yet");
  const auto& st = s->trial->state();
  const auto& ps = *summary;
  json safe = json::array();
  for (int i = 0; i < ps.nx; ++i) {
    json row = json::array();
    for (int j = 0; j < ps.ny; ++j) row.push_back(ps.is_safe(i, j));
    safe.push_back(row);
  }
  json body = {{"session", s->id},
               {"status", to_string(st.status)},
               {"stopped", is_stopped(st.status)},
               {"stage", st.stage},
               {"enrolled", st.enrolled()},
               {"nx", ps.nx},
               {"ny", ps.ny},
               {"x_levels", st.grid.x_levels},
               {"y_levels", st.grid.y_levels},
               {"pi_T_hat", matrix(ps.pi_T_hat, ps.nx, ps.ny)},
               {"pi_E_hat", matrix(ps.pi_E_hat, ps.nx, ps.ny)},
               {"U_hat", matrix(ps.U_hat, ps.nx, ps.ny)},
               {"safe_set", safe},
               {"lattice_resolution", ps.lattice_resolution},
               {"lattice_U_hat", matrix(ps.lattice_U_hat, ps.lattice_resolution,
                                        ps.lattice_resolution)},
               {"pi_AR", nullptr},
               {"diagnostics", diagnostics_json(*s->trial->chains())}};
  if (st.stage == 2 && !ps.safe_set.empty()) {
    const auto probs = ar_probabilities(ps);
    json ar = json::array();
    for (std::size_t k = 0; k < probs.size(); ++k) {
      ar.push_back({{"x_index", ps.safe_set[k].i},
                    {"y_index", ps.safe_set[k].j},
                    {"probability", probs[k]}});
    }
    body["pi_AR"] = ar;
  }
  return {200, body};
}

ServiceResponse ConductService::get_recommendation(const std::string& id) {
  const auto s = find(id);
  if (!s) return not_found(id);
  std::lock_guard lock(s->mutex);
  const auto& rec = s->trial->recommendation();
  json rec_body = nullptr;
  if (rec) {
    rec_body = to_json(*rec);
    rec_body["lattice_U_hat"] = matrix(rec->lattice_U_hat, rec->lattice_resolution,
                                       rec->lattice_resolution);
  }
  return {200,
          {{"session", s->id},
           {"status", to_string(s->trial->state().status)},
           {"available", rec.has_value()},
           {"no_admissible_dose",
            s->trial->state().no_admissible_dose || (rec && !rec->admissible)},
           {"recommendation", rec_body}}};
}

void mount(httplib::Server& server, ConductService& service) {
  const auto reply = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  const auto parse_body = [](const httplib::Request& req, json& out) {
    if (req.body.empty()) {
      out = json::object();
      return true;
    }
    out = json::parse(req.body, nullptr, false);
    return !out.is_discarded();
  };
  const auto bad_json = error(400, "bad_request", "request body is not valid JSON");

  server.Get("/healthz", [&service, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.health());
  });
  server.Post("/sessions", [&service, reply, parse_body, bad_json](const httplib::Request& req,
                                                                 httplib::Response& res) {
    json body;
    reply(res, parse_body(req, body) ? service.create_session(body) : bad_json);
  });
  server.Get(R"(/sessions/([^/]+))",
             [&service, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, service.get_session(req.matches[1]));
             });
  server.Post(R"(/sessions/([^/]+)/cohorts)", [&service, reply, parse_body, bad_json](
                                                  const httplib::Request& req,
                                                  httplib::Response& res) {
    json body;
    reply(res, parse_body(req, body) ? service.record_cohort(req.matches[1], body) : bad_json);
  });
  server.Get(R"(/sessions/([^/]+)/posterior)",
             [&service, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, service.get_posterior(req.matches[1]));
             });
  server.Get(R"(/sessions/([^/]+)/recommendation)",
             [&service, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, service.get_recommendation(req.matches[1]));
             });
  server.set_exception_handler([reply](const httplib::Request&, httplib::Response& res,
                                       std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    reply(res, error(500, "internal", what));
  });
}

}  // namespace combodose
