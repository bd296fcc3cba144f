#include "combodose/event_log.hpp"

#include <istream>
#include <ostream>

#include "combodose/errors.hpp"

namespace combodose {

using nlohmann::json;

json to_json(const Assignment& a) {
  return {{"patient", a.patient}, {"x_index", a.x_index}, {"y_index", a.y_index},
          {"x", a.x},             {"y", a.y}};
}

json to_json(const CohortAssignment& c) {
  json patients = json::array();
  for (const auto& a : c.patients) patients.push_back(to_json(a));
  return {{"stage", c.stage},
          {"cohort", c.cohort},
          {"alpha", c.alpha ? json(*c.alpha) : json(nullptr)},
          {"patients", patients}};
}

json to_json(const Outcome& o) { return {{"patient", o.patient}, {"z_T", o.z_T}, {"z_E", o.z_E}}; }

json to_json(const StopEvaluation& s) {
  return {{"stage", s.stage},
          {"probability", s.probability},
          {"threshold", s.threshold},
          {"stop", s.stop}};
}

json to_json(const Recommendation& r, bool with_lattice) {
  json j = {{"admissible", r.admissible},
            {"x_opt", r.x_opt},
            {"y_opt", r.y_opt},
            {"U_hat", r.U_hat},
            {"lattice_resolution", r.lattice_resolution}};
  if (with_lattice) j["lattice_U_hat"] = r.lattice_U_hat;
  return j;
}

json to_json(const CohortEvent& e) {
  json assignments = json::array();
  for (const auto& a : e.assignments) assignments.push_back(to_json(a));
  json outcomes = json::array();
  for (const auto& o : e.outcomes) outcomes.push_back(to_json(o));
  return {{"stage", e.stage},
          {"cohort", e.cohort},
          {"alpha", e.alpha ? json(*e.alpha) : json(nullptr)},
          {"assignments", assignments},
          {"outcomes", outcomes},
          {"fit_seed", e.fit_seed},
          {"stop_rule", e.stop_rule ? to_json(*e.stop_rule) : json(nullptr)},
          {"status", to_string(e.status)},
          {"no_admissible_dose", e.no_admissible_dose},
          {"recommendation", e.recommendation ? to_json(*e.recommendation) : json(nullptr)},
          {"next_allocation_seed", e.next_allocation_seed}};
}

Assignment assignment_from_json(const json& j) {
  return {j.at("patient").get<int>(), j.at("x_index").get<int>(), j.at("y_index").get<int>(),
          j.at("x").get<double>(), j.at("y").get<double>()};
}

CohortAssignment cohort_assignment_from_json(const json& j) {
  CohortAssignment c;
  c.stage = j.at("stage").get<int>();
  c.cohort = j.at("cohort").get<int>();
  if (!j.at("alpha").is_null()) c.alpha = j.at("alpha").get<double>();
  for (const auto& a : j.at("patients")) c.patients.push_back(assignment_from_json(a));
  return c;
}

Outcome outcome_from_json(const json& j) {
  return {j.at("patient").get<int>(), j.at("z_T").get<int>(), j.at("z_E").get<int>()};
}

Recommendation recommendation_from_json(const json& j) {
  Recommendation r;
  r.admissible = j.at("admissible").get<bool>();
  r.x_opt = j.at("x_opt").get<double>();
  r.y_opt = j.at("y_opt").get<double>();
  r.U_hat = j.at("U_hat").get<double>();
  r.lattice_resolution = j.at("lattice_resolution").get<int>();
  if (j.contains("lattice_U_hat")) r.lattice_U_hat = j.at("lattice_U_hat").get<std::vector<double>>();
  return r;
}

CohortEvent cohort_event_from_json(const json& j) {
  CohortEvent e;
  e.stage = j.at("stage").get<int>();
  e.cohort = j.at("cohort").get<int>();
  if (!j.at("alpha").is_null()) e.alpha = j.at("alpha").get<double>();
  for (const auto& a : j.at("assignments")) e.assignments.push_back(assignment_from_json(a));
  for (const auto& o : j.at("outcomes")) e.outcomes.push_back(outcome_from_json(o));
  e.fit_seed = j.at("fit_seed").get<std::uint64_t>();
  if (!j.at("stop_rule").is_null()) {
    const auto& s = j.at("stop_rule");
    e.stop_rule = StopEvaluation{s.at("stage").get<int>(), s.at("probability").get<double>(),
                                 s.at("threshold").get<double>(), s.at("stop").get<bool>()};
  }
  e.status = parse_trial_status(j.at("status").get<std::string>());
  e.no_admissible_dose = j.at("no_admissible_dose").get<bool>();
  if (!j.at("recommendation").is_null()) {
    e.recommendation = recommendation_from_json(j.at("recommendation"));
  }
  e.next_allocation_seed = j.at("next_allocation_seed").get<std::uint64_t>();
  return e;
}

void write_event_log(std::ostream& os, const std::vector<CohortEvent>& events) {
  for (const auto& e : events) os << to_json(e).dump() << '\n';
}

std::vector<CohortEvent> read_event_log(std::istream& is) {
  std::vector<CohortEvent> events;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      events.push_back(cohort_event_from_json(json::parse(line)));
    } catch (const std::exception& ex) {
      throw InvalidParams("event log line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return events;
}

}  // namespace combodose
