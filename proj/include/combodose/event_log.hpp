#pragma once

// Line-delimited JSON trial event log: one record per cohort.

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "combodose/trial_engine.hpp"

namespace combodose {

nlohmann::json to_json(const Assignment& a);
nlohmann::json to_json(const CohortAssignment& c);
nlohmann::json to_json(const Outcome& o);
nlohmann::json to_json(const StopEvaluation& s);
// The lattice is included only when `with_lattice` is set.
nlohmann::json to_json(const Recommendation& r, bool with_lattice = false);
nlohmann::json to_json(const CohortEvent& e);

Assignment assignment_from_json(const nlohmann::json& j);
CohortAssignment cohort_assignment_from_json(const nlohmann::json& j);
Outcome outcome_from_json(const nlohmann::json& j);
Recommendation recommendation_from_json(const nlohmann::json& j);
CohortEvent cohort_event_from_json(const nlohmann::json& j);

void write_event_log(std::ostream& os, const std::vector<CohortEvent>& events);
// Throws InvalidParams naming the 1-based line of a malformed record.
std::vector<CohortEvent> read_event_log(std::istream& is);

}  // namespace combodose
