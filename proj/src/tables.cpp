#include "combodose/tables.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "combodose/errors.hpp"

namespace combodose {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

const char* const kResultsHeader =
    "trial,n_trials,seed,status,enrolled,dlt_count,dlt_rate,has_recommendation,x_opt,y_opt,"
    "U_hat_opt,recommended_true_utility,n_ar,ar_mean_true_utility,ar_doses";
constexpr std::size_t kResultsColumns = 15;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

long long parse_int(const std::string& s) {
  std::size_t used = 0;
  const long long v = std::stoll(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

}  // namespace

void write_results_table(std::ostream& os, const std::vector<TrialRow>& rows, const Scenario& sc) {
  os << kResultsHeader << '\n';
  for (const auto& r : rows) {
    const double rate = r.enrolled > 0 ? static_cast<double>(r.dlt_count) / r.enrolled : 0.0;
    const double rec_u = r.has_recommendation ? true_surface(sc, r.x_opt, r.y_opt, true).U : 0.0;
    double ar_sum = 0.0;
    std::string doses;
    for (const auto& [x, y] : r.ar_doses) {
      ar_sum += true_surface(sc, x, y).U;
      if (!doses.empty()) doses += ';';
      doses += format_double(x) + ':' + format_double(y);
    }
    const double ar_mean = r.ar_doses.empty() ? 0.0 : ar_sum / r.ar_doses.size();
    os << r.trial << ',' << rows.size() << ',' << r.seed << ',' << to_string(r.status) << ','
       << r.enrolled << ',' << r.dlt_count << ',' << format_double(rate) << ','
       << (r.has_recommendation ? 1 : 0) << ',' << format_double(r.x_opt) << ','
       << format_double(r.y_opt) << ',' << format_double(r.U_hat_opt) << ','
       << format_double(rec_u) << ',' << r.ar_doses.size() << ',' << format_double(ar_mean) << ','
       << doses << '\n';
  }
}

std::vector<TrialRow> read_results_table(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kResultsHeader) {
    throw InvalidParams("line 1: missing or unexpected results header");
  }
  std::vector<TrialRow> rows;
  long long expected = -1;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    try {
      if (cols.size() != kResultsColumns) throw std::invalid_argument("column count");
      TrialRow r;
      r.trial = static_cast<int>(parse_int(cols[0]));
      const long long n = parse_int(cols[1]);
      if (expected < 0) expected = n;
      if (n != expected || r.trial != static_cast<int>(rows.size())) {
        throw std::invalid_argument("trial numbering");
      }
      r.seed = std::stoull(cols[2]);
      r.status = parse_trial_status(cols[3]);
      r.enrolled = static_cast<int>(parse_int(cols[4]));
      r.dlt_count = static_cast<int>(parse_int(cols[5]));
      const long long has = parse_int(cols[7]);
      if (has != 0 && has != 1) throw std::invalid_argument("has_recommendation");
      r.has_recommendation = has == 1;
      r.x_opt = parse_double(cols[8]);
      r.y_opt = parse_double(cols[9]);
      r.U_hat_opt = parse_double(cols[10]);
      const long long n_ar = parse_int(cols[12]);
      if (!cols[14].empty()) {
        for (const auto& pair : split(cols[14], ';')) {
          const auto xy = split(pair, ':');
          if (xy.size() != 2) throw std::invalid_argument("ar_doses");
          r.ar_doses.emplace_back(parse_double(xy[0]), parse_double(xy[1]));
        }
      }
      if (n_ar != static_cast<long long>(r.ar_doses.size())) throw std::invalid_argument("n_ar");
      if (r.dlt_count < 0 || r.dlt_count > r.enrolled) throw std::invalid_argument("dlt_count");
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      throw InvalidParams("line " + std::to_string(line_no) + ": malformed results row");
    }
  }
  if (expected >= 0 && static_cast<long long>(rows.size()) != expected) {
    throw InvalidParams("results table is truncated: " + std::to_string(rows.size()) + " of " +
                        std::to_string(expected) + " trials");
  }
  return rows;
}

std::string format_oc_summary(const OperatingCharacteristics& oc, const Scenario& sc) {
  const auto target = brute_force_target(sc);
  const auto& u = oc.recommended_true_utility;
  std::ostringstream os;
  os << "{\n";
  os << "  \"scenario\": " << nlohmann::json(sc.name).dump() << ",\n";
  os << "  \"n_trials\": " << oc.n_trials << ",\n";
  os << "  \"avg_dlt_rate\": " << format_double(oc.avg_dlt_rate) << ",\n";
  os << "  \"pct_trials_dlt_above_thetaT\": " << format_double(oc.pct_trials_dlt_above_thetaT) << ",\n";
  os << "  \"pct_trials_dlt_above_thetaT_plus_10\": "
     << format_double(oc.pct_trials_dlt_above_thetaT_plus_10) << ",\n";
  os << "  \"pct_early_stop\": " << format_double(oc.pct_early_stop) << ",\n";
  os << "  \"pct_stop_stage1\": " << format_double(oc.pct_stop_stage1) << ",\n";
  os << "  \"pct_stop_stage2\": " << format_double(oc.pct_stop_stage2) << ",\n";
  os << "  \"recommended_true_utility\": {\"n\": " << u.n << ", \"mean\": " << format_double(u.mean)
     << ", \"median\": " << format_double(u.median) << ", \"p025\": " << format_double(u.p025)
     << ", \"p975\": " << format_double(u.p975) << "},\n";
  os << "  \"n_ar_patients\": " << oc.n_ar_patients << ",\n";
  os << "  \"avg_ar_true_utility\": " << format_double(oc.avg_ar_true_utility) << ",\n";
  os << "  \"target\": {\"x\": " << format_double(target.x) << ", \"y\": " << format_double(target.y)
     << ", \"utility\": " << format_double(target.utility) << "}\n";
  os << "}\n";
  return os.str();
}

void write_surface_table(std::ostream& os, const Scenario& sc, int resolution) {
  os << "x,y,pi_T,pi_E,U\n";
  for (int i = 0; i < resolution; ++i) {
    const double x = static_cast<double>(i) / (resolution - 1);
    for (int j = 0; j < resolution; ++j) {
      const double y = static_cast<double>(j) / (resolution - 1);
      const auto t = true_surface(sc, x, y, true);
      os << format_double(x) << ',' << format_double(y) << ',' << format_double(t.pi_T) << ','
         << format_double(t.pi_E) << ',' << format_double(t.U) << '\n';
    }
  }
}

}  // namespace combodose
