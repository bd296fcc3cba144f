#include "combodose/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "combodose/errors.hpp"

namespace combodose {

using nlohmann::json;

namespace {

// Reads typed fields from one JSON object and reports keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(where("") + " must be an object", {path_});
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      bad_.push_back(where(key));
    }
  }

  const json* object(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return nullptr;
    return &j_.at(key);
  }

  void allow(const std::string& key) { seen_.insert(key); }

  void bad(const char* key) { bad_.push_back(where(key)); }

  // Throws if any field failed to parse or an unknown key was present.
  void finish() {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) bad_.push_back(where(key) + " (unknown key)");
    }
    if (!bad_.empty()) {
      std::string msg = "invalid configuration:";
      for (const auto& b : bad_) msg += " " + b;
      throw ConfigError(msg, bad_);
    }
  }

  std::vector<std::string>& errors() { return bad_; }

 private:
  std::string where(const std::string& key) const {
    if (path_.empty()) return key;
    return key.empty() ? path_ : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
  std::vector<std::string> bad_;
};

void merge_errors(std::vector<std::string>& into, const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    into.insert(into.end(), e.fields().begin(), e.fields().end());
  }
}

}  // namespace

StandardDoseGrid DesignConfig::grid() const { return standardize_grid(raw_x, raw_y); }

SimulationDesign DesignConfig::simulation_design() const {
  return {grid(), constants, tradeoff, mcmc, lattice_resolution};
}

void DesignConfig::validate() const {
  std::vector<std::string> bad;
  merge_errors(bad, [&] { constants.validate(); });
  merge_errors(bad, [&] { tradeoff.validate(); });
  merge_errors(bad, [&] { mcmc.validate(); });
  if (tradeoff.theta_T != constants.theta_T &&
      std::find(bad.begin(), bad.end(), "theta_T") == bad.end()) {
    bad.emplace_back("theta_T");
  }
  try {
    (void)grid();
  } catch (const InvalidGrid&) {
    bad.emplace_back("grid");
  }
  if (lattice_resolution < 2) bad.emplace_back("lattice_resolution");
  if (!bad.empty()) {
    std::string msg = "invalid design:";
    for (const auto& b : bad) msg += " " + b;
    if (constants.m1 != 2) msg += " (m1 must equal 2)";
    throw ConfigError(msg, bad);
  }
}

DesignConfig parse_design_config(const json& j, const std::vector<std::string>& allowed_extra) {
  DesignConfig d;
  ObjectReader top(j, "");
  for (const auto& k : allowed_extra) top.allow(k);
  std::vector<std::string> nested_errors;

  if (const json* dj = top.object("design")) {
    ObjectReader r(*dj, "design");
    auto& k = d.constants;
    r.get("theta_T", k.theta_T);
    r.get("theta_E", k.theta_E);
    r.get("U0", k.U0);
    r.get("C1", k.C1);
    r.get("m1", k.m1);
    r.get("n2", k.n2);
    r.get("C2", k.C2);
    r.get("m2", k.m2);
    r.get("delta1", k.delta1);
    r.get("delta2", k.delta2);
    r.get("alpha_start", k.alpha_start);
    r.get("alpha_stop", k.alpha_stop);
    r.get("alpha_step", k.alpha_step);
    // Totals may be given for cross-checking.
    int n1 = k.N1();
    int n2_total = -1;
    r.get("N1", n1);
    r.get("N2", n2_total);
    if (n1 != k.C1 * k.m1) r.bad("N1");
    if (n2_total >= 0 && n2_total != k.n2 + k.C2 * k.m2) r.bad("N2");
    merge_errors(nested_errors, [&] { r.finish(); });
  }
  if (const json* gj = top.object("grid")) {
    ObjectReader r(*gj, "grid");
    r.get("raw_x", d.raw_x);
    r.get("raw_y", d.raw_y);
    merge_errors(nested_errors, [&] { r.finish(); });
  }
  d.tradeoff.theta_T = d.constants.theta_T;
  if (const json* uj = top.object("utility")) {
    ObjectReader r(*uj, "utility");
    r.get("eta0", d.tradeoff.eta0);
    r.get("eta1", d.tradeoff.eta1);
    r.get("eta2", d.tradeoff.eta2);
    r.get("eta3", d.tradeoff.eta3);
    r.get("theta_T", d.tradeoff.theta_T);
    merge_errors(nested_errors, [&] { r.finish(); });
  }
  if (const json* mj = top.object("mcmc")) {
    ObjectReader r(*mj, "mcmc");
    r.get("n_burn", d.mcmc.n_burn);
    r.get("n_keep", d.mcmc.n_keep);
    r.get("thin", d.mcmc.thin);
    r.get("n_chains", d.mcmc.n_chains);
    r.get("target_acceptance", d.mcmc.target_acceptance);
    r.get("seed", d.mcmc.seed);
    merge_errors(nested_errors, [&] { r.finish(); });
  }
  top.get("lattice_resolution", d.lattice_resolution);
  merge_errors(nested_errors, [&] { top.finish(); });
  merge_errors(nested_errors, [&] { d.validate(); });
  if (!nested_errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& b : nested_errors) msg += " " + b;
    if (d.constants.m1 != 2) msg += " (m1 must equal 2)";
    throw ConfigError(msg, nested_errors);
  }
  return d;
}

json to_json(const DesignConfig& d) {
  const auto& k = d.constants;
  return {{"design",
           {{"theta_T", k.theta_T},
            {"theta_E", k.theta_E},
            {"U0", k.U0},
            {"C1", k.C1},
            {"m1", k.m1},
            {"n2", k.n2},
            {"C2", k.C2},
            {"m2", k.m2},
            {"delta1", k.delta1},
            {"delta2", k.delta2},
            {"alpha_start", k.alpha_start},
            {"alpha_stop", k.alpha_stop},
            {"alpha_step", k.alpha_step}}},
          {"grid", {{"raw_x", d.raw_x}, {"raw_y", d.raw_y}}},
          {"utility",
           {{"eta0", d.tradeoff.eta0},
            {"eta1", d.tradeoff.eta1},
            {"eta2", d.tradeoff.eta2},
            {"eta3", d.tradeoff.eta3}}},
          {"mcmc",
           {{"n_burn", d.mcmc.n_burn},
            {"n_keep", d.mcmc.n_keep},
            {"thin", d.mcmc.thin},
            {"n_chains", d.mcmc.n_chains},
            {"target_acceptance", d.mcmc.target_acceptance},
            {"seed", d.mcmc.seed}}},
          {"lattice_resolution", d.lattice_resolution}};
}

RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir) {
  static const std::vector<std::string> run_keys{"scenario", "trials", "seed", "out", "workers"};
  RunConfig rc;
  std::vector<std::string> bad;
  bool m1_bad = false;
  try {
    rc.design = parse_design_config(j, run_keys);
  } catch (const ConfigError& e) {
    bad = e.fields();
    m1_bad = std::string(e.what()).find("m1 must equal 2") != std::string::npos;
  }
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object", {"config"});
  const auto read = [&](const char* key, auto& out) {
    if (!j.contains(key)) return;
    try {
      out = j.at(key).get<std::decay_t<decltype(out)>>();
    } catch (const json::exception&) {
      bad.emplace_back(key);
    }
  };
  read("scenario", rc.scenario_path);
  read("trials", rc.trials);
  read("seed", rc.seed);
  read("out", rc.out_dir);
  read("workers", rc.workers);
  if (rc.trials < 1) bad.emplace_back("trials");
  if (rc.workers < 1) bad.emplace_back("workers");
  if (rc.scenario_path.empty()) {
    bad.emplace_back("scenario");
  } else {
    std::filesystem::path p(rc.scenario_path);
    if (p.is_relative()) p = base_dir / p;
    rc.scenario_path = p.lexically_normal().string();
    if (!std::filesystem::exists(p)) bad.emplace_back("scenario (file not found)");
  }
  if (!bad.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& b : bad) msg += " " + b;
    if (m1_bad) msg += " (m1 must equal 2)";
    throw ConfigError(msg, bad);
  }
  return rc;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string(), {path.string()});
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what(), {path.string()});
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_json_file(path), path.parent_path());
}

json to_json(const RunConfig& r) {
  json j = to_json(r.design);
  j["scenario"] = r.scenario_path;
  j["trials"] = r.trials;
  j["seed"] = r.seed;
  j["out"] = r.out_dir;
  j["workers"] = r.workers;
  return j;
}

Scenario parse_scenario(const json& j) {
  Scenario s;
  ObjectReader r(j, "");
  std::string kind = "parametric";
  r.get("name", s.name);
  r.get("description", s.description);
  r.get("kind", kind);
  std::vector<std::string> nested;
  if (kind == "parametric") {
    s.kind = ScenarioKind::parametric;
    if (const json* tj = r.object("toxicity")) {
      ObjectReader t(*tj, "toxicity");
      t.get("rho00", s.toxicity.rho00);
      t.get("rho01", s.toxicity.rho01);
      t.get("rho10", s.toxicity.rho10);
      t.get("eta", s.toxicity.eta);
      merge_errors(nested, [&] { t.finish(); });
    } else {
      r.bad("toxicity");
    }
    if (const json* ej = r.object("efficacy")) {
      ObjectReader e(*ej, "efficacy");
      std::vector<double> beta;
      std::vector<double> knots;
      e.get("beta", beta);
      e.get("knots", knots);
      if (beta.size() == 12) {
        std::copy(beta.begin(), beta.end(), s.efficacy.beta.begin());
      } else {
        e.bad("beta");
      }
      if (knots.size() == 6) {
        std::copy(knots.begin(), knots.end(), s.efficacy.knots.begin());
      } else {
        e.bad("knots");
      }
      merge_errors(nested, [&] { e.finish(); });
    } else {
      r.bad("efficacy");
    }
  } else if (kind == "tabular") {
    s.kind = ScenarioKind::tabular;
    std::vector<std::vector<double>> pt;
    std::vector<std::vector<double>> pe;
    r.get("x_levels", s.x_levels);
    r.get("y_levels", s.y_levels);
    r.get("pi_T", pt);
    r.get("pi_E", pe);
    const auto flatten = [&](const std::vector<std::vector<double>>& m, const char* key,
                             std::vector<double>& out) {
      for (const auto& row : m) {
        if (row.size() != s.y_levels.size()) {
          r.bad(key);
          return;
        }
        out.insert(out.end(), row.begin(), row.end());
      }
      if (m.size() != s.x_levels.size()) r.bad(key);
    };
    flatten(pt, "pi_T", s.pi_T);
    flatten(pe, "pi_E", s.pi_E);
  } else {
    r.bad("kind");
  }
  if (const json* uj = r.object("utility")) {
    ObjectReader u(*uj, "utility");
    u.get("eta0", s.tradeoff.eta0);
    u.get("eta1", s.tradeoff.eta1);
    u.get("eta2", s.tradeoff.eta2);
    u.get("eta3", s.tradeoff.eta3);
    u.get("theta_T", s.tradeoff.theta_T);
    merge_errors(nested, [&] { u.finish(); });
  }
  if (const json* tj = r.object("target")) {
    ObjectReader t(*tj, "target");
    TargetCombination tc;
    t.get("x", tc.x);
    t.get("y", tc.y);
    t.get("utility", tc.utility);
    merge_errors(nested, [&] { t.finish(); });
    s.documented_target = tc;
  }
  merge_errors(nested, [&] { r.finish(); });
  merge_errors(nested, [&] { s.validate(); });
  if (!nested.empty()) {
    std::string msg = "invalid scenario:";
    for (const auto& b : nested) msg += " " + b;
    throw ConfigError(msg, nested);
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) { return parse_scenario(read_json_file(path)); }

json to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["description"] = s.description;
  if (s.kind == ScenarioKind::parametric) {
    j["kind"] = "parametric";
    j["toxicity"] = {{"rho00", s.toxicity.rho00},
                     {"rho01", s.toxicity.rho01},
                     {"rho10", s.toxicity.rho10},
                     {"eta", s.toxicity.eta}};
    j["efficacy"] = {{"beta", s.efficacy.beta}, {"knots", s.efficacy.knots}};
  } else {
    j["kind"] = "tabular";
    j["x_levels"] = s.x_levels;
    j["y_levels"] = s.y_levels;
    const std::size_t ny = s.y_levels.size();
    json pt = json::array();
    json pe = json::array();
    for (std::size_t i = 0; i < s.x_levels.size(); ++i) {
      pt.push_back(std::vector<double>(s.pi_T.begin() + i * ny, s.pi_T.begin() + (i + 1) * ny));
      pe.push_back(std::vector<double>(s.pi_E.begin() + i * ny, s.pi_E.begin() + (i + 1) * ny));
    }
    j["pi_T"] = pt;
    j["pi_E"] = pe;
  }
  j["utility"] = {{"eta0", s.tradeoff.eta0},
                  {"eta1", s.tradeoff.eta1},
                  {"eta2", s.tradeoff.eta2},
                  {"eta3", s.tradeoff.eta3},
                  {"theta_T", s.tradeoff.theta_T}};
  if (s.documented_target) {
    j["target"] = {{"x", s.documented_target->x},
                   {"y", s.documented_target->y},
                   {"utility", s.documented_target->utility}};
  }
  return j;
}

}  // namespace combodose
