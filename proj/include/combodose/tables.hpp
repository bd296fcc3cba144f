#pragma once

// Comma-delimited result tables and the operating-characteristics summary.
// Floating-point values are written with 17 significant digits so every
// table re-parses to the identical doubles.

#include <iosfwd>
#include <string>
#include <vector>

#include "combodose/scenario.hpp"
#include "combodose/simulation.hpp"

namespace combodose {

std::string format_double(double v);

// One row per trial. Informational columns (true utilities) are derived from
// the scenario; readers ignore them and rescore from the truth.
void write_results_table(std::ostream& os, const std::vector<TrialRow>& rows, const Scenario& sc);
// Throws InvalidParams naming the 1-based line of the first malformed row,
// or reporting a truncated table.
std::vector<TrialRow> read_results_table(std::istream& is);

// JSON document. Identical inputs give identical bytes.
std::string format_oc_summary(const OperatingCharacteristics& oc, const Scenario& sc);

// True pi_T, pi_E and utility over an R x R lattice (bilinear for tabular).
void write_surface_table(std::ostream& os, const Scenario& sc, int resolution);

}  // namespace combodose
