#pragma once

// JSON records for solver results and CSV exports for plotting.
//
// JSON objects keep declaration order. Reals are written by nlohmann::json in
// shortest round-trip form; non-finite values become null. CSV files have a
// header row, reals printed with %.17g and LF line endings.

#include <iosfwd>
#include <string>

#include "json.hpp"

#include "dmfg/diagnostics.hpp"
#include "dmfg/horizon.hpp"
#include "dmfg/stationary.hpp"

namespace dmfg {

using Json = nlohmann::ordered_json;

/// A real, or null when it is not finite.
Json json_real(double x);
Json to_json(const Vec& v);
Json to_json(const std::vector<double>& xs);
Json to_json(const Mat& m);
Json to_json(const StationarySolution& s);
Json to_json(const TurnpikeReport& r);
Json to_json(const WorstCase& w);
Json to_json(const AssumptionReport& r);
Json to_json(const VariationalResult& r);

/// %.17g, with "nan", "inf" and "-inf" for non-finite values.
std::string format_real(double x);

/// Columns n, state, pi, V, P_0 .. P_{d-1}; one row per (n, state). The P
/// columns are empty at n = N, where no transition is taken.
void write_trajectory_csv(std::ostream& os, const Trajectory& t);

/// Columns N, dist_pi, dist_V, residual, failure.
void write_turnpike_csv(std::ostream& os, const TurnpikeReport& r);

/// Fixed-width table of the report for terminals.
void write_assumption_table(std::ostream& os, const AssumptionReport& r);

}  // namespace dmfg
