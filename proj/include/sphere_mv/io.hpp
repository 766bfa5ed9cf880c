// Serialization of kernels, tables and reports.

#pragma once

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "sphere_mv/kernels.hpp"
#include "sphere_mv/meanfield.hpp"
#include "sphere_mv/particles.hpp"
#include "sphere_mv/solver.hpp"

namespace sphere_mv::io {

using Json = nlohmann::ordered_json;

/// {"n": 3, "family": "onsager" | "transformer" | "opinion" | "heat" | "custom", ...}.
/// Parameters: "beta", "p", "epsilon"; custom kernels carry "profile", either
/// {"polynomial": [a_0, ...]} or {"t": [...], "g": [...], "interpolation": "linear" | "polynomial"}.
/// Throws std::invalid_argument on malformed input.
KernelSpec kernel_from_json(const Json& j);
Json kernel_to_json(const KernelSpec& spec);
KernelSpec read_kernel(const std::string& path);
Json read_json(const std::string& path);

/// printf "%.17g"; non-finite values print as inf, -inf, nan.
std::string format_double(double v);

using Cell = std::variant<double, long long, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

/// "# config: <json>", an optional "# summary: <json>", a header line and the rows.
void write_csv(std::ostream& out, const Json& config, const Table& table, const Json& summary = Json());
/// {"config": ..., "columns": [...], "rows": [[...], ...]}; non-finite doubles become strings.
Json table_json(const Json& config, const Table& table);
Json number(double v);

Table coefficient_table(const ZonalCoefficients& coeffs);
Table bifurcation_table(const BifurcationSet& set);
Table spectrum_table(const StabilitySpectrum& spectrum);
Table branch_table(const Branch& branch);
Table trajectory_table(const SimulationResult& result);
/// Density values on the quadrature nodes.
Table density_table(const ZonalDensity& rho);

Json energy_json(const EnergyReport& report);
Json fixed_point_json(const ZonalCoefficients& kernel, const FixedPoint& fp, double gamma);
Json branch_json(const Branch& branch);
Json transition_json(const TransitionReport& report);
Json simulation_json(const SimulationResult& result);

}  // namespace sphere_mv::io
