#include "sphere_mv/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace sphere_mv::io {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double require_number(const Json& j, const char* key) {
  if (!j.contains(key)) throw std::invalid_argument(std::string("kernel: missing \"") + key + "\"");
  if (!j.at(key).is_number()) throw std::invalid_argument(std::string("kernel: \"") + key + "\" must be a number");
  return j.at(key).get<double>();
}

std::vector<double> number_array(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw std::invalid_argument(std::string("kernel profile: \"") + key + "\" must be an array of numbers");
  }
  std::vector<double> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number()) throw std::invalid_argument(std::string("kernel profile: \"") + key + "\" must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::string csv_cell(const Cell& c) {
  return std::visit(overloaded{[](double v) { return format_double(v); },
                               [](long long v) { return std::to_string(v); },
                               [](const std::string& s) {
                                 if (s.find_first_of(",\"\n") == std::string::npos) return s;
                                 std::string q = "\"";
                                 for (char ch : s) {
                                   if (ch == '"') q += '"';
                                   q += ch;
                                 }
                                 return q + "\"";
                               }},
                    c);
}

Json cell_json(const Cell& c) {
  return std::visit(overloaded{[](double v) { return number(v); }, [](long long v) { return Json(v); },
                               [](const std::string& s) { return Json(s); }},
                    c);
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json number(double v) {
  if (std::isfinite(v)) return Json(v);
  return Json(format_double(v));
}

KernelSpec kernel_from_json(const Json& j) {
  if (!j.is_object()) throw std::invalid_argument("kernel: expected a JSON object");
  if (!j.contains("family") || !j.at("family").is_string()) {
    throw std::invalid_argument("kernel: missing string field \"family\"");
  }
  if (!j.contains("n") || !j.at("n").is_number_integer()) throw std::invalid_argument("kernel: missing integer field \"n\"");
  KernelSpec spec;
  spec.n = j.at("n").get<int>();
  const auto family = j.at("family").get<std::string>();
  if (family == "transformer") {
    spec.family = Transformer{require_number(j, "beta")};
  } else if (family == "onsager") {
    spec.family = Onsager{};
  } else if (family == "opinion") {
    spec.family = Opinion{require_number(j, "p")};
  } else if (family == "heat") {
    spec.family = HeatLocalized{require_number(j, "epsilon")};
  } else if (family == "custom") {
    if (!j.contains("profile") || !j.at("profile").is_object()) {
      throw std::invalid_argument("kernel: custom family needs a \"profile\" object");
    }
    const auto& p = j.at("profile");
    if (p.contains("polynomial")) {
      spec.family = CustomProfile::from_polynomial(number_array(p, "polynomial"));
    } else {
      auto mode = CustomProfile::Interpolation::polynomial;
      if (p.contains("interpolation")) {
        const auto m = p.at("interpolation").is_string() ? p.at("interpolation").get<std::string>() : "";
        if (m == "linear") {
          mode = CustomProfile::Interpolation::linear;
        } else if (m != "polynomial") {
          throw std::invalid_argument("kernel profile: interpolation must be \"linear\" or \"polynomial\"");
        }
      }
      spec.family = CustomProfile::from_table(number_array(p, "t"), number_array(p, "g"), mode);
    }
  } else {
    throw std::invalid_argument("kernel: unknown family \"" + family + "\"");
  }
  validate(spec);
  return spec;
}

Json kernel_to_json(const KernelSpec& spec) {
  Json j;
  j["n"] = spec.n;
  j["family"] = spec.family_name();
  std::visit(overloaded{[&](const Transformer& f) { j["beta"] = f.beta; }, [](const Onsager&) {},
                        [&](const Opinion& f) { j["p"] = f.p; }, [&](const HeatLocalized& f) { j["epsilon"] = f.epsilon; },
                        [&](const CustomProfile& f) {
                          j["profile"] = f.source.empty() ? Json("function") : Json::parse(f.source);
                        }},
             spec.family);
  return j;
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument("invalid JSON in " + path + ": " + e.what());
  }
}

KernelSpec read_kernel(const std::string& path) { return kernel_from_json(read_json(path)); }

void write_csv(std::ostream& out, const Json& config, const Table& table, const Json& summary) {
  out << "# config: " << config.dump() << '\n';
  if (!summary.is_null()) out << "# summary: " << summary.dump() << '\n';
  for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << table.columns[c];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << csv_cell(row[c]);
    out << '\n';
  }
}

Json table_json(const Json& config, const Table& table) {
  Json rows = Json::array();
  for (const auto& row : table.rows) {
    Json r = Json::array();
    for (const auto& c : row) r.push_back(cell_json(c));
    rows.push_back(std::move(r));
  }
  Json j;
  j["config"] = config;
  j["columns"] = table.columns;
  j["rows"] = std::move(rows);
  return j;
}

Table coefficient_table(const ZonalCoefficients& coeffs) {
  Table t{{"k", "coefficient", "normalized"}, {}};
  for (int k = 0; k <= coeffs.truncation(); ++k) {
    t.rows.push_back({static_cast<long long>(k), coeffs[k], coeffs.normalized(k)});
  }
  return t;
}

Table bifurcation_table(const BifurcationSet& set) {
  Table t{{"k", "gamma_k"}, {}};
  for (const auto& b : set.points) t.rows.push_back({static_cast<long long>(b.k), b.gamma});
  return t;
}

Table spectrum_table(const StabilitySpectrum& spectrum) {
  Table t{{"l", "gamma", "eigenvalue"}, {}};
  for (std::size_t l = 0; l < spectrum.eigenvalues.size(); ++l) {
    t.rows.push_back({static_cast<long long>(l), spectrum.gamma, spectrum.eigenvalues[l]});
  }
  return t;
}

Table branch_table(const Branch& branch) {
  Table t{{"gamma", "mode", "amplitude", "dominant_mode", "entropy", "interaction", "free_energy", "residual",
           "iterations"},
          {}};
  for (const auto& p : branch.points) {
    t.rows.push_back({p.gamma, static_cast<long long>(p.mode), p.amplitude, static_cast<long long>(p.dominant_mode),
                      p.energy.entropy, p.energy.interaction, p.energy.free_energy, p.residual,
                      static_cast<long long>(p.iterations)});
  }
  return t;
}

Table trajectory_table(const SimulationResult& result) {
  Table t{{"step"}, {}};
  for (int l : result.moments.degrees) t.columns.push_back("m" + std::to_string(l));
  for (const auto& r : result.trajectory) {
    std::vector<Cell> row{static_cast<long long>(r.step)};
    for (double m : r.moments) row.emplace_back(m);
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table density_table(const ZonalDensity& rho) {
  Table t{{"t", "weight", "density"}, {}};
  const auto& rule = *rho.rule();
  for (int i = 0; i < rule.order(); ++i) t.rows.push_back({rule.nodes[i], rule.weights[i], rho.values()[i]});
  return t;
}

Json energy_json(const EnergyReport& report) {
  Json j;
  j["gamma"] = number(report.gamma);
  j["entropy"] = number(report.entropy);
  j["interaction"] = number(report.interaction);
  j["free_energy"] = number(report.free_energy);
  return j;
}

Json fixed_point_json(const ZonalCoefficients& kernel, const FixedPoint& fp, double gamma) {
  Json j;
  j["converged"] = fp.converged;
  j["iterations"] = fp.iterations;
  j["residual"] = number(fp.residual);
  j["dominant_mode"] = fp.density.dominant_mode();
  Json amps = Json::array();
  for (int k = 1; k <= std::min(8, fp.density.truncation()); ++k) amps.push_back(number(fp.density.mode_amplitude(k)));
  j["mode_amplitudes"] = std::move(amps);
  j["energy"] = energy_json(free_energy(kernel, fp.density, gamma));
  j["gap_to_uniform"] = number(free_energy_gap(kernel, fp.density, gamma));
  if (!fp.diagnostic.empty()) j["diagnostic"] = fp.diagnostic;
  return j;
}

Json branch_json(const Branch& branch) {
  Json j;
  j["mode"] = branch.mode;
  j["gamma_k"] = number(branch.gamma_k);
  j["seed_amplitude"] = number(branch.seed_amplitude);
  j["orientation"] = branch.orientation;
  if (!branch.diagnostic.empty()) j["diagnostic"] = branch.diagnostic;
  Json pts = Json::array();
  for (const auto& p : branch.points) {
    Json q;
    q["gamma"] = number(p.gamma);
    q["amplitude"] = number(p.amplitude);
    q["dominant_mode"] = p.dominant_mode;
    q["energy"] = energy_json(p.energy);
    q["residual"] = number(p.residual);
    q["iterations"] = p.iterations;
    pts.push_back(std::move(q));
  }
  j["points"] = std::move(pts);
  return j;
}

Json transition_json(const TransitionReport& report) {
  Json j;
  j["type"] = to_string(report.type);
  j["gamma_sharp"] = number(report.gamma_sharp);
  if (report.type == TransitionType::none && report.gamma_lo == 0.0 && report.gamma_hi == 0.0) {
    j["gamma_lo"] = nullptr;
    j["gamma_hi"] = nullptr;
  } else {
    j["gamma_lo"] = number(report.gamma_lo);
    j["gamma_hi"] = number(report.gamma_hi);
  }
  if (report.witness) {
    const auto& w = *report.witness;
    Json q;
    q["description"] = w.description;
    q["gamma"] = number(w.gamma);
    q["gap"] = number(w.gap);
    q["mode"] = w.mode;
    q["amplitude"] = number(w.amplitude);
    q["residual"] = number(w.residual);
    q["certified"] = w.certified;
    j["witness"] = std::move(q);
  } else {
    j["witness"] = nullptr;
  }
  if (!report.diagnostic.empty()) j["diagnostic"] = report.diagnostic;
  Json scan = Json::array();
  for (const auto& r : report.scan) {
    Json q;
    q["gamma"] = number(r.gamma);
    q["best_gap"] = number(r.best_gap);
    q["source"] = r.source;
    scan.push_back(std::move(q));
  }
  j["scan"] = std::move(scan);
  return j;
}

Json simulation_json(const SimulationResult& result) {
  Json j;
  j["method"] = result.method == ForceMethod::spectral ? "spectral" : "pairwise";
  j["degree"] = result.degree;
  j["samples"] = result.samples;
  j["clamped"] = result.clamped;
  Json axis = Json::array();
  for (double v : result.axis) axis.push_back(number(v));
  j["axis"] = std::move(axis);
  Json m = Json::array();
  for (std::size_t i = 0; i < result.moments.degrees.size(); ++i) {
    Json q;
    q["l"] = result.moments.degrees[i];
    q["mean"] = number(result.moments.mean[i]);
    q["std_error"] = number(result.moments.std_error[i]);
    m.push_back(std::move(q));
  }
  j["moments"] = std::move(m);
  return j;
}

}  // namespace sphere_mv::io
