#include "swavg/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include <fmt/core.h>
#include <json.hpp>

namespace swavg::scenario {

namespace {

using json = nlohmann::ordered_json;

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> known) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) ok = true;
    if (!ok)
      throw ConfigError(fmt::format("unknown field '{}{}{}'", path, path.empty() ? "" : ".", key));
  }
}

template <typename T>
T get_as(const json& obj, const std::string& path, const char* key, const T& fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("field '{}.{}': {}", path, key, e.what()));
  }
}

template <typename T>
T get_required(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key))
    throw ConfigError(fmt::format("missing required field '{}.{}'", path, key));
  return get_as<T>(obj, path, key, T{});
}

std::vector<double> default_levels(double u0) {
  const double base = std::abs(u0) + 1.0;
  return {2.0 * base, 5.0 * base, 10.0 * base};
}

}  // namespace

chain::GeneratorMatrix Scenario::build_chain() const {
  const int n = static_cast<int>(rates.size());
  Eigen::VectorXd q(n);
  for (int i = 0; i < n; ++i) q[i] = rates[static_cast<std::size_t>(i)];
  if (static_cast<int>(kernel.size()) != n)
    throw ConfigError(fmt::format("chain.kernel has {} rows for {} states", kernel.size(), n));
  Eigen::MatrixXd p(n, n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(kernel[static_cast<std::size_t>(i)].size()) != n)
      throw ConfigError(fmt::format("chain.kernel row {} has {} entries, expected {}", i,
                                    kernel[static_cast<std::size_t>(i)].size(), n));
    for (int j = 0; j < n; ++j)
      p(i, j) = kernel[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  try {
    return labels.empty() ? chain::build_generator(q, p)
                          : chain::build_generator(labels, q, p);
  } catch (const chain::ChainError& e) {
    throw ConfigError(fmt::format("chain: {}", e.what()));
  }
}

system::FieldPtr Scenario::build_field() const {
  const int n = static_cast<int>(rates.size());
  auto vec = [n](const std::vector<double>& v, const char* name,
                 double fill) -> Eigen::VectorXd {
    if (v.empty()) return Eigen::VectorXd::Constant(n, fill);
    if (static_cast<int>(v.size()) != n)
      throw ConfigError(fmt::format("field.{} has {} entries for {} states", name, v.size(), n));
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) out[i] = v[static_cast<std::size_t>(i)];
    return out;
  };
  if (field.id == "constant") return system::make_constant_field(vec(field.c, "c", 0.0));
  if (field.id == "linear")
    return system::make_linear_field(vec(field.a, "a", 0.0), vec(field.c, "c", 0.0));
  if (field.id == "bounded-trig")
    return system::make_trig_field(vec(field.a, "a", 0.0), vec(field.c, "c", 0.0));
  if (field.id == "logistic")
    return system::make_logistic_field(vec(field.a, "a", 1.0), vec(field.k, "k", 1.0));
  throw ConfigError(fmt::format("unknown field id '{}'", field.id));
}

perturbation::TestFunctionPtr Scenario::build_phi() const {
  if (phi.type == "polynomial") return perturbation::make_polynomial(phi.coeffs);
  if (phi.type == "bump") return perturbation::make_bump(phi.center, phi.radius);
  throw ConfigError(fmt::format("unknown phi type '{}'", phi.type));
}

montecarlo::ExperimentSpec Scenario::build_experiment() const {
  montecarlo::ExperimentSpec spec;
  spec.generator = build_chain();
  spec.field = build_field();
  spec.u0 = Eigen::VectorXd::Constant(1, u0);
  spec.initial_state = initial_state;
  spec.horizon = horizon;
  spec.epsilons = epsilons;
  spec.paths = paths;
  spec.deviation_thresholds = deltas;
  spec.containment_levels = levels;
  spec.seed = seed;
  spec.h_max = h_max;
  spec.h_dense = h_dense;
  return spec;
}

Scenario parse_scenario(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("scenario parse error: {}", e.what()));
  }
  reject_unknown(doc, "",
                 {"chain", "field", "u0", "initial_state", "horizon", "epsilon", "paths", "seed",
                  "h_max", "h_dense", "delta", "containment", "phi", "u_grid", "run"});

  Scenario s;
  const json chain_obj = doc.contains("chain") ? doc.at("chain") : json::object();
  if (!doc.contains("chain")) throw ConfigError("missing required field 'chain'");
  reject_unknown(chain_obj, "chain", {"labels", "rates", "kernel"});
  s.labels = get_as<std::vector<std::string>>(chain_obj, "chain", "labels", {});
  s.rates = get_required<std::vector<double>>(chain_obj, "chain", "rates");
  s.kernel = get_required<std::vector<std::vector<double>>>(chain_obj, "chain", "kernel");
  for (std::size_t i = 0; i < s.rates.size(); ++i) {
    if (s.rates.size() > 1 && !(s.rates[i] > 0.0))
      throw ConfigError(fmt::format("chain.rates: state {} has non-positive rate {}",
                                    s.labels.empty() ? std::to_string(i + 1) : s.labels[i],
                                    s.rates[i]));
  }

  if (!doc.contains("field")) throw ConfigError("missing required field 'field'");
  const json field_obj = doc.at("field");
  reject_unknown(field_obj, "field", {"id", "a", "c", "k"});
  s.field.id = get_required<std::string>(field_obj, "field", "id");
  s.field.a = get_as<std::vector<double>>(field_obj, "field", "a", {});
  s.field.c = get_as<std::vector<double>>(field_obj, "field", "c", {});
  s.field.k = get_as<std::vector<double>>(field_obj, "field", "k", {});

  s.u0 = get_as<double>(doc, "", "u0", s.u0);
  s.initial_state = get_as<int>(doc, "", "initial_state", s.initial_state);
  s.horizon = get_as<double>(doc, "", "horizon", s.horizon);
  s.epsilons = get_as<std::vector<double>>(doc, "", "epsilon", s.epsilons);
  s.paths = get_as<int>(doc, "", "paths", s.paths);
  s.seed = get_as<std::uint64_t>(doc, "", "seed", s.seed);
  s.h_max = get_as<double>(doc, "", "h_max", s.h_max);
  s.h_dense = get_as<double>(doc, "", "h_dense", s.h_dense);
  s.deltas = get_as<std::vector<double>>(doc, "", "delta", s.deltas);
  s.levels = get_as<std::vector<double>>(doc, "", "containment", default_levels(s.u0));

  if (doc.contains("phi")) {
    const json phi_obj = doc.at("phi");
    reject_unknown(phi_obj, "phi", {"type", "coeffs", "center", "radius"});
    s.phi.type = get_as<std::string>(phi_obj, "phi", "type", s.phi.type);
    s.phi.coeffs = get_as<std::vector<double>>(phi_obj, "phi", "coeffs", s.phi.coeffs);
    s.phi.center = get_as<double>(phi_obj, "phi", "center", s.phi.center);
    s.phi.radius = get_as<double>(phi_obj, "phi", "radius", s.phi.radius);
  }
  if (doc.contains("u_grid")) {
    const json grid_obj = doc.at("u_grid");
    reject_unknown(grid_obj, "u_grid", {"lo", "hi", "points"});
    s.u_grid.lo = get_as<double>(grid_obj, "u_grid", "lo", s.u_grid.lo);
    s.u_grid.hi = get_as<double>(grid_obj, "u_grid", "hi", s.u_grid.hi);
    s.u_grid.points = get_as<int>(grid_obj, "u_grid", "points", s.u_grid.points);
    if (s.u_grid.points < 2 || !(s.u_grid.lo < s.u_grid.hi))
      throw ConfigError("u_grid: need lo < hi and at least 2 points");
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open scenario file '{}'", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

namespace {

json scenario_to_json(const Scenario& s) {
  json doc;
  json chain_obj;
  if (!s.labels.empty()) chain_obj["labels"] = s.labels;
  chain_obj["rates"] = s.rates;
  chain_obj["kernel"] = s.kernel;
  doc["chain"] = chain_obj;
  json field_obj;
  field_obj["id"] = s.field.id;
  if (!s.field.a.empty()) field_obj["a"] = s.field.a;
  if (!s.field.c.empty()) field_obj["c"] = s.field.c;
  if (!s.field.k.empty()) field_obj["k"] = s.field.k;
  doc["field"] = field_obj;
  doc["u0"] = s.u0;
  doc["initial_state"] = s.initial_state;
  doc["horizon"] = s.horizon;
  doc["epsilon"] = s.epsilons;
  doc["paths"] = s.paths;
  doc["seed"] = s.seed;
  doc["h_max"] = s.h_max;
  doc["h_dense"] = s.h_dense;
  doc["delta"] = s.deltas;
  doc["containment"] = s.levels;
  doc["phi"] = {{"type", s.phi.type},
                {"coeffs", s.phi.coeffs},
                {"center", s.phi.center},
                {"radius", s.phi.radius}};
  doc["u_grid"] = {{"lo", s.u_grid.lo}, {"hi", s.u_grid.hi}, {"points", s.u_grid.points}};
  return doc;
}

}  // namespace

std::string scenario_json(const Scenario& s) { return scenario_to_json(s).dump(2) + "\n"; }

std::string manifest_json(const Scenario& s, const std::string& subcommand, double wall_seconds) {
  json doc = scenario_to_json(s);
  doc["run"] = {{"tool", "swavg"},
                {"version", "0.1.0"},
                {"subcommand", subcommand},
                {"wall_seconds", wall_seconds}};
  return doc.dump(2) + "\n";
}

std::string format_number(double v) { return fmt::format("{}", v); }

std::string table_csv(const montecarlo::EstimateTable& table) {
  std::string out = "epsilon,statistic,value,stderr\n";
  auto emit = [&out](double eps, const std::string& stat, double value, double se, bool has_se) {
    out += fmt::format("{},{},{},{}\n", format_number(eps), stat, format_number(value),
                       has_se ? format_number(se) : std::string{});
  };
  for (const auto& row : table.rows) {
    emit(row.epsilon, "paths", row.paths, 0.0, false);
    emit(row.epsilon, "excluded", row.excluded, 0.0, false);
    emit(row.epsilon, "mean_dev", row.mean_dev, row.se_dev, true);
    emit(row.epsilon, "median_dev", row.median_dev, 0.0, false);
    emit(row.epsilon, "q90_dev", row.q90_dev, 0.0, false);
    emit(row.epsilon, "q99_dev", row.q99_dev, 0.0, false);
    for (std::size_t i = 0; i < table.deviation_thresholds.size(); ++i)
      emit(row.epsilon, fmt::format("p_dev_gt_{}", format_number(table.deviation_thresholds[i])),
           row.p_dev_exceeds[i], row.se_dev_exceeds[i], true);
    emit(row.epsilon, "mean_sup_sq", row.mean_sup_sq, row.se_sup_sq, true);
    for (std::size_t i = 0; i < table.containment_levels.size(); ++i)
      emit(row.epsilon, fmt::format("p_sup_gt_{}", format_number(table.containment_levels[i])),
           row.p_sup_exceeds[i], row.se_sup_exceeds[i], true);
  }
  return out;
}

std::string residual_csv(const perturbation::PerturbationReport& report) {
  std::string out = "u,state,lhs,rhs,residual\n";
  for (const auto& row : report.rows)
    out += fmt::format("{},{},{},{},{}\n", format_number(row.u), row.state + 1,
                       format_number(row.lhs), format_number(row.rhs),
                       format_number(row.residual));
  return out;
}

std::string trajectory_csv(const system::SwitchedPath& path,
                           const std::vector<std::string>& labels) {
  const int d = path.values.empty() ? 0 : static_cast<int>(path.values.front().size());
  std::string out = "t,regime";
  for (int i = 1; i <= d; ++i) out += fmt::format(",u_{}", i);
  out += "\n";
  for (std::size_t i = 0; i < path.times.size(); ++i) {
    out += fmt::format("{},{}", format_number(path.times[i]),
                       labels[static_cast<std::size_t>(path.regimes[i])]);
    for (int j = 0; j < d; ++j) out += fmt::format(",{}", format_number(path.values[i][j]));
    out += "\n";
  }
  return out;
}

std::string chain_analysis_csv(const chain::GeneratorMatrix& g, const chain::ChainAnalysis& a) {
  std::string out = "quantity,row,col,value\n";
  const int n = g.size();
  for (int i = 0; i < n; ++i)
    out += fmt::format("pi,{},,{}\n", g.labels[static_cast<std::size_t>(i)],
                       format_number(a.pi[i]));
  auto emit_matrix = [&](const char* name, const Eigen::MatrixXd& m) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        out += fmt::format("{},{},{},{}\n", name, g.labels[static_cast<std::size_t>(i)],
                           g.labels[static_cast<std::size_t>(j)], format_number(m(i, j)));
  };
  emit_matrix("Q", g.rate_matrix);
  emit_matrix("R0", a.potential);
  return out;
}

}  // namespace swavg::scenario
