#include "hetreg/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace hetreg::io {
namespace {

// Rows of a CSV with the expected header; blank lines are skipped.
std::vector<std::vector<double>> parse_csv(const std::string& text, const std::string& header) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError(fmt::format("empty CSV (expected header '{}')", header));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw IoError(fmt::format("CSV header '{}' (expected '{}')", line, header));
  const std::size_t cols = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      double v;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) throw IoError(fmt::format("line {}: cannot parse '{}'", lineno, line));
      row.push_back(v);
      if (next == end) break;
      if (*next != ',') throw IoError(fmt::format("line {}: unexpected '{}'", lineno, *next));
      p = next + 1;
    }
    if (row.size() != cols) throw IoError(fmt::format("line {}: {} fields, expected {}", lineno, row.size(), cols));
    rows.push_back(std::move(row));
  }
  return rows;
}

json function_to_json(const PiecewiseFunction& f) {
  json arr = json::array();
  for (const auto& s : f.segments()) {
    arr.push_back({{"lo", s.lo}, {"hi", s.hi}, {"kind", std::string(to_string(s.kind))}, {"params", s.params}});
  }
  return arr;
}

PiecewiseFunction function_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ContractViolation(fmt::format("'{}' must be an array of segments", what));
  std::vector<Segment> segs;
  for (const auto& s : j) {
    if (!s.is_object()) throw ContractViolation(fmt::format("'{}' segments must be objects", what));
    for (const auto& [key, _] : s.items()) {
      if (key != "lo" && key != "hi" && key != "kind" && key != "params") {
        throw ContractViolation(fmt::format("unknown key '{}' in a '{}' segment", key, what));
      }
    }
    try {
      segs.push_back({s.at("lo").get<double>(), s.at("hi").get<double>(),
                      segment_kind_from_string(s.at("kind").get<std::string>()),
                      s.at("params").get<std::vector<double>>()});
    } catch (const json::exception& e) {
      throw ContractViolation(fmt::format("bad '{}' segment: {}", what, e.what()));
    }
  }
  return PiecewiseFunction(std::move(segs));
}

json nan_to_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json doubles(const std::vector<double>& v) {
  json arr = json::array();
  for (double x : v) arr.push_back(nan_to_null(x));
  return arr;
}

}  // namespace

std::string num(double x) { return fmt::format("{}", x); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

json spec_to_json(const ProblemSpec& spec) {
  json j = {{"task", std::string(to_string(spec.task()))},
            {"fstar", function_to_json(spec.fstar())},
            {"density", function_to_json(spec.density())}};
  if (spec.noise_sigma()) j["noise_sigma"] = function_to_json(*spec.noise_sigma());
  return j;
}

ProblemSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw ContractViolation("spec must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "task" && key != "fstar" && key != "density" && key != "noise_sigma") {
      throw ContractViolation(fmt::format("unknown spec key '{}'", key));
    }
  }
  if (!j.contains("task") || !j.contains("fstar") || !j.contains("density")) {
    throw ContractViolation("spec needs 'task', 'fstar' and 'density'");
  }
  if (!j["task"].is_string()) throw ContractViolation("'task' must be a string");
  std::optional<PiecewiseFunction> sigma;
  if (j.contains("noise_sigma")) sigma = function_from_json(j["noise_sigma"], "noise_sigma");
  return ProblemSpec(task_kind_from_string(j["task"].get<std::string>()), function_from_json(j["fstar"], "fstar"),
                     function_from_json(j["density"], "density"), std::move(sigma));
}

std::string dataset_csv(const Dataset& data) {
  std::string out = "x,y\n";
  const bool binary = data.task == TaskKind::BinaryClassification;
  for (const auto& p : data.points) out += fmt::format("{},{}\n", p.x, binary ? (p.y > 0.0 ? 1.0 : 0.0) : p.y);
  return out;
}

Dataset dataset_from_csv(const std::string& text, TaskKind task) {
  Dataset d;
  d.task = task;
  for (const auto& r : parse_csv(text, "x,y")) {
    double y = r[1];
    if (task == TaskKind::BinaryClassification && y == 0.0) y = -1.0;
    d.points.push_back({r[0], y});
  }
  d.validate();
  return d;
}

std::string profile_csv(const RegProfile& profile) {
  std::string out = "group_lo,group_hi,rho\n";
  for (std::size_t j = 0; j < profile.rho.size(); ++j) {
    out += fmt::format("{},{},{}\n", profile.partition.lo(j), profile.partition.hi(j), profile.rho[j]);
  }
  return out;
}

RegProfile profile_from_csv(const std::string& text) {
  const auto rows = parse_csv(text, "group_lo,group_hi,rho");
  if (rows.empty()) throw IoError("profile CSV has no groups");
  std::vector<double> bp{rows[0][0]};
  std::vector<double> rho;
  for (const auto& r : rows) {
    if (r[0] != bp.back()) throw IoError("profile groups are not contiguous");
    bp.push_back(r[1]);
    rho.push_back(r[2]);
  }
  return RegProfile(GroupPartition(std::move(bp)), std::move(rho));
}

std::string weights_csv(const Dataset& data, const ExampleWeights& w) {
  if (w.size() != data.size()) throw ContractViolation("weights not aligned with dataset");
  std::string out = "index,x,tau\n";
  for (std::size_t i = 0; i < w.size(); ++i) out += fmt::format("{},{},{}\n", i, data.points[i].x, w.tau[i]);
  return out;
}

ExampleWeights weights_from_csv(const std::string& text) {
  std::vector<double> tau;
  for (const auto& r : parse_csv(text, "index,x,tau")) {
    if (r[0] != static_cast<double>(tau.size())) throw IoError("weights CSV indices must be 0, 1, 2, ...");
    tau.push_back(r[2]);
  }
  return ExampleWeights(std::move(tau));
}

std::string grid_csv(const GridFunction& g) {
  std::string out = "t,f\n";
  for (std::size_t u = 0; u < g.size(); ++u) out += fmt::format("{},{}\n", g.node(u), g.values()[u]);
  return out;
}

GridFunction grid_from_csv(const std::string& text) {
  std::vector<double> v;
  const auto rows = parse_csv(text, "t,f");
  for (std::size_t u = 0; u < rows.size(); ++u) {
    const double expect = rows.size() > 1 ? static_cast<double>(u) / static_cast<double>(rows.size() - 1) : 0.0;
    if (std::abs(rows[u][0] - expect) > 1e-12) throw IoError("grid CSV nodes must be equispaced on [0, 1]");
    v.push_back(rows[u][1]);
  }
  return GridFunction(std::move(v));
}

std::string fit_log_csv(const std::vector<IterationRecord>& log) {
  std::string out = "iteration,objective,grad_norm\n";
  for (const auto& r : log) out += fmt::format("{},{},{}\n", r.iteration, r.objective, r.grad_norm);
  return out;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "step,loss,reg,objective\n";
  for (const auto& c : curve) out += fmt::format("{},{},{},{}\n", c.step, c.loss, c.reg, c.objective);
  return out;
}

json model_to_json(const MlpModel& model) {
  const Eigen::VectorXd theta = model.flatten();
  return {{"widths", model.widths()},
          {"activation", std::string(to_string(model.activation()))},
          {"params", std::vector<double>(theta.data(), theta.data() + theta.size())}};
}

MlpModel model_from_json(const json& j) {
  try {
    MlpModel m(j.at("widths").get<std::vector<std::size_t>>(),
               activation_from_string(j.at("activation").get<std::string>()));
    const auto p = j.at("params").get<std::vector<double>>();
    m.unflatten(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));
    return m;
  } catch (const json::exception& e) {
    throw IoError(fmt::format("bad model checkpoint: {}", e.what()));
  }
}

json to_json(const AsymptoticReport& r) {
  json groups = json::array();
  for (const auto& g : r.groups) {
    groups.push_back({{"lo", g.lo},
                      {"hi", g.hi},
                      {"A", g.A},
                      {"B", g.B},
                      {"rho", g.rho},
                      {"bias", g.bias},
                      {"variance", g.variance},
                      {"contribution", g.bias + g.variance}});
  }
  return {{"lambda", r.lambda},
          {"bias_term", r.bias_term},
          {"variance_term", r.variance_term},
          {"total", r.total},
          {"groups", groups}};
}

json to_json(const McReport& r) {
  return {{"profile", r.profile},     {"n", r.n},
          {"lambda", r.lambda},       {"seed", r.seed},
          {"reps", r.reps},           {"failures", r.failures},
          {"mean_mse", r.mean_mse},   {"std_error", r.std_error},
          {"per_rep", doubles(r.per_rep)}};
}

json to_json(const CompareReport& r) {
  json profiles = json::array();
  for (const auto& p : r.all) {
    json mc = to_json(p.mc);
    mc.erase("per_rep");
    profiles.push_back({{"name", p.name}, {"rho", p.profile.rho}, {"theory_total", p.theory_total}, {"mc", mc}});
  }
  json summary = json::array();
  for (const auto& p : r.summary) {
    summary.push_back({{"name", p.name},
                       {"rho", p.profile.rho},
                       {"mean_mse", p.mc.mean_mse},
                       {"se", p.mc.std_error},
                       {"theory_total", p.theory_total}});
  }
  json pairs = json::array();
  for (const auto& z : r.pairwise) pairs.push_back({{"a", z.a}, {"b", z.b}, {"z", z.z}, {"z_paired", z.z_paired}});
  return {{"lambda", r.lambda},
          {"theory_lambda", r.theory_lambda},
          {"best_uniform", r.best_uniform},
          {"c_star", r.c_star},
          {"spearman", r.spearman},
          {"profiles", profiles},
          {"summary", summary},
          {"pairwise", pairs}};
}

json to_json(const HarReport& r) {
  json j = {{"n", r.n},
            {"n_train", r.n_train},
            {"n_val", r.n_val},
            {"q_hat", r.q_hat},
            {"I_hat", r.I_hat},
            {"group_tau", doubles(r.group_tau)},
            {"lambda", r.lambda},
            {"pilot_val_error", r.pilot_val_error},
            {"pilot_group_val_error", r.pilot_group_val_error}};
  if (!r.final_group_mse.empty()) j["final_group_mse"] = r.final_group_mse;
  return j;
}

json to_json(const Figure3Report& r) {
  auto run = [](const Figure3Run& x) {
    return json{{"seed", x.seed},
                {"weak_left", x.weak_left},
                {"weak_right", x.weak_right},
                {"strong_left", x.strong_left},
                {"strong_right", x.strong_right},
                {"adaptive_left", x.adaptive_left},
                {"adaptive_right", x.adaptive_right}};
  };
  json runs = json::array();
  for (const auto& x : r.runs) runs.push_back(run(x));
  json mean = run(r.mean);
  mean.erase("seed");
  return {{"tau_left", r.tau_left}, {"tau_right", r.tau_right}, {"mean", mean}, {"runs", runs}};
}

std::string compare_csv(const CompareReport& r) {
  std::string out = "profile,mean_mse,se,theory_total\n";
  for (const auto& p : r.summary) {
    out += fmt::format("{},{},{},{}\n", p.name, p.mc.mean_mse, p.mc.std_error, p.theory_total);
  }
  for (const auto& p : r.all) {
    out += fmt::format("{},{},{},{}\n", p.name, p.mc.mean_mse, p.mc.std_error, p.theory_total);
  }
  return out;
}

std::string pairwise_csv(const CompareReport& r) {
  std::string out = "a,b,z,z_paired\n";
  for (const auto& z : r.pairwise) out += fmt::format("{},{},{},{}\n", z.a, z.b, z.z, z.z_paired);
  return out;
}

std::string figure3_curves_csv(const Figure3Report& r) {
  std::string out = "t,truth,weak,strong,adaptive\n";
  for (std::size_t i = 0; i < r.t.size(); ++i) {
    out += fmt::format("{},{},{},{},{}\n", r.t[i], r.truth[i], r.weak[i], r.strong[i], r.adaptive[i]);
  }
  return out;
}

}  // namespace hetreg::io
