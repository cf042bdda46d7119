#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetreg/domain.hpp"
#include "hetreg/gridfit.hpp"
#include "hetreg/harness.hpp"
#include "hetreg/mlp.hpp"
#include "hetreg/regprofile.hpp"
#include "hetreg/theory.hpp"

namespace hetreg::io {

using nlohmann::json;
namespace fs = std::filesystem;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest representation that reads back to the same double.
std::string num(double x);

std::string read_text(const fs::path& path);
// Creates parent directories.
void write_text(const fs::path& path, const std::string& text);

// {"task", "fstar", "density", "noise_sigma"?}; each function is a list of
// {"lo", "hi", "kind", "params"} segments.
json spec_to_json(const ProblemSpec& spec);
ProblemSpec spec_from_json(const json& j);

// Header `x,y`; classification labels are written as 0 / 1 and read as
// 0 / 1 or -1 / 1.
std::string dataset_csv(const Dataset& data);
Dataset dataset_from_csv(const std::string& text, TaskKind task);

std::string profile_csv(const RegProfile& profile);  // group_lo,group_hi,rho
RegProfile profile_from_csv(const std::string& text);
std::string weights_csv(const Dataset& data, const ExampleWeights& w);  // index,x,tau
ExampleWeights weights_from_csv(const std::string& text);

std::string grid_csv(const GridFunction& g);  // t,f
GridFunction grid_from_csv(const std::string& text);
std::string fit_log_csv(const std::vector<IterationRecord>& log);  // iteration,objective,grad_norm
std::string curve_csv(const std::vector<CurvePoint>& curve);       // step,loss,reg,objective

json model_to_json(const MlpModel& model);
MlpModel model_from_json(const json& j);

json to_json(const AsymptoticReport& r);
json to_json(const McReport& r);
json to_json(const CompareReport& r);
json to_json(const HarReport& r);
json to_json(const Figure3Report& r);

std::string compare_csv(const CompareReport& r);   // profile,mean_mse,se,theory_total
std::string pairwise_csv(const CompareReport& r);  // a,b,z,z_paired
std::string figure3_curves_csv(const Figure3Report& r);  // t,truth,weak,strong,adaptive

}  // namespace hetreg::io
