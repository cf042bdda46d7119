#include <doctest.h>

#include <filesystem>
#include <string>

#include "hetreg/io.hpp"

using namespace hetreg;
namespace fs = std::filesystem;

TEST_CASE("number formatting round-trips") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) CHECK(std::stod(io::num(x)) == x);
}

TEST_CASE("spec JSON round trip") {
  for (const auto& spec : {figure3_spec(), two_group_classification_spec()}) {
    const auto back = io::spec_from_json(io::spec_to_json(spec));
    CHECK(back.task() == spec.task());
    for (double x : {0.0, 0.1, 0.33, 0.5, 0.77, 1.0}) {
      CHECK(back.f(x) == spec.f(x));
      CHECK(back.q(x) == spec.q(x));
      if (spec.task() == TaskKind::Regression) CHECK(back.sigma(x) == spec.sigma(x));
    }
  }
  auto j = io::spec_to_json(figure3_spec());
  j["colour"] = "blue";
  CHECK_THROWS(io::spec_from_json(j));
}

TEST_CASE("dataset CSV round trip") {
  const auto reg = sample_dataset(figure3_spec(), 200, 1);
  const auto back = io::dataset_from_csv(io::dataset_csv(reg), TaskKind::Regression);
  REQUIRE(back.size() == reg.size());
  for (std::size_t i = 0; i < reg.size(); ++i) {
    CHECK(back.points[i].x == reg.points[i].x);
    CHECK(back.points[i].y == reg.points[i].y);
  }
  const auto cls = sample_dataset(two_group_classification_spec(), 100, 2);
  const auto text = io::dataset_csv(cls);
  CHECK(text.find(",-1") == std::string::npos);
  const auto cb = io::dataset_from_csv(text, TaskKind::BinaryClassification);
  for (std::size_t i = 0; i < cls.size(); ++i) CHECK(cb.points[i].y == cls.points[i].y);
  const auto pm = io::dataset_from_csv("x,y\n0.2,-1\n0.4,1\n", TaskKind::BinaryClassification);
  CHECK(pm.points[0].y == -1.0);
  CHECK_THROWS(io::dataset_from_csv("x,y\n0.2,abc\n", TaskKind::Regression));
  CHECK_THROWS(io::dataset_from_csv("x,y\n0.2,2\n", TaskKind::BinaryClassification));
}

TEST_CASE("profile, weights and grid CSV round trips") {
  const RegProfile p(GroupPartition({0.0, 0.3, 1.0}), {0.125, 7.5});
  const auto pb = io::profile_from_csv(io::profile_csv(p));
  CHECK(pb.partition == p.partition);
  CHECK(pb.rho == p.rho);
  const Dataset d{TaskKind::Regression, {{0.1, 0.0}, {0.9, 1.0}}, 0};
  const ExampleWeights w({0.3, 1.0 / 7.0});
  CHECK(io::weights_from_csv(io::weights_csv(d, w)).tau == w.tau);
  const auto g = GridFunction::sampled(17, [](double t) { return std::exp(t) / 3.0; });
  CHECK(io::grid_from_csv(io::grid_csv(g)).values() == g.values());
}

TEST_CASE("model JSON round trip") {
  const auto m = MlpModel::initialized({5, 3}, Activation::ReLU, 4);
  const auto back = io::model_from_json(io::model_to_json(m));
  CHECK(back.activation() == Activation::ReLU);
  CHECK(back.widths() == m.widths());
  CHECK((back.flatten().array() == m.flatten().array()).all());
}

TEST_CASE("report JSON fields") {
  const auto spec = two_group_classification_spec();
  const auto t = io::to_json(asymptotic_mse(spec, optimal_rho(spec, halves_partition()), 1.0));
  CHECK(t.contains("total"));
  CHECK(t["groups"].size() == 2);
  HarConfig cfg;
  cfg.fit.lambda = 0.05;
  const auto h = io::to_json(har_run(spec, 400, halves_partition(), cfg));
  for (const char* key : {"q_hat", "I_hat", "group_tau", "lambda", "pilot_val_error", "final_group_mse"}) CHECK(h.contains(key));
}

TEST_CASE("file helpers") {
  const fs::path dir = fs::temp_directory_path() / "hetreg_io_test" / "nested";
  fs::remove_all(dir.parent_path());
  io::write_text(dir / "a.txt", "hello\n");
  CHECK(io::read_text(dir / "a.txt") == "hello\n");
  CHECK_THROWS_AS(io::read_text(dir / "missing.txt"), io::IoError);
  fs::remove_all(dir.parent_path());
}
