#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "grushin/run.hpp"

using namespace grushin;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

} // namespace

TEST_CASE("minimal best-constant config parses with defaults") {
  const std::string text = R"(
m = 1
n = 1
gamma = 1
p = 2
box = -8:8,-8:8
cells = 64,64
)";
  const ExperimentConfig cfg = parse_config(text, Command::best_constant);
  CHECK(cfg.m == 1);
  CHECK(cfg.gamma == 1.0);
  CHECK(cfg.solver.max_iters == 600);      // default filled
  CHECK(cfg.solver.armijo_shrink == 0.5);  // default filled
  CHECK(cfg.estimator == "single");
  const auto e = cfg.echo();
  CHECK(e.at("max_iters") == "600");
  CHECK(e.at("estimator") == "single");
}

TEST_CASE("validation failures are collected exhaustively") {
  const std::string text = R"(
m = 1
n = 1
gamma = 1
p = 3.5
box = -8:8,-8:8
cells = 64,64
bogus_key = 12
)";
  try {
    parse_config(text, Command::best_constant);
    FAIL("expected a ValidationError");
  } catch (const ValidationError& e) {
    // both the supercritical p and the unknown key must be reported
    const std::string what = e.what();
    CHECK(what.find("p must be < N_gamma") != std::string::npos);
    CHECK(what.find("unknown key 'bogus_key'") != std::string::npos);
    CHECK(e.issues().size() >= 2);
  }
}

TEST_CASE("q outside the admissible range is rejected with the range cited") {
  const std::string text = R"(
m = 1
n = 1
gamma = 1
p = 2
box = -4:4,-4:4
cells = 32,32
lambda = 1
q = 7
)";
  try {
    parse_config(text, Command::brezis_nirenberg);
    FAIL("expected a ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("[2, 6)") != std::string::npos);
  }
}

TEST_CASE("lambda = 0 with q = p is rejected at validation") {
  const std::string text = R"(
m = 1
n = 1
gamma = 1
p = 2
box = -4:4,-4:4
cells = 32,32
lambda = 0
q = 2
)";
  CHECK_THROWS_AS(parse_config(text, Command::brezis_nirenberg), ValidationError);
}

TEST_CASE("eigenvalue command relaxes the upper bound on p") {
  const std::string text = R"(
m = 1
n = 1
gamma = 0
p = 2
box = 0:3,0:3
cells = 16,16
)";
  // p = 2 = N_gamma: rejected for the quotient, allowed for the eigenvalue
  CHECK_THROWS_AS(parse_config(text, Command::best_constant), ValidationError);
  const ExperimentConfig cfg = parse_config(text, Command::eigenvalue);
  CHECK(cfg.params().relaxed);
}

TEST_CASE("reports are byte-identical modulo wall time") {
  const std::string text = R"(
m = 1
n = 1
gamma = 0
p = 2
box = 0:3.14159265358979312,0:3.14159265358979312
cells = 32,32
grad_tol = 1e-5
max_iters = 200
)";
  const ExperimentConfig cfg = parse_config(text, Command::eigenvalue);
  const std::string d1 = "/tmp/grushin_repro_a";
  const std::string d2 = "/tmp/grushin_repro_b";
  fs::remove_all(d1);
  fs::remove_all(d2);
  run(cfg, d1);
  run(cfg, d2);
  CHECK(report_comparable_text(d1 + "/report.txt") ==
        report_comparable_text(d2 + "/report.txt"));
  CHECK(slurp(d1 + "/eigenmode.field") == slurp(d2 + "/eigenmode.field"));
  CHECK(slurp(d1 + "/trace.csv") == slurp(d2 + "/trace.csv"));
}

TEST_CASE("full pipeline: field dump feeds the decay command") {
  // make a synthetic power-law field, dump it, and fit its decay via run()
  const auto q = GrushinParams::make(1, 1, 1.0, 2.0);
  const Grid g = build_grid({{-9.0, 9.0}, {-42.0, 42.0}}, {96, 224}, q);
  Field u = Field::zeros(g, BoundaryKind::free_values);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const Point z = g.node_point(i);
    const double d = std::pow(
        std::pow(z[0] * z[0], q.gamma + 1.0) +
            (q.gamma + 1.0) * (q.gamma + 1.0) * z[1] * z[1],
        0.5 / (q.gamma + 1.0));
    u.values[i] = d < 1e-9 ? 0.0 : 1.0 / d;
  }
  fs::create_directories("/tmp/grushin_decay");
  write_field(u, "/tmp/grushin_decay/in.field");

  const std::string text = R"(
m = 1
n = 1
gamma = 1
p = 2
box = -9:9,-42:42
cells = 96,224
field_in = /tmp/grushin_decay/in.field
r_min = 2
r_max = 8
n_annuli = 6
)";
  const ExperimentConfig cfg = parse_config(text, Command::decay);
  const RunReport rep = run(cfg, "/tmp/grushin_decay/out");
  double slope = 0.0;
  for (const auto& [k, v] : rep.results)
    if (k == "slope") slope = std::stod(v);
  CHECK(slope == doctest::Approx(-1.0).epsilon(0.03));
}
