#include <catch2/catch_amalgamated.hpp>
#include <sstream>

#include "orbsus/run.hpp"

using namespace orbsus;

namespace {

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("single chi run emits one data row") {
  RunConfig cfg;
  cfg.model_source = "dirac-l";
  cfg.method = "residue";
  cfg.beta = 10.0;
  cfg.rho0 = 0.5;
  cfg.delta = 1.0;
  cfg.grid = 16;
  std::ostringstream out, err;
  REQUIRE(run(cfg, out, err) == 0);
  auto lines = csv_lines(out.str());
  REQUIRE(lines.size() == 3);  // comment, header, row
  REQUIRE(lines[0].starts_with("# orbsus"));
  REQUIRE(lines[1] == "beta,rho0,mu0,chi,err_estimate");
}

TEST_CASE("zero-temperature delta sweep is monotone") {
  RunConfig cfg;
  cfg.model_source = "dirac-l";
  cfg.method = "zerot";
  cfg.grid = 32;
  cfg.sweep = parse_sweep("delta=1e-3:1e-1:log:9");
  std::ostringstream out, err;
  REQUIRE(run(cfg, out, err) == 0);
  auto lines = csv_lines(out.str());
  REQUIRE(lines.size() == 2 + 9);
  double prev_abs = std::numeric_limits<double>::infinity();
  for (std::size_t i = 2; i < lines.size(); ++i) {
    std::stringstream ss(lines[i]);
    std::string ds, chis;
    std::getline(ss, ds, ',');
    std::getline(ss, chis, ',');
    double chi = std::strtod(chis.c_str(), nullptr);
    REQUIRE(std::isfinite(chi));
    REQUIRE(std::abs(chi) < prev_abs);  // |chi| grows as delta shrinks
    prev_abs = std::abs(chi);
  }
}

TEST_CASE("sweep parser accepts the documented forms") {
  SweepSpec s = parse_sweep("delta=1e-3:1e-1:log:9");
  REQUIRE(s.count == 9);
  REQUIRE(s.log_scale);
  REQUIRE(parse_sweep("delta=0.1:0.5:lin:3").count == 3);
  REQUIRE_THROWS_AS(parse_sweep("beta=1:2:log:3"), Error);
  REQUIRE_THROWS_AS(parse_sweep("delta=1:2:geo:3"), Error);
  REQUIRE_THROWS_AS(parse_sweep("delta=2:1:log:3"), Error);
}

TEST_CASE("identical configurations produce identical bytes") {
  REQUIRE(!checks::run_csv_determinism().has_value());
}

TEST_CASE("config errors exit with code 1") {
  RunConfig cfg;
  cfg.model_source = "not-a-model";
  cfg.method = "residue";
  std::ostringstream out, err;
  REQUIRE(run(cfg, out, err) == 1);
  REQUIRE(err.str().find("ConfigError") != std::string::npos);
}

TEST_CASE("compute errors exit with code 2") {
  RunConfig cfg;
  cfg.model_source = "honeycomb";
  cfg.onsite_gap = 0.0;
  cfg.method = "zerot";  // gapless: not semiconducting
  cfg.grid = 12;
  std::ostringstream out, err;
  REQUIRE(run(cfg, out, err) == 2);
}

TEST_CASE("bands subcommand emits the path table") {
  RunConfig cfg;
  cfg.model_source = "honeycomb";
  cfg.method = "bands";
  cfg.kpath = "0,0:2,0";
  cfg.kpath_points = 10;
  std::ostringstream out, err;
  REQUIRE(run(cfg, out, err) == 0);
  auto lines = csv_lines(out.str());
  REQUIRE(lines[1] == "s,kx,ky,E1,E2");
  REQUIRE(lines.size() == 2 + 11);
}

TEST_CASE("finite pressure study emits a convergence table") {
  RunConfig cfg;
  cfg.model_source = "honeycomb";
  cfg.onsite_gap = 0.0;
  cfg.method = "finite";
  cfg.finite_study = "pressure";
  cfg.finite_N = 6;
  cfg.beta = 2.0;
  cfg.grid = 48;
  std::ostringstream out, err;
  REQUIRE(run(cfg, out, err) == 0);
  auto lines = csv_lines(out.str());
  REQUIRE(lines[1] == "N,P_N,abs_diff_bulk");
  REQUIRE(lines.size() == 2 + 3);
}

TEST_CASE("split sweep emits the decomposition columns") {
  RunConfig cfg;
  cfg.model_source = "dirac-d";
  cfg.method = "split";
  cfg.beta = 5.0;
  cfg.grid = 16;
  cfg.sweep = parse_sweep("delta=0.5:1.0:lin:2");
  std::ostringstream out, err;
  REQUIRE(run(cfg, out, err) == 0);
  auto lines = csv_lines(out.str());
  REQUIRE(lines[1] == "delta,chi,chi_P,chi_Ib,err_estimate");
  REQUIRE(lines.size() == 2 + 2);
}
