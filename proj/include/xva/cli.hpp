#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "xva/iterate.hpp"

namespace xva {

/// Configuration problems: malformed document, unknown keys, out-of-range
/// values. The message always names the offending field path.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Failures writing artifacts (or reading them back).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One pricing run, fully determined: market curves, credit parameters,
/// contract, grid, march, solver and iteration controls. Every component
/// invariant is re-validated while loading; violations surface as
/// ConfigError with the schema path.
struct RunConfig {
  RiskParams risk;  // market.r plus the credit block
  TimeCurve sigma{0.0}, q{0.0}, gamma{0.0};
  Payoff payoff;
  double x_min = -6.0;
  double x_max = 6.0;
  int n = 801;
  double mu = 4.0;
  double horizon = 1.0;
  IterationConfig solver;  // backend, theta, sampling, tolerance, direction
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

/// Canonical JSON echo of a loaded config: defaults filled in, curves in
/// knot-list form, stable key order, 17 significant digits. Parsing the
/// echo reproduces the run bit for bit.
std::string echo_config(const RunConfig& cfg);

struct ProbeSpec {
  double spot = 0.0;
  double t = 0.0;
};

struct PriceArtifacts {
  IterationReport report;
  PriceSurface surface;
  double headline = 0.0;  // price at (spot = strike, t = 0)
  std::vector<double> probe_values;
};

PriceArtifacts run_price(const RunConfig& cfg, const std::vector<ProbeSpec>& probes = {});

/// Writes surface.csv (x,S,tau,t,v), iterations.csv (iter, direction,
/// gap_weighted_sup, ratio, sandwich_ok) and summary.json into out_dir.
/// Artifacts carry no timestamps or runtimes: identical run, identical
/// bytes.
void write_price_artifacts(const PriceArtifacts& art, const RunConfig& cfg,
                           const std::vector<ProbeSpec>& probes,
                           const std::filesystem::path& out_dir);

struct CompareColumn {
  std::string name;
  std::vector<double> values;  // deepest time level, price units
  double headline = 0.0;
  bool converged = false;
  int iterations = 0;
  double runtime_ms = 0.0;
};

struct PairGap {
  double max_rel = 0.0;  // relative to max(1, |reference|) in strike units
  double mean_rel = 0.0;
};

struct CompareArtifacts {
  std::vector<double> x;
  std::vector<double> spot;
  CompareColumn kernel, fd, mc;
  PairGap kernel_fd, kernel_mc, fd_mc;  // interior nodes only
  double atm_pooled_se = 0.0;           // sampling error at the money, price units
  double atm_z = 0.0;                   // (mc - kernel) / pooled se at the money
  double max_pooled_se = 0.0;           // price units
};

/// Solves the configured problem once per backend and tabulates the
/// deepest-level values side by side. A reaction that vanishes identically
/// needs no iteration, so the sampling backend then runs exactly one march.
CompareArtifacts run_compare(const RunConfig& cfg);

/// Writes compare.csv (x,S,kernel,fd,mc) and compare.json into out_dir.
/// The JSON carries per-backend runtimes; the CSV is runtime-free.
void write_compare_artifacts(const CompareArtifacts& art, const RunConfig& cfg,
                             const std::filesystem::path& out_dir);

}  // namespace xva
