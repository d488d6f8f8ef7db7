#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cpdlp/background.hpp"
#include "cpdlp/model.hpp"
#include "cpdlp/types.hpp"

namespace cpdlp::cli {

struct PercolationConfig {
  nlohmann::json b;  // array of b_k, or {"form": "power_law", "coeff": c, "exponent": s}
  std::int64_t cutoff = 64;
  Vertex lo = -100, hi = 100;
};

struct SweepConfig {
  std::vector<double> lambda, gamma, q;
};

struct CertificateConfig {
  double T_max = 1 << 20;
  std::uint64_t tail_replicas = 20000;
  std::uint64_t ey1_replicas = 20000;
  double q_exponent = 2.0;
  std::int64_t r0_max = 1 << 12;
  std::uint64_t eps1_replicas = 4000;
  std::uint64_t z_replicas = 20000;
};

struct RunConfig {
  std::string subcommand;
  nlohmann::json kernel = "reference";
  ModelParams params;
  std::int64_t window_L = 20, cutoff_R = 10;
  double horizon = 1.0;
  std::vector<double> sample_times;  // simulate; empty: {0, horizon}
  std::uint64_t replicas = 1000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  double confidence = 0.95;
  double epsilon = 0.3;
  std::string out = ".";
  VertexSet initial{0};
  BackgroundInit init = BackgroundInit::stationary;
  PercolationConfig percolation;
  SweepConfig sweep;
  CertificateConfig certificate;
};

const std::vector<std::string>& subcommands();

// Schema validation: unknown keys, wrong types and invalid values throw ConfigError.
RunConfig parse_config(const nlohmann::json& j, const std::string& subcommand);
nlohmann::json to_json(const RunConfig& c);
KernelSpec parse_kernel(const nlohmann::json& j);

// Writes the artifacts of one run under c.out; returns the exit status.
int run(const RunConfig& c, std::ostream& log);

// Writes `text` to `path` through a temporary file and a rename.
void write_atomic(const std::string& path, const std::string& text);

std::string version();

int main(int argc, char** argv);

}  // namespace cpdlp::cli
