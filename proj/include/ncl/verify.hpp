#pragma once

#include "ncl/etf.hpp"
#include "ncl/losses.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace ncl::verify {

struct Check {
  std::string name;
  double observed = 0;  // max error, or the measured quantity
  double tolerance = 0;
  bool passed = false;
};

struct SuiteResult {
  std::string suite;
  std::vector<Check> checks;
  bool passed() const;
};

/// Randomized loss instance: N sources of which some are buffer (non-anchor) views,
/// d-dimensional unit embeddings, K classes split over two tasks.
struct LossFixture {
  EmbeddingBatch<double> batch;
  Matrix past_z;
  PrototypeSet<double> prototypes;
  ClassPrototypeMap map;
  Matrix old_prototypes;  // vertices of task 1
  Matrix all_prototypes;  // vertices of tasks 1..2
};

LossFixture make_loss_fixture(std::uint64_t seed, int num_sources = 4, int dim = 8, int num_classes = 4);

SuiteResult etf_suite();
/// Finite-difference gradient checks plus loop-oracle value agreement.
SuiteResult grad_suite(int batches = 20);
SuiteResult reservoir_suite(int trials = 100000);
SuiteResult metrics_suite();

const std::vector<std::string>& suite_names();
/// Throws ConfigError on an unknown name; "all" runs every suite.
std::vector<SuiteResult> run_suites(const std::string& name);
void print(const SuiteResult& r, std::ostream& out);

}  // namespace ncl::verify
