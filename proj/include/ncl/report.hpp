#pragma once

// Report files. Column orders are fixed:
//   summary.csv       plasticity,stability,pseudo_replay,buffer,aa_mean,aa_std,f_mean,f_std,n_seeds
//   losses_<seed>.csv epoch,task,fnc2,ird,sprd,alpha
//   accuracy_<seed>.csv  t,k,accuracy   (lower triangle of A, row-major)
// Standard deviations are sample deviations (n - 1); a single seed reports 0.
// Forgetting is undefined for one-task streams and written as "nan".

#include "ncl/config.hpp"
#include "ncl/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ncl {

struct AblationCell {
  PlasticityLoss plasticity = PlasticityLoss::fnc2;
  StabilityLoss stability = StabilityLoss::hsd;
  bool pseudo_replay = true;
  std::size_t buffer = 0;

  static AblationCell of(const TrainConfig& cfg);
  void apply(TrainConfig& cfg) const;
  std::string describe() const;

  friend auto operator<=>(const AblationCell&, const AblationCell&) = default;
};

struct SeedResult {
  std::uint64_t seed = 0;
  double average_accuracy = 0;
  std::optional<double> average_forgetting;
};

struct SummaryRow {
  AblationCell cell;
  double aa_mean = 0;
  double aa_std = 0;
  std::optional<double> f_mean;
  std::optional<double> f_std;
  int n_seeds = 0;
};

struct MeanStd {
  double mean = 0;
  double std = 0;
};

/// Sample mean and (n - 1) standard deviation, accumulated in the given order.
MeanStd mean_std(const std::vector<double>& values);

/// Results must be in seed order; forgetting is summarized only when every seed has it.
SummaryRow summarize(const AblationCell& cell, const std::vector<SeedResult>& results);

nlohmann::ordered_json report_to_json(const MetricsReport& report, const ExperimentConfig& cfg);
std::string format_number(double v);

void write_report_json(const MetricsReport& report, const ExperimentConfig& cfg, const std::filesystem::path& path);
void write_losses_csv(const MetricsReport& report, const std::filesystem::path& path);
void write_accuracy_csv(const MetricsReport& report, const std::filesystem::path& path);
void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);
void print_summary(const std::vector<SummaryRow>& rows, std::ostream& out);

struct StoredReport {
  AblationCell cell;
  SeedResult result;
};

StoredReport read_report_json(const std::filesystem::path& path);

}  // namespace ncl
