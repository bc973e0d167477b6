#include "ncl/report.hpp"

#include "ncl/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>

namespace ncl {

using nlohmann::ordered_json;

AblationCell AblationCell::of(const TrainConfig& cfg) {
  return {cfg.plasticity_loss, cfg.stability_loss, cfg.pseudo_replay, cfg.buffer_capacity};
}

void AblationCell::apply(TrainConfig& cfg) const {
  cfg.plasticity_loss = plasticity;
  cfg.stability_loss = stability;
  cfg.pseudo_replay = pseudo_replay;
  cfg.buffer_capacity = buffer;
}

std::string AblationCell::describe() const {
  return to_string(plasticity) + "+" + to_string(stability) + " pseudo_replay=" + (pseudo_replay ? "on" : "off") +
         " buffer=" + std::to_string(buffer);
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw ProtocolError("mean_std: no values");
  double sum = 0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

SummaryRow summarize(const AblationCell& cell, const std::vector<SeedResult>& results) {
  SummaryRow row;
  row.cell = cell;
  row.n_seeds = static_cast<int>(results.size());
  std::vector<double> aa;
  std::vector<double> f;
  for (const auto& r : results) {
    aa.push_back(r.average_accuracy);
    if (r.average_forgetting) f.push_back(*r.average_forgetting);
  }
  const MeanStd a = mean_std(aa);
  row.aa_mean = a.mean;
  row.aa_std = a.std;
  if (!f.empty() && f.size() == results.size()) {
    const MeanStd fs = mean_std(f);
    row.f_mean = fs.mean;
    row.f_std = fs.std;
  }
  return row;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

ordered_json cell_json(const AblationCell& c) {
  ordered_json j;
  j["plasticity"] = to_string(c.plasticity);
  j["stability"] = to_string(c.stability);
  j["pseudo_replay"] = c.pseudo_replay;
  j["buffer"] = c.buffer;
  return j;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

}  // namespace

ordered_json report_to_json(const MetricsReport& report, const ExperimentConfig& cfg) {
  ordered_json j;
  j["format"] = "ncl-report";
  j["version"] = 1;
  j["seed"] = report.seed;
  j["scenario"] = to_string(report.scenario);
  j["cell"] = cell_json(AblationCell::of(cfg.train));
  ordered_json config = config_to_json(cfg);
  config.erase("seeds");
  config.erase("output_dir");
  j["config"] = config;

  ordered_json acc = ordered_json::array();
  for (const auto& row : report.accuracy.rows()) acc.push_back(row);
  j["accuracy"] = acc;
  j["average_accuracy"] = report.average_accuracy;
  j["average_forgetting"] = report.average_forgetting ? ordered_json(*report.average_forgetting) : ordered_json();

  ordered_json epochs = ordered_json::array();
  for (const auto& e : report.epochs) {
    ordered_json r;
    r["task"] = e.task;
    r["epoch"] = e.epoch;
    r["fnc2"] = e.fnc2;
    r["ird"] = e.ird;
    r["sprd"] = e.sprd;
    r["stability"] = e.stability;
    r["total"] = e.total;
    r["alpha"] = e.alpha;
    if (e.nc1) r["nc1"] = *e.nc1;
    if (e.nc2) r["nc2"] = *e.nc2;
    epochs.push_back(r);
  }
  j["epochs"] = epochs;

  ordered_json stats = ordered_json::array();
  for (std::size_t i = 0; i < report.task_stats.size(); ++i) {
    const auto& s = report.task_stats[i];
    ordered_json r;
    r["task"] = i + 1;
    r["plasticity_calls"] = s.plasticity_calls;
    r["ird_calls"] = s.ird_calls;
    r["sprd_calls"] = s.sprd_calls;
    r["teacher_forwards"] = s.teacher_forwards;
    r["anchors_r_above_one"] = s.anchors_r_above_one;
    stats.push_back(r);
  }
  j["task_stats"] = stats;

  ordered_json nc = ordered_json::array();
  for (const auto& s : report.nc) {
    ordered_json r;
    r["after_task"] = s.after_task;
    r["classes"] = s.classes;
    r["within_traces"] = s.within_traces;
    r["between"] = s.between;
    r["nc1"] = s.nc1;
    r["nc2"] = s.nc2;
    nc.push_back(r);
  }
  j["nc"] = nc;
  return j;
}

void write_report_json(const MetricsReport& report, const ExperimentConfig& cfg, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << report_to_json(report, cfg).dump(2) << '\n';
}

void write_losses_csv(const MetricsReport& report, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "epoch,task,fnc2,ird,sprd,alpha\n";
  for (const auto& e : report.epochs)
    out << e.epoch << ',' << e.task << ',' << format_number(e.fnc2) << ',' << format_number(e.ird) << ','
        << format_number(e.sprd) << ',' << format_number(e.alpha) << '\n';
}

void write_accuracy_csv(const MetricsReport& report, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "t,k,accuracy\n";
  const int n = report.accuracy.num_tasks();
  for (int t = 1; t <= n; ++t)
    for (int k = 1; k <= t; ++k)
      if (report.accuracy.has(t, k)) out << t << ',' << k << ',' << format_number(report.accuracy.at(t, k)) << '\n';
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "plasticity,stability,pseudo_replay,buffer,aa_mean,aa_std,f_mean,f_std,n_seeds\n";
  for (const auto& r : rows)
    out << to_string(r.cell.plasticity) << ',' << to_string(r.cell.stability) << ','
        << (r.cell.pseudo_replay ? "on" : "off") << ',' << r.cell.buffer << ',' << format_number(r.aa_mean) << ','
        << format_number(r.aa_std) << ',' << format_number(r.f_mean.value_or(NAN)) << ','
        << format_number(r.f_std.value_or(NAN)) << ',' << r.n_seeds << '\n';
}

void print_summary(const std::vector<SummaryRow>& rows, std::ostream& out) {
  out << std::left << std::setw(12) << "plasticity" << std::setw(10) << "stability" << std::setw(14)
      << "pseudo_replay" << std::setw(8) << "buffer" << std::setw(20) << "AA (%)" << std::setw(20) << "F (%)"
      << "seeds\n";
  for (const auto& r : rows) {
    auto pm = [](double m, double s) {
      std::ostringstream ss;
      ss << std::fixed << std::setprecision(2) << 100 * m << " +- " << 100 * s;
      return ss.str();
    };
    out << std::left << std::setw(12) << to_string(r.cell.plasticity) << std::setw(10) << to_string(r.cell.stability)
        << std::setw(14) << (r.cell.pseudo_replay ? "on" : "off") << std::setw(8) << r.cell.buffer << std::setw(20)
        << pm(r.aa_mean, r.aa_std) << std::setw(20) << (r.f_mean ? pm(*r.f_mean, *r.f_std) : std::string("n/a"))
        << r.n_seeds << '\n';
  }
}

StoredReport read_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    if (j.value("format", "") != "ncl-report") throw FormatError(path.string() + ": not a report file");
    StoredReport r;
    const auto& c = j.at("cell");
    r.cell.plasticity = plasticity_from_string(c.at("plasticity").get<std::string>());
    r.cell.stability = stability_from_string(c.at("stability").get<std::string>());
    r.cell.pseudo_replay = c.at("pseudo_replay").get<bool>();
    r.cell.buffer = c.at("buffer").get<std::size_t>();
    r.result.seed = j.at("seed").get<std::uint64_t>();
    r.result.average_accuracy = j.at("average_accuracy").get<double>();
    if (!j.at("average_forgetting").is_null()) r.result.average_forgetting = j.at("average_forgetting").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace ncl
