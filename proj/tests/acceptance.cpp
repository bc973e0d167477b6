#include "ncl/config.hpp"
#include "ncl/experiment.hpp"
#include "ncl/losses.hpp"
#include "ncl/trainer.hpp"
#include "ncl/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

using namespace ncl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// A limit of zero means the suite is untimed.
Outcome from_suite(const verify::SuiteResult& r, double seconds = 0, double limit = 0) {
  double worst = 0;
  std::string failing;
  for (const auto& c : r.checks) {
    if (c.tolerance > 0) worst = std::max(worst, c.observed / c.tolerance);
    if (!c.passed && failing.empty()) failing = c.name;
  }
  Outcome o{r.passed() && (limit == 0 || seconds < limit), fmt("worst error/tolerance %.3g", worst)};
  if (limit > 0) o.detail += fmt(", %.2f s (limit %.0f s)", seconds, limit);
  if (!failing.empty()) o.detail += ", first failure: " + failing;
  return o;
}

template <class F>
double timed(F&& f) {
  const auto start = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Outcome etf() {
  verify::SuiteResult r;
  const double s = timed([&] { r = verify::etf_suite(); });
  return from_suite(r, s, 1.0);
}

Outcome gradients() {
  verify::SuiteResult r;
  const double s = timed([&] { r = verify::grad_suite(20); });
  verify::SuiteResult grads{r.suite, {}};
  for (const auto& c : r.checks)
    if (c.name.find("grad") != std::string::npos) grads.checks.push_back(c);
  if (grads.checks.empty()) return {false, "no gradient checks ran"};
  return from_suite(grads, s, 30.0);
}

Outcome oracle_values() {
  const verify::SuiteResult r = verify::grad_suite(20);
  verify::SuiteResult values{r.suite, {}};
  for (const auto& c : r.checks)
    if (c.name.find("value") != std::string::npos) values.checks.push_back(c);
  if (values.checks.empty()) return {false, "no value checks ran"};
  return from_suite(values);
}

Outcome closed_forms() {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  Matrix same(4, 3);
  for (int i = 0; i < 4; ++i) same.row(i) = Vector(Eigen::Vector3d(1, 2, 3).normalized()).transpose();
  const auto identical = make_stacked_batch<double>(same, {5, 5});
  expect(std::abs(supcon_loss(identical, 0.5).value - 4 * std::log(3.0)) < 1e-10, "supcon identical batch");

  Rng rng = make_rng(11);
  Matrix two = gaussian_matrix<double>(2, 6, rng);
  two.rowwise().normalize();
  Matrix past = gaussian_matrix<double>(2, 6, rng);
  past.rowwise().normalize();
  expect(std::abs(ird_loss(make_stacked_batch<double>(two, {0}), past, DistillationConfig{}).value) < 1e-15,
         "ird two views");

  // Embeddings orthogonal to the prototype plane see every prototype equally.
  const auto protos = generate_etf(3, 3, 2);
  const Eigen::Vector3d p0 = protos.row(0).transpose(), p1 = protos.row(1).transpose();
  const Vector normal = Vector(p0.cross(p1).normalized());
  Matrix z(4, 3);
  for (int i = 0; i < 4; ++i) z.row(i) = (i % 2 ? -1.0 : 1.0) * normal.transpose();
  const auto b = make_stacked_batch<double>(z, {0, 1});
  expect(std::abs(sprd_loss(b, b.z, protos.vectors(), DistillationConfig{}).value - 4 * std::log(3.0)) < 1e-10,
         "sprd uniform");

  const auto etf2 = generate_etf(2, 4, 1);
  Matrix on_proto(2, 4);
  on_proto.row(0) = on_proto.row(1) = etf2.row(0);
  expect(std::abs(fnc2_loss(make_stacked_batch<double>(on_proto, {0}), etf2,
                            ClassPrototypeMap::from_stream_order({{0, 1}}), Matrix(0, 4), PlasticityConfig{0.5, 1.0})
                      .value) < 1e-15,
         "fnc2 on prototype");

  DistillationConfig dc;
  dc.warmup_epochs = 30;
  dc.epochs = 100;
  expect(alpha_schedule(5, dc) == 0.0 && alpha_schedule(30, dc) == 0.0 && alpha_schedule(80, dc) == 0.5,
         "alpha schedule");

  const auto metrics = verify::metrics_suite();
  for (const auto& c : metrics.checks)
    if (c.name.find("hand") != std::string::npos) expect(c.passed, c.name);

  Outcome o{failures.empty(), failures.empty() ? "all closed-form values hold" : "failed:"};
  for (const auto& f : failures) o.detail += " " + f;
  return o;
}

Outcome reservoir() {
  verify::SuiteResult r;
  const double s = timed([&] { r = verify::reservoir_suite(100000); });
  return from_suite(r, s, 60.0);
}

Outcome metric_formulas() { return from_suite(verify::metrics_suite()); }

Outcome nc_emergence() {
  double first = 0, last = 0, nc2 = 0;
  const int seeds = 5;
  const double s = timed([&] {
    for (int seed = 0; seed < seeds; ++seed) {
      SyntheticStreamConfig sc;
      sc.tasks = 1;
      sc.seed = static_cast<std::uint64_t>(seed);
      TrainConfig cfg;
      cfg.seed = static_cast<std::uint64_t>(seed);
      cfg.epochs_first_task = 100;
      cfg.stability_loss = StabilityLoss::none;
      cfg.track_nc = true;
      cfg.probe_epochs = 1;
      const MetricsReport r = run_experiment(cfg, make_synthetic_stream(sc));
      first += *r.epochs.front().nc1 / seeds;
      last += *r.epochs.back().nc1 / seeds;
      nc2 += *r.epochs.back().nc2 / seeds;
    }
  });
  const double drop = 1 - last / first;
  return {drop >= 0.5 && nc2 > 0.9 && s < 120,
          fmt("nc1 %.4g -> %.4g (drop %.1f%%), final nc2 %.4f", first, last, 100 * drop, nc2) +
              fmt(", %.1f s", s)};
}

const char* kStream = R"("stream": {"tasks": 3, "classes_per_task": 2, "samples_per_class": 100, "input_dim": 20})";

ExperimentConfig ablation_config(const std::string& train, int seeds) {
  std::string list;
  for (int s = 0; s < seeds; ++s) list += (s ? "," : "") + std::to_string(s);
  return parse_config("{\"seeds\": [" + list + "], " + kStream + ", \"train\": " + train + "}", "acceptance");
}

double mean_aa(const ExperimentConfig& cfg, PlasticityLoss p, StabilityLoss st, bool pr, std::size_t buffer) {
  return run_cell(cfg, AblationCell{p, st, pr, buffer}, std::nullopt).summary.aa_mean;
}

Outcome ablation_trend() {
  const auto cfg = ablation_config(R"({"buffer": 200, "batch_size": 32})", 10);
  double none = 0, ird = 0, hsd = 0;
  const double s = timed([&] {
    none = mean_aa(cfg, PlasticityLoss::fnc2, StabilityLoss::none, true, 200);
    ird = mean_aa(cfg, PlasticityLoss::fnc2, StabilityLoss::ird, true, 200);
    hsd = mean_aa(cfg, PlasticityLoss::fnc2, StabilityLoss::hsd, true, 200);
  });
  const bool ok = hsd - ird >= -0.005 && ird - none >= -0.005 && hsd > none && s < 600;
  return {ok, fmt("AA none %.2f, ird %.2f, hsd %.2f over 10 seeds", 100 * none, 100 * ird, 100 * hsd) +
                  fmt(", %.1f s", s)};
}

Outcome pseudo_replay_trend() {
  const auto cfg = ablation_config(R"({"classifier": "nc4"})", 10);
  const double off = mean_aa(cfg, PlasticityLoss::fnc2, StabilityLoss::hsd, false, 0);
  const double on = mean_aa(cfg, PlasticityLoss::fnc2, StabilityLoss::hsd, true, 0);
  return {on - off > 0, fmt("memory-free AA off %.2f, on %.2f, margin %+.2f over 10 seeds", 100 * off, 100 * on,
                            100 * (on - off))};
}

Outcome memory_trend() {
  const auto cfg = ablation_config(R"({"batch_size": 32})", 10);
  const double without = mean_aa(cfg, PlasticityLoss::fnc2, StabilityLoss::hsd, true, 0);
  const double with = mean_aa(cfg, PlasticityLoss::fnc2, StabilityLoss::hsd, true, 200);
  return {with >= without, fmt("AA buffer 0 %.2f, buffer 200 %.2f over 10 seeds", 100 * without, 100 * with)};
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const auto dir = fs::temp_directory_path() / "ncl_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto cfg = dir / "config.json";
  std::ofstream(cfg) << "{\"seeds\": [7], " << kStream
                     << R"(, "train": {"epochs_first_task": 10, "epochs_later": 10, "buffer": 20, "probe_epochs": 5}})";
  std::stringstream so, se;
  for (const char* run : {"a", "b"}) {
    RunOptions opts;
    opts.out = dir / run;
    opts.checkpoints = opts.dump_buffer = opts.dump_relations = true;
    if (cmd_run(cfg, opts, so, se) != 0) return {false, "run failed: " + se.str()};
  }
  int compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto other = dir / "b" / fs::relative(entry.path(), dir / "a");
    if (!fs::exists(other) || read_bytes(entry.path()) != read_bytes(other))
      return {false, "differs: " + fs::relative(entry.path(), dir / "a").string()};
    ++compared;
  }
  fs::remove_all(dir);
  return {compared > 0, std::to_string(compared) + " files identical across two runs"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"etf geometry", etf},
      {"gradient correctness", gradients},
      {"oracle equivalence", oracle_values},
      {"closed-form spot checks", closed_forms},
      {"reservoir law", reservoir},
      {"metric formulas", metric_formulas},
      {"nc emergence", nc_emergence},
      {"ablation trend", ablation_trend},
      {"pseudo-replay trend", pseudo_replay_trend},
      {"memory trend", memory_trend},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.passed;
    std::cout << (o.passed ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
