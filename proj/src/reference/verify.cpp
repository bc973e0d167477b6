#include "ncl/verify.hpp"

#include "ncl/buffer.hpp"
#include "ncl/errors.hpp"
#include "ncl/metrics.hpp"
#include "ncl/reference.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

namespace ncl::verify {

bool SuiteResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

namespace {

Matrix random_unit_rows(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m = gaussian_matrix<double>(rows, cols, rng);
  m.rowwise().normalize();
  return m;
}

Check at_most(std::string name, double observed, double tol) {
  return {std::move(name), observed, tol, observed <= tol};
}

}  // namespace

LossFixture make_loss_fixture(std::uint64_t seed, int num_sources, int dim, int num_classes) {
  Rng rng = make_rng(seed, 0xF1C5);
  const int half = num_classes / 2;
  std::vector<std::vector<ClassId>> tasks(2);
  for (int c = 0; c < num_classes; ++c) tasks[c < half ? 0 : 1].push_back(c);

  // Current-task sources are anchors; about a quarter of the sources are buffer samples of task 1.
  std::uniform_int_distribution<int> old_class(0, half - 1);
  std::uniform_int_distribution<int> new_class(half, num_classes - 1);
  std::bernoulli_distribution from_buffer(0.25);
  std::vector<ClassId> labels;
  std::vector<bool> anchor;
  for (int i = 0; i < num_sources; ++i) {
    const bool buffer = i > 0 && from_buffer(rng);
    anchor.push_back(!buffer);
    labels.push_back(buffer ? old_class(rng) : new_class(rng));
  }

  LossFixture f{make_stacked_batch<double>(random_unit_rows(2 * num_sources, dim, rng), labels, anchor),
                random_unit_rows(2 * num_sources, dim, rng),
                generate_etf<double>(num_classes, dim, seed),
                ClassPrototypeMap::from_stream_order(tasks),
                {},
                {}};
  f.old_prototypes = f.prototypes.rows(f.map.vertices_through(1));
  f.all_prototypes = f.prototypes.rows(f.map.vertices_through(2));
  return f;
}

SuiteResult etf_suite() {
  SuiteResult r{"etf", {}};
  for (int k : {2, 3, 10, 50}) {
    const int d = std::max(k - 1, 8);
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed)
      worst = std::max(worst, etf_geometry_error(generate_etf<double>(k, d, seed)));
    r.checks.push_back(at_most("geometry K=" + std::to_string(k) + " d=" + std::to_string(d), worst, 1e-9));
  }
  return r;
}

SuiteResult grad_suite(int batches) {
  SuiteResult r{"grad", {}};
  double g_supcon = 0, v_supcon = 0, g_ird = 0, v_ird = 0, g_sprd = 0, v_sprd = 0;
  double g_fnc2[3] = {0, 0, 0}, v_fnc2[3] = {0, 0, 0};
  double g_hsd[3] = {0, 0, 0};
  const double gammas[3] = {0, 1, 4};
  const int hsd_epochs[3] = {0, 25, 70};  // alpha = 0, 0.25, 0.7 with e0 = 0, E = 100
  DistillationConfig dc;
  dc.warmup_epochs = 0;
  dc.epochs = 100;
  const double tau = 0.5;

  for (int b = 0; b < batches; ++b) {
    const LossFixture f = make_loss_fixture(static_cast<std::uint64_t>(b));
    auto with_z = [&](const Matrix& z) {
      EmbeddingBatch<double> copy = f.batch;
      copy.z = z;
      return copy;
    };

    {
      const auto out = supcon_loss(f.batch, tau);
      const Matrix fd = reference::central_difference(
          [&](const Matrix& z) { return supcon_loss(with_z(z), tau).value; }, f.batch.z);
      g_supcon = std::max(g_supcon, reference::max_relative_error(out.grad_z, fd));
      v_supcon = std::max(v_supcon, std::abs(out.value - reference::supcon(f.batch.z, f.batch.labels,
                                                                         f.batch.is_anchor, tau)));
    }
    for (int gi = 0; gi < 3; ++gi) {
      PlasticityConfig pc{tau, gammas[gi]};
      const auto out = fnc2_loss(f.batch, f.prototypes, f.map, f.old_prototypes, pc);
      const Matrix fd = reference::central_difference(
          [&](const Matrix& z) { return fnc2_loss(with_z(z), f.prototypes, f.map, f.old_prototypes, pc).value; },
          f.batch.z);
      g_fnc2[gi] = std::max(g_fnc2[gi], reference::max_relative_error(out.grad_z, fd));
      v_fnc2[gi] = std::max(v_fnc2[gi], std::abs(out.value - reference::fnc2(f.batch.z, f.batch.labels,
                                                                              f.batch.is_anchor, f.prototypes, f.map,
                                                                              f.old_prototypes, tau, gammas[gi])));
    }
    {
      const auto out = ird_loss(f.batch, f.past_z, dc);
      const Matrix fd = reference::central_difference(
          [&](const Matrix& z) { return ird_loss(with_z(z), f.past_z, dc).value; }, f.batch.z);
      g_ird = std::max(g_ird, reference::max_relative_error(out.grad_z, fd));
      v_ird = std::max(v_ird, std::abs(out.value - reference::ird(f.batch.z, f.past_z, dc.kappa_past,
                                                                  dc.kappa_current)));
    }
    {
      const auto out = sprd_loss(f.batch, f.past_z, f.all_prototypes, dc);
      const Matrix fd = reference::central_difference(
          [&](const Matrix& z) { return sprd_loss(with_z(z), f.past_z, f.all_prototypes, dc).value; },
          f.batch.z);
      g_sprd = std::max(g_sprd, reference::max_relative_error(out.grad_z, fd));
      v_sprd = std::max(v_sprd, std::abs(out.value - reference::sprd(f.batch.z, f.past_z, f.all_prototypes,
                                                                     dc.zeta_past, dc.zeta_current)));
    }
    for (int ai = 0; ai < 3; ++ai) {
      const auto out = hsd_loss(f.batch, f.past_z, f.all_prototypes, dc, hsd_epochs[ai]);
      const Matrix fd = reference::central_difference(
          [&](const Matrix& z) { return hsd_loss(with_z(z), f.past_z, f.all_prototypes, dc, hsd_epochs[ai]).value; },
          f.batch.z);
      g_hsd[ai] = std::max(g_hsd[ai], reference::max_relative_error(out.grad_z, fd));
    }
  }

  constexpr double kGrad = 1e-5;
  constexpr double kValue = 1e-10;
  r.checks.push_back(at_most("supcon gradient", g_supcon, kGrad));
  for (int gi = 0; gi < 3; ++gi)
    r.checks.push_back(at_most("fnc2 gradient gamma=" + std::to_string(static_cast<int>(gammas[gi])), g_fnc2[gi], kGrad));
  r.checks.push_back(at_most("ird gradient", g_ird, kGrad));
  r.checks.push_back(at_most("sprd gradient", g_sprd, kGrad));
  const char* alphas[3] = {"0", "0.25", "0.7"};
  for (int ai = 0; ai < 3; ++ai)
    r.checks.push_back(at_most(std::string("hsd gradient alpha=") + alphas[ai], g_hsd[ai], kGrad));
  r.checks.push_back(at_most("supcon value vs loop oracle", v_supcon, kValue));
  for (int gi = 0; gi < 3; ++gi)
    r.checks.push_back(
        at_most("fnc2 value vs loop oracle gamma=" + std::to_string(static_cast<int>(gammas[gi])), v_fnc2[gi], kValue));
  r.checks.push_back(at_most("ird value vs loop oracle", v_ird, kValue));
  r.checks.push_back(at_most("sprd value vs loop oracle", v_sprd, kValue));
  return r;
}

SuiteResult reservoir_suite(int trials) {
  constexpr std::size_t kCapacity = 10;
  constexpr int kStream = 1000;
  std::vector<long> kept(kStream, 0);
  for (int trial = 0; trial < trials; ++trial) {
    ReplayBuffer buf(kCapacity, static_cast<std::uint64_t>(trial));
    for (int i = 0; i < kStream; ++i) buf.insert(Sample{Vector(), i, 1});
    for (const auto& s : buf.entries()) ++kept[static_cast<std::size_t>(s.label)];
  }
  const double expected = static_cast<double>(kCapacity) / kStream;
  double worst = 0;
  for (long k : kept) worst = std::max(worst, std::abs(static_cast<double>(k) / trials - expected));
  return {"reservoir", {at_most("max |retention - 0.01| over items", worst, 0.002)}};
}

SuiteResult metrics_suite() {
  SuiteResult r{"metrics", {}};
  Rng rng = make_rng(12, 0xACC);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double aa_err = 0, f_err = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int t_count = 2 + trial % 5;
    AccuracyMatrix m(t_count);
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(t_count));
    for (int t = 1; t <= t_count; ++t)
      for (int k = 1; k <= t; ++k) {
        const double v = unit(rng);
        m.set(t, k, v);
        rows[static_cast<std::size_t>(t - 1)].push_back(v);
      }
    aa_err = std::max(aa_err, std::abs(average_accuracy(m) - reference::average_accuracy(rows)));
    f_err = std::max(f_err, std::abs(average_forgetting(m) - reference::average_forgetting(rows)));
  }
  r.checks.push_back(at_most("average accuracy vs loop oracle", aa_err, 1e-12));
  r.checks.push_back(at_most("average forgetting vs loop oracle", f_err, 1e-12));

  AccuracyMatrix hand(2);
  hand.set(1, 1, 0.9);
  hand.set(2, 1, 0.7);
  hand.set(2, 2, 0.8);
  r.checks.push_back(at_most("hand example |F - 0.2|", std::abs(average_forgetting(hand) - 0.2), 1e-15));
  return r;
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"etf", "grad", "reservoir", "metrics", "all"};
  return names;
}

std::vector<SuiteResult> run_suites(const std::string& name) {
  if (name == "etf") return {etf_suite()};
  if (name == "grad") return {grad_suite()};
  if (name == "reservoir") return {reservoir_suite()};
  if (name == "metrics") return {metrics_suite()};
  if (name == "all") return {etf_suite(), grad_suite(), reservoir_suite(), metrics_suite()};
  throw ConfigError("unknown suite '" + name + "' (expected etf, grad, reservoir, metrics or all)");
}

void print(const SuiteResult& r, std::ostream& out) {
  for (const auto& c : r.checks)
    out << (c.passed ? "PASS " : "FAIL ") << r.suite << ": " << c.name << ": max error " << std::scientific
        << std::setprecision(3) << c.observed << " (tolerance " << c.tolerance << ")" << std::defaultfloat << '\n';
  out << r.suite << ": " << (r.passed() ? "ok" : "FAILED") << '\n';
}

}  // namespace ncl::verify
