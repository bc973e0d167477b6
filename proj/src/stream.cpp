#include "ncl/stream.hpp"

#include "ncl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace ncl {

std::string to_string(Scenario s) { return s == Scenario::class_il ? "class-il" : "task-il"; }

Scenario scenario_from_string(const std::string& s) {
  if (s == "class-il") return Scenario::class_il;
  if (s == "task-il") return Scenario::task_il;
  throw ConfigError("unknown scenario '" + s + "' (expected class-il or task-il)");
}

int TaskStream::num_classes() const {
  int n = 0;
  for (const auto& t : tasks) n += static_cast<int>(t.classes.size());
  return n;
}

std::vector<std::vector<ClassId>> TaskStream::classes_per_task() const {
  std::vector<std::vector<ClassId>> out;
  for (const auto& t : tasks) out.push_back(t.classes);
  return out;
}

void TaskStream::validate() const {
  if (tasks.empty()) throw ProtocolError("stream has no tasks");
  std::set<ClassId> seen;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& t = tasks[i];
    if (t.task != static_cast<int>(i) + 1) throw ProtocolError("task indices must run 1..T");
    if (t.train.empty()) throw ProtocolError("task " + std::to_string(t.task) + " has no training samples");
    const std::set<ClassId> own(t.classes.begin(), t.classes.end());
    for (ClassId y : own)
      if (!seen.insert(y).second)
        throw ProtocolError("class " + std::to_string(y) + " appears in more than one task");
    for (const auto* split : {&t.train, &t.test})
      for (const auto& s : *split) {
        if (!own.contains(s.label))
          throw ProtocolError("sample label " + std::to_string(s.label) + " not in task " + std::to_string(t.task));
        if (s.x.size() != input_dim) throw ProtocolError("sample width differs from stream input_dim");
      }
  }
}

TaskStream make_synthetic_stream(const SyntheticStreamConfig& cfg) {
  if (cfg.tasks <= 0 || cfg.classes_per_task <= 0 || cfg.samples_per_class <= 0)
    throw ConfigError("synthetic stream: counts must be positive");
  if (cfg.input_dim < 2) throw ConfigError("synthetic stream: input_dim must be >= 2");
  if (!(cfg.cluster_spread >= 0)) throw ConfigError("synthetic stream: cluster_spread must be >= 0");
  if (cfg.mean_rank < 0 || cfg.mean_rank > cfg.input_dim)
    throw ConfigError("synthetic stream: mean_rank must lie in [0, input_dim]");

  Rng rng = make_rng(cfg.seed, 0x57EA);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int num_train = std::max(1, static_cast<int>(std::lround(0.8 * cfg.samples_per_class)));
  const int rank = cfg.mean_rank > 0 ? cfg.mean_rank : cfg.input_dim;
  const Matrix basis = cfg.mean_rank > 0 ? gaussian_matrix<double>(cfg.input_dim, rank, rng)
                                         : Matrix(Matrix::Identity(cfg.input_dim, cfg.input_dim));

  TaskStream stream;
  stream.scenario = cfg.scenario;
  stream.input_dim = cfg.input_dim;
  ClassId next_label = 0;
  for (int t = 1; t <= cfg.tasks; ++t) {
    TaskDataset task;
    task.task = t;
    for (int c = 0; c < cfg.classes_per_task; ++c) {
      const ClassId label = next_label++;
      task.classes.push_back(label);
      Vector coeff(rank);
      for (int j = 0; j < rank; ++j) coeff(j) = normal(rng);
      Vector mean = basis * coeff;
      mean.normalize();
      for (int s = 0; s < cfg.samples_per_class; ++s) {
        Vector x(cfg.input_dim);
        for (int j = 0; j < cfg.input_dim; ++j) x(j) = mean(j) + cfg.cluster_spread * normal(rng);
        (s < num_train ? task.train : task.test).push_back({std::move(x), label, t});
      }
    }
    stream.tasks.push_back(std::move(task));
  }
  stream.validate();
  return stream;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    out.push_back(cell);
  }
  return out;
}

}  // namespace

TaskStream load_csv_stream(const std::filesystem::path& path, Scenario scenario) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read dataset " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "task" || header[1] != "label" || header[2] != "split")
    throw FormatError(path.string() + ": header must start with task,label,split");
  const int dim = static_cast<int>(header.size()) - 3;
  for (int j = 0; j < dim; ++j)
    if (header[static_cast<std::size_t>(3 + j)] != "x" + std::to_string(j))
      throw FormatError(path.string() + ": expected column x" + std::to_string(j));

  std::map<int, TaskDataset> by_task;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    if (static_cast<int>(cells.size()) != dim + 3) throw FormatError(where + "wrong number of columns");
    try {
      const int task = std::stoi(cells[0]);
      const ClassId label = std::stoi(cells[1]);
      Vector x(dim);
      for (int j = 0; j < dim; ++j) x(j) = std::stod(cells[static_cast<std::size_t>(3 + j)]);
      auto& ds = by_task[task];
      ds.task = task;
      if (std::find(ds.classes.begin(), ds.classes.end(), label) == ds.classes.end()) ds.classes.push_back(label);
      if (cells[2] == "train")
        ds.train.push_back({std::move(x), label, task});
      else if (cells[2] == "test")
        ds.test.push_back({std::move(x), label, task});
      else
        throw FormatError(where + "split must be train or test");
    } catch (const std::logic_error&) {
      throw FormatError(where + "unparseable number");
    }
  }

  TaskStream stream;
  stream.scenario = scenario;
  stream.input_dim = dim;
  for (auto& [t, ds] : by_task) stream.tasks.push_back(std::move(ds));
  stream.validate();
  return stream;
}

void write_csv_stream(const TaskStream& stream, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write dataset " + path.string());
  out << "task,label,split";
  for (int j = 0; j < stream.input_dim; ++j) out << ",x" << j;
  out << '\n' << std::setprecision(17);
  for (const auto& t : stream.tasks)
    for (const auto* split : {&t.train, &t.test})
      for (const auto& s : *split) {
        out << t.task << ',' << s.label << ',' << (split == &t.train ? "train" : "test");
        for (Eigen::Index j = 0; j < s.x.size(); ++j) out << ',' << s.x(j);
        out << '\n';
      }
}

void AugmentConfig::validate() const {
  if (!(noise_std >= 0)) throw ConfigError("augment: noise_std must be >= 0");
  if (!(scale_lo <= scale_hi)) throw ConfigError("augment: scale_jitter needs lo <= hi");
  if (!(max_rotation >= 0)) throw ConfigError("augment: max_rotation must be >= 0");
}

namespace {

Vector augment_once(const Vector& x, const AugmentConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector v = x * (cfg.scale_lo + (cfg.scale_hi - cfg.scale_lo) * unit(rng));
  if (cfg.rotation && x.size() >= 2) {
    std::uniform_int_distribution<Eigen::Index> coord(0, x.size() - 1);
    const Eigen::Index i = coord(rng);
    Eigen::Index j = coord(rng);
    while (j == i) j = coord(rng);
    const double angle = cfg.max_rotation * (2.0 * unit(rng) - 1.0);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double a = v(i);
    const double b = v(j);
    v(i) = c * a - s * b;
    v(j) = s * a + c * b;
  }
  if (cfg.noise_std > 0) {
    std::normal_distribution<double> normal(0.0, cfg.noise_std);
    for (Eigen::Index k = 0; k < v.size(); ++k) v(k) += normal(rng);
  }
  return v;
}

}  // namespace

std::pair<Vector, Vector> augment_two_views(const Vector& x, const AugmentConfig& cfg, Rng& rng) {
  Vector a = augment_once(x, cfg, rng);
  Vector b = augment_once(x, cfg, rng);
  return {std::move(a), std::move(b)};
}

TaskBatcher::TaskBatcher(const TaskDataset& dataset, const ReplayBuffer& buffer, int batch_size,
                         AugmentConfig augment, Rng& rng)
    : dataset_(dataset), buffer_(buffer), batch_size_(batch_size), augment_(augment), rng_(rng) {
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  if (dataset.train.empty()) throw ProtocolError("task has no training samples");
  augment_.validate();
  const std::size_t total = dataset.train.size() + buffer.size();
  batches_ = static_cast<int>((total + static_cast<std::size_t>(batch_size) - 1) / static_cast<std::size_t>(batch_size));
}

std::optional<ViewBatch> TaskBatcher::next() {
  if (emitted_ >= batches_) return std::nullopt;
  ++emitted_;
  const auto drawn = sample_batch(buffer_, dataset_.train, batch_size_, rng_);
  const int n = static_cast<int>(drawn.size());
  const Eigen::Index dim = drawn.front().sample->x.size();

  ViewBatch b;
  b.num_sources = n;
  b.inputs.resize(2 * n, dim);
  b.labels.resize(static_cast<std::size_t>(2 * n));
  b.is_anchor.resize(static_cast<std::size_t>(2 * n));
  for (int i = 0; i < n; ++i) {
    auto [xa, xb] = augment_two_views(drawn[static_cast<std::size_t>(i)].sample->x, augment_, rng_);
    b.inputs.row(i) = xa.transpose();
    b.inputs.row(i + n) = xb.transpose();
    for (int v : {i, i + n}) {
      b.labels[static_cast<std::size_t>(v)] = drawn[static_cast<std::size_t>(i)].sample->label;
      b.is_anchor[static_cast<std::size_t>(v)] = !drawn[static_cast<std::size_t>(i)].is_buffer;
    }
  }
  b.view_pair.resize(static_cast<std::size_t>(2 * n));
  for (int i = 0; i < n; ++i) {
    b.view_pair[static_cast<std::size_t>(i)] = i + n;
    b.view_pair[static_cast<std::size_t>(i + n)] = i;
  }
  return b;
}

Matrix stack_inputs(const std::vector<Sample>& samples) {
  if (samples.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(samples.size()), samples.front().x.size());
  for (std::size_t i = 0; i < samples.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = samples[i].x.transpose();
  return m;
}

}  // namespace ncl
