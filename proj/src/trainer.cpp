#include "ncl/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace ncl {

std::string to_string(PlasticityLoss p) { return p == PlasticityLoss::fnc2 ? "fnc2" : "supcon-asym"; }

std::string to_string(StabilityLoss s) {
  switch (s) {
    case StabilityLoss::none: return "none";
    case StabilityLoss::ird: return "ird";
    case StabilityLoss::sprd: return "sprd";
    case StabilityLoss::hsd: return "hsd";
  }
  return "none";
}

std::string to_string(ClassifierMode c) { return c == ClassifierMode::linear_probe ? "linear-probe" : "nc4"; }
std::string to_string(FeatureSource f) { return f == FeatureSource::backbone ? "backbone" : "projector"; }

PlasticityLoss plasticity_from_string(const std::string& s) {
  if (s == "fnc2") return PlasticityLoss::fnc2;
  if (s == "supcon-asym") return PlasticityLoss::supcon_asym;
  throw ConfigError("unknown plasticity loss '" + s + "' (expected fnc2 or supcon-asym)");
}

StabilityLoss stability_from_string(const std::string& s) {
  if (s == "none") return StabilityLoss::none;
  if (s == "ird") return StabilityLoss::ird;
  if (s == "sprd") return StabilityLoss::sprd;
  if (s == "hsd") return StabilityLoss::hsd;
  throw ConfigError("unknown stability loss '" + s + "' (expected none, ird, sprd or hsd)");
}

ClassifierMode classifier_from_string(const std::string& s) {
  if (s == "linear-probe") return ClassifierMode::linear_probe;
  if (s == "nc4") return ClassifierMode::nc4;
  throw ConfigError("unknown classifier '" + s + "' (expected linear-probe or nc4)");
}

FeatureSource feature_source_from_string(const std::string& s) {
  if (s == "backbone") return FeatureSource::backbone;
  if (s == "projector") return FeatureSource::projector;
  throw ConfigError("unknown probe feature source '" + s + "' (expected backbone or projector)");
}

void TrainConfig::validate() const {
  if (model.hidden.empty()) throw ConfigError("model.hidden needs at least one layer");
  for (int h : model.hidden)
    if (h < 1) throw ConfigError("model.hidden sizes must be >= 1");
  if (model.embedding_dim < 1) throw ConfigError("model.embedding_dim must be >= 1");
  augment.validate();
  if (epochs_first_task < 1 || epochs_later < 1) throw ConfigError("epoch counts must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0)) throw ConfigError("lr must be > 0");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must lie in [0, 1)");
  plasticity.validate();
  DistillationConfig d = distill;
  d.epochs = epochs_later;
  d.validate();
  if (probe_epochs < 1) throw ConfigError("probe_epochs must be >= 1");
  if (!(probe_lr > 0)) throw ConfigError("probe_lr must be > 0");
  if (probe_batch_size < 1) throw ConfigError("probe_batch_size must be >= 1");
  if (plasticity_loss == PlasticityLoss::supcon_asym &&
      (stability_loss == StabilityLoss::sprd || stability_loss == StabilityLoss::hsd))
    throw ConfigError("supcon-asym cannot be combined with prototype-relation distillation (sprd/hsd)");
}

LearnerState LearnerState::create(const TrainConfig& cfg, const TaskStream& stream) {
  MlpShape shape;
  shape.backbone_sizes.push_back(stream.input_dim);
  shape.backbone_sizes.insert(shape.backbone_sizes.end(), cfg.model.hidden.begin(), cfg.model.hidden.end());
  shape.output_dim = cfg.model.embedding_dim;
  return LearnerState{
      init_params(shape, cfg.seed),
      generate_etf<double>(stream.num_classes(), cfg.model.embedding_dim, cfg.seed),
      ClassPrototypeMap::from_stream_order(stream.classes_per_task()),
      ReplayBuffer(cfg.buffer_capacity, cfg.seed),
      std::nullopt,
      make_rng(cfg.seed, 0x7EA1),
  };
}

namespace {

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
    out << '\n';
  }
}

std::vector<ClassId> labels_of(const std::vector<Sample>& samples) {
  std::vector<ClassId> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

}  // namespace

TaskOutcome train_task_representation(LearnerState& state, const TaskStream& stream, int t, const TrainConfig& cfg) {
  if (t < 1 || t > stream.num_tasks()) throw ProtocolError("task index out of range");
  if (t >= 2 && (!state.teacher || state.teacher->task() != t - 1))
    throw ProtocolError("task " + std::to_string(t) + " needs the frozen model of task " + std::to_string(t - 1));

  const TaskDataset& task = stream.task(t);
  const int epochs = t == 1 ? cfg.epochs_first_task : cfg.epochs_later;
  DistillationConfig distill = cfg.distill;
  distill.epochs = epochs;
  distill.warmup_epochs = std::min(distill.warmup_epochs, epochs);

  const Eigen::Index dim = state.prototypes.dim();
  const Matrix old_prototypes = cfg.pseudo_replay ? state.prototypes.rows(state.map.vertices_through(t - 1)) : Matrix(0, dim);
  const Matrix seen_prototypes = state.prototypes.rows(state.map.vertices_through(t));
  const bool distilling = t >= 2 && cfg.stability_loss != StabilityLoss::none;
  const ContrastiveOptions opts{cfg.skip_degenerate_anchors};

  TaskOutcome outcome{snapshot(state.params, t), {}, {}};
  SgdMomentum opt(cfg.lr, cfg.momentum);
  Matrix last_z;
  Matrix last_past_z;

  for (int e = 1; e <= epochs; ++e) {
    EpochTrace trace;
    trace.task = t;
    trace.epoch = e;
    trace.alpha = distilling && cfg.stability_loss == StabilityLoss::hsd ? alpha_schedule(e, distill) : 0.0;
    double views = 0;

    TaskBatcher batcher(task, state.buffer, cfg.batch_size, cfg.augment, state.rng);
    while (auto vb = batcher.next()) {
      ForwardPass pass = forward(state.params, vb->inputs);
      EmbeddingBatch<double> batch{pass.embeddings, vb->labels, vb->view_pair, vb->is_anchor};
      const double m = static_cast<double>(batch.size());

      LossOutput<double> plastic =
          cfg.plasticity_loss == PlasticityLoss::fnc2
              ? fnc2_loss(batch, state.prototypes, state.map, old_prototypes, cfg.plasticity, opts)
              : supcon_loss(batch, cfg.plasticity.tau, opts);
      ++outcome.stats.plasticity_calls;
      outcome.stats.anchors_r_above_one += plastic.anchors_r_above_one;
      Matrix grad = plastic.grad_z;
      double stability = 0;

      if (distilling) {
        const Matrix past_z = embed(state.teacher->params(), vb->inputs);
        ++outcome.stats.teacher_forwards;
        switch (cfg.stability_loss) {
          case StabilityLoss::ird: {
            const auto out = ird_loss(batch, past_z, distill);
            ++outcome.stats.ird_calls;
            stability = out.value;
            trace.ird += out.value;
            grad += out.grad_z;
            break;
          }
          case StabilityLoss::sprd: {
            const auto out = sprd_loss(batch, past_z, seen_prototypes, distill);
            ++outcome.stats.sprd_calls;
            stability = out.value;
            trace.sprd += out.value;
            grad += out.grad_z;
            break;
          }
          case StabilityLoss::hsd: {
            const auto out = hsd_loss(batch, past_z, seen_prototypes, distill, e);
            ++outcome.stats.ird_calls;
            ++outcome.stats.sprd_calls;
            stability = out.value;
            trace.ird += out.ird;
            trace.sprd += out.sprd;
            grad += out.grad_z;
            break;
          }
          case StabilityLoss::none: break;
        }
        last_past_z = past_z;
      }

      trace.fnc2 += plastic.value;
      trace.stability += stability;
      trace.total += plastic.value + stability;
      views += m;
      last_z = batch.z;

      // The optimized objective is the per-view mean of the summed losses.
      grad /= m;
      backward_and_step(state.params, pass.cache, grad, opt);
    }

    for (double* v : {&trace.fnc2, &trace.ird, &trace.sprd, &trace.stability, &trace.total}) *v /= views;
    if (cfg.track_nc) {
      const Matrix z = embed(state.params, stack_inputs(task.train));
      const auto labels = labels_of(task.train);
      const auto nc = nc_diagnostics<double>(z, labels, state.prototypes, state.map);
      trace.nc1 = nc.nc1_score;
      trace.nc2 = nc.nc2_score;
    }
    outcome.epochs.push_back(trace);
  }

  if (cfg.relation_dump_dir && last_z.rows() > 0) {
    const auto& dir = *cfg.relation_dump_dir;
    std::filesystem::create_directories(dir);
    const std::string tag = "seed" + std::to_string(cfg.seed) + "_task" + std::to_string(t);
    write_matrix_csv(dir / ("o_current_" + tag + ".csv"),
                     instance_relations<double>(last_z, distill.kappa_current));
    write_matrix_csv(dir / ("q_current_" + tag + ".csv"),
                     prototype_relations<double>(last_z, seen_prototypes, distill.zeta_current));
    if (last_past_z.rows() > 0) {
      write_matrix_csv(dir / ("o_past_" + tag + ".csv"), instance_relations<double>(last_past_z, distill.kappa_past));
      write_matrix_csv(dir / ("q_past_" + tag + ".csv"),
                       prototype_relations<double>(last_past_z, seen_prototypes, distill.zeta_past));
    }
  }

  // Offer this task's samples to the reservoir once, in a seeded random order.
  std::vector<std::size_t> order(task.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), state.rng);
  for (std::size_t i : order) state.buffer.insert(task.train[i]);

  outcome.snapshot = snapshot(state.params, t);
  return outcome;
}

Vector LinearProbe::logits(const Vector& feature) const { return weight * feature + bias; }

ClassId LinearProbe::predict(const Vector& feature, const std::vector<ClassId>& candidates) const {
  const Vector s = logits(feature);
  std::vector<std::size_t> order(classes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return classes[a] < classes[b]; });
  std::optional<std::size_t> best;
  for (std::size_t c : order) {
    if (!candidates.empty() && std::find(candidates.begin(), candidates.end(), classes[c]) == candidates.end())
      continue;
    if (!best || s(static_cast<Eigen::Index>(c)) > s(static_cast<Eigen::Index>(*best))) best = c;
  }
  if (!best) throw ProtocolError("probe: no candidate class is known to the probe");
  return classes[*best];
}

LinearProbe train_linear_probe(const MlpParams& frozen, const TaskDataset& current, const ReplayBuffer& buffer,
                               const std::vector<ClassId>& seen_classes, const TrainConfig& cfg, Rng& rng) {
  std::vector<const Sample*> samples;
  for (const auto& s : current.train) samples.push_back(&s);
  for (const auto& s : buffer.entries())
    if (s.task != current.task) samples.push_back(&s);  // current samples are already included
  if (samples.empty()) throw ProtocolError("probe: no training samples");
  if (seen_classes.empty()) throw ProtocolError("probe: no classes");

  LinearProbe probe;
  probe.classes = seen_classes;
  std::vector<int> target;
  for (const Sample* s : samples) {
    auto it = std::find(seen_classes.begin(), seen_classes.end(), s->label);
    if (it == seen_classes.end()) throw ProtocolError("probe: sample label outside the seen classes");
    target.push_back(static_cast<int>(it - seen_classes.begin()));
  }

  Matrix x(static_cast<Eigen::Index>(samples.size()), samples.front()->x.size());
  for (std::size_t i = 0; i < samples.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = samples[i]->x.transpose();
  const Matrix feats = features(frozen, x, cfg.probe_features);

  const auto num_classes = static_cast<Eigen::Index>(seen_classes.size());
  probe.weight = Matrix::Zero(num_classes, feats.cols());
  probe.bias = Vector::Zero(num_classes);
  Matrix vel_w = probe.weight;
  Vector vel_b = probe.bias;
  constexpr double kProbeMomentum = 0.9;

  std::vector<Eigen::Index> order(samples.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (int epoch = 0; epoch < cfg.probe_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.probe_batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.probe_batch_size));
      const auto b = static_cast<Eigen::Index>(end - start);
      Matrix fb(b, feats.cols());
      for (Eigen::Index i = 0; i < b; ++i) fb.row(i) = feats.row(order[start + static_cast<std::size_t>(i)]);
      Matrix scores = (fb * probe.weight.transpose()).rowwise() + probe.bias.transpose();
      for (Eigen::Index i = 0; i < b; ++i) {
        const double mx = scores.row(i).maxCoeff();
        scores.row(i) = (scores.row(i).array() - mx).exp().matrix();
        scores.row(i) /= scores.row(i).sum();
        scores(i, target[static_cast<std::size_t>(order[start + static_cast<std::size_t>(i)])]) -= 1.0;
      }
      scores /= static_cast<double>(b);
      vel_w = kProbeMomentum * vel_w + scores.transpose() * fb;
      vel_b = kProbeMomentum * vel_b + scores.colwise().sum().transpose();
      probe.weight -= cfg.probe_lr * vel_w;
      probe.bias -= cfg.probe_lr * vel_b;
    }
  }
  return probe;
}

ClassId nearest_prototype_class(const Vector& z, const PrototypeSet<double>& prototypes,
                                const ClassPrototypeMap& map, const std::vector<ClassId>& candidates) {
  if (candidates.empty()) throw ProtocolError("nc4: no classes seen");
  std::vector<ClassId> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  ClassId best = sorted.front();
  double best_score = prototype_for_class(map, prototypes, best).dot(z.transpose());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const double s = prototype_for_class(map, prototypes, sorted[i]).dot(z.transpose());
    if (s > best_score) {
      best_score = s;
      best = sorted[i];
    }
  }
  return best;
}

ClassId nc4_classify(const MlpParams& frozen, const Vector& x, const PrototypeSet<double>& prototypes,
                     const ClassPrototypeMap& map, const std::vector<ClassId>& candidates) {
  if (candidates.empty()) throw ProtocolError("nc4: no classes seen");
  const Matrix z = embed(frozen, x.transpose());
  return nearest_prototype_class(z.row(0).transpose(), prototypes, map, candidates);
}

namespace {

double evaluate_task(const LearnerState& state, const TaskStream& stream, int trained_through, int k,
                     const TrainConfig& cfg, const LinearProbe* probe) {
  const TaskDataset& task = stream.task(k);
  if (task.test.empty()) throw ProtocolError("task " + std::to_string(k) + " has no test samples");
  const std::vector<ClassId> candidates =
      stream.task_id_available_at_test() ? task.classes : state.map.classes_through(trained_through);
  const Matrix x = stack_inputs(task.test);

  std::size_t correct = 0;
  if (cfg.classifier == ClassifierMode::nc4) {
    const Matrix z = embed(state.params, x);
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      correct += nearest_prototype_class(z.row(i).transpose(), state.prototypes, state.map, candidates) ==
                 task.test[static_cast<std::size_t>(i)].label;
  } else {
    const Matrix f = features(state.params, x, cfg.probe_features);
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      correct += probe->predict(f.row(i).transpose(), candidates) == task.test[static_cast<std::size_t>(i)].label;
  }
  return static_cast<double>(correct) / static_cast<double>(task.test.size());
}

std::optional<NcSummary> test_collapse(const LearnerState& state, const TaskStream& stream, int t) {
  std::vector<Sample> pooled;
  for (int k = 1; k <= t; ++k) pooled.insert(pooled.end(), stream.task(k).test.begin(), stream.task(k).test.end());
  if (pooled.empty()) return std::nullopt;
  const Matrix z = embed(state.params, stack_inputs(pooled));
  const auto labels = labels_of(pooled);
  try {
    const auto r = nc_diagnostics<double>(z, labels, state.prototypes, state.map);
    NcSummary s;
    s.after_task = t;
    s.classes = r.classes;
    s.within_traces.assign(r.within_traces.data(), r.within_traces.data() + r.within_traces.size());
    s.between = r.between_mean;
    s.nc1 = r.nc1_score;
    s.nc2 = r.nc2_score;
    return s;
  } catch (const DegenerateClassError&) {
    return std::nullopt;
  }
}

}  // namespace

MetricsReport run_experiment(const TrainConfig& cfg, const TaskStream& stream) {
  cfg.validate();
  stream.validate();
  LearnerState state = LearnerState::create(cfg, stream);

  MetricsReport report;
  report.seed = cfg.seed;
  report.scenario = stream.scenario;
  report.accuracy = AccuracyMatrix(stream.num_tasks());

  for (int t = 1; t <= stream.num_tasks(); ++t) {
    TaskOutcome outcome = train_task_representation(state, stream, t, cfg);
    report.epochs.insert(report.epochs.end(), outcome.epochs.begin(), outcome.epochs.end());
    report.task_stats.push_back(outcome.stats);
    state.teacher = std::move(outcome.snapshot);
    const std::string suffix = "seed" + std::to_string(cfg.seed) + "_task" + std::to_string(t);
    if (cfg.checkpoint_dir) {
      std::filesystem::create_directories(*cfg.checkpoint_dir);
      save_checkpoint(state.params, *cfg.checkpoint_dir / ("checkpoint_" + suffix + ".json"));
    }
    if (cfg.buffer_dump_dir) {
      std::filesystem::create_directories(*cfg.buffer_dump_dir);
      state.buffer.write_csv(*cfg.buffer_dump_dir / ("buffer_" + suffix + ".csv"));
    }

    std::optional<LinearProbe> probe;
    if (cfg.classifier == ClassifierMode::linear_probe) {
      Rng probe_rng = make_rng(cfg.seed, 0x9B0BE000u + static_cast<std::uint64_t>(t));
      probe = train_linear_probe(state.params, stream.task(t), state.buffer, state.map.classes_through(t), cfg,
                                 probe_rng);
    }
    for (int k = 1; k <= t; ++k)
      report.accuracy.set(t, k, evaluate_task(state, stream, t, k, cfg, probe ? &*probe : nullptr));
    if (auto nc = test_collapse(state, stream, t)) report.nc.push_back(std::move(*nc));
  }

  report.average_accuracy = average_accuracy(report.accuracy);
  if (stream.num_tasks() >= 2) report.average_forgetting = average_forgetting(report.accuracy);
  return report;
}

}  // namespace ncl
