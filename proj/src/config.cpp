#include "ncl/config.hpp"

#include "ncl/errors.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace ncl {

namespace {

using nlohmann::json;
using Path = std::vector<std::string>;

std::string join(const Path& path) {
  if (path.empty()) return "<root>";
  std::string out;
  for (const auto& p : path) out += (out.empty() ? "" : ".") + p;
  return out;
}

/// Locates keys in the raw text so diagnostics can name a line.
class Reader {
 public:
  Reader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  int line_at(std::size_t offset) const {
    offset = std::min(offset, text_.size());
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
  }

  /// Line of the deepest key of `path` that can be found, searching each key after its parent.
  int line_of(const Path& path) const {
    std::size_t pos = 0;
    bool found_any = false;
    for (const auto& key : path) {
      const auto at = text_.find("\"" + key + "\"", pos);
      if (at == std::string::npos) break;
      pos = at;
      found_any = true;
    }
    return found_any ? line_at(pos) : 1;
  }

  [[noreturn]] void fail(const Path& path, const std::string& reason) const {
    throw ConfigError(source_ + ":" + std::to_string(line_of(path)) + ": " + join(path) + ": " + reason);
  }

  [[noreturn]] void fail_at_offset(std::size_t offset, const std::string& reason) const {
    throw ConfigError(source_ + ":" + std::to_string(line_at(offset)) + ": " + reason);
  }

  void require_object(const json& j, const Path& path) const {
    if (!j.is_object()) fail(path, "expected an object");
  }

  void check_keys(const json& obj, const Path& path, const std::set<std::string>& allowed) const {
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!allowed.contains(it.key())) {
        Path p = path;
        p.push_back(it.key());
        fail(p, "unknown key");
      }
  }

  void run(const Path& path, const std::function<void()>& check) const {
    try {
      check();
    } catch (const ConfigError& e) {
      fail(path, e.what());
    }
  }

  template <typename T>
  void read(const json& obj, const Path& parent, const char* key, T& out) const {
    if (!obj.contains(key)) return;
    Path path = parent;
    path.push_back(key);
    const json& v = obj.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(path, "expected a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(path, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned() || v.get<long long>() >= 0)
          out = v.get<T>();
        else
          fail(path, "expected a non-negative integer");
      } else {
        out = v.get<T>();
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(path, "expected a number");
      out = v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(path, "expected a string");
      out = v.get<std::string>();
    } else {
      static_assert(sizeof(T) == 0, "unsupported config field type");
    }
  }

  template <typename E>
  void read_enum(const json& obj, const Path& parent, const char* key, E& out, E (*from)(const std::string&)) const {
    std::string s;
    if (!obj.contains(key)) return;
    read(obj, parent, key, s);
    Path path = parent;
    path.push_back(key);
    run(path, [&] { out = from(s); });
  }

 private:
  const std::string& text_;
  std::string source_;
};

void parse_stream(const Reader& r, const json& j, ExperimentConfig& cfg) {
  const Path path{"stream"};
  r.require_object(j, path);
  r.check_keys(j, path,
               {"csv", "scenario", "tasks", "classes_per_task", "samples_per_class", "input_dim", "cluster_spread",
                "mean_rank", "seed"});
  auto& s = cfg.stream;
  if (j.contains("csv")) {
    std::string csv;
    r.read(j, path, "csv", csv);
    s.csv = csv;
  }
  r.read_enum(j, path, "scenario", s.scenario, scenario_from_string);
  if (!s.csv)
    for (const char* key : {"tasks", "classes_per_task", "samples_per_class", "input_dim"})
      if (!j.contains(key)) r.fail({"stream", key}, "missing required field (or give stream.csv)");
  r.read(j, path, "tasks", s.synthetic.tasks);
  r.read(j, path, "classes_per_task", s.synthetic.classes_per_task);
  r.read(j, path, "samples_per_class", s.synthetic.samples_per_class);
  r.read(j, path, "input_dim", s.synthetic.input_dim);
  r.read(j, path, "cluster_spread", s.synthetic.cluster_spread);
  r.read(j, path, "mean_rank", s.synthetic.mean_rank);
  if (j.contains("seed")) {
    std::uint64_t seed = 0;
    r.read(j, path, "seed", seed);
    s.data_seed = seed;
  }
  s.synthetic.scenario = s.scenario;
  if (!s.csv) {
    const auto& sc = s.synthetic;
    if (sc.tasks < 1) r.fail({"stream", "tasks"}, "must be >= 1");
    if (sc.classes_per_task < 1) r.fail({"stream", "classes_per_task"}, "must be >= 1");
    if (sc.samples_per_class < 2) r.fail({"stream", "samples_per_class"}, "must be >= 2");
    if (sc.input_dim < 2) r.fail({"stream", "input_dim"}, "must be >= 2");
    if (!(sc.cluster_spread >= 0)) r.fail({"stream", "cluster_spread"}, "must be >= 0");
    if (sc.mean_rank < 0 || sc.mean_rank > sc.input_dim) r.fail({"stream", "mean_rank"}, "must lie in [0, input_dim]");
  }
}

void parse_augment(const Reader& r, const json& j, AugmentConfig& a) {
  const Path path{"augment"};
  r.require_object(j, path);
  r.check_keys(j, path, {"noise_std", "scale_jitter", "rotation", "max_rotation"});
  r.read(j, path, "noise_std", a.noise_std);
  if (j.contains("scale_jitter")) {
    const json& s = j.at("scale_jitter");
    if (!s.is_array() || s.size() != 2 || !s[0].is_number() || !s[1].is_number())
      r.fail({"augment", "scale_jitter"}, "expected [lo, hi]");
    a.scale_lo = s[0].get<double>();
    a.scale_hi = s[1].get<double>();
  }
  r.read(j, path, "rotation", a.rotation);
  r.read(j, path, "max_rotation", a.max_rotation);
  r.run(path, [&] { a.validate(); });
}

void parse_model(const Reader& r, const json& j, ModelConfig& m) {
  const Path path{"model"};
  r.require_object(j, path);
  r.check_keys(j, path, {"hidden", "embedding_dim"});
  if (j.contains("hidden")) {
    const json& h = j.at("hidden");
    if (!h.is_array() || h.empty()) r.fail({"model", "hidden"}, "expected a non-empty array of layer sizes");
    m.hidden.clear();
    for (const auto& v : h) {
      if (!v.is_number_integer() || v.get<long long>() < 1) r.fail({"model", "hidden"}, "layer sizes must be integers >= 1");
      m.hidden.push_back(v.get<int>());
    }
  }
  r.read(j, path, "embedding_dim", m.embedding_dim);
  if (m.embedding_dim < 1) r.fail({"model", "embedding_dim"}, "must be >= 1");
}

void parse_train(const Reader& r, const json& j, TrainConfig& t) {
  const Path path{"train"};
  r.require_object(j, path);
  r.check_keys(j, path,
               {"epochs_first_task", "epochs_later", "batch_size", "lr", "momentum", "tau", "gamma", "kappa_past",
                "kappa_current", "zeta_past", "zeta_current", "warmup_epochs", "buffer", "probe_epochs", "probe_lr",
                "probe_batch_size", "classifier", "probe_features", "skip_degenerate_anchors", "track_nc"});
  r.read(j, path, "epochs_first_task", t.epochs_first_task);
  r.read(j, path, "epochs_later", t.epochs_later);
  r.read(j, path, "batch_size", t.batch_size);
  r.read(j, path, "lr", t.lr);
  r.read(j, path, "momentum", t.momentum);
  r.read(j, path, "tau", t.plasticity.tau);
  r.read(j, path, "gamma", t.plasticity.gamma);
  r.read(j, path, "kappa_past", t.distill.kappa_past);
  r.read(j, path, "kappa_current", t.distill.kappa_current);
  r.read(j, path, "zeta_past", t.distill.zeta_past);
  r.read(j, path, "zeta_current", t.distill.zeta_current);
  t.distill.warmup_epochs = static_cast<int>(std::lround(0.3 * t.epochs_later));
  r.read(j, path, "warmup_epochs", t.distill.warmup_epochs);
  r.read(j, path, "buffer", t.buffer_capacity);
  r.read(j, path, "probe_epochs", t.probe_epochs);
  r.read(j, path, "probe_lr", t.probe_lr);
  r.read(j, path, "probe_batch_size", t.probe_batch_size);
  r.read_enum(j, path, "classifier", t.classifier, classifier_from_string);
  r.read_enum(j, path, "probe_features", t.probe_features, feature_source_from_string);
  r.read(j, path, "skip_degenerate_anchors", t.skip_degenerate_anchors);
  r.read(j, path, "track_nc", t.track_nc);
}

void parse_ablation(const Reader& r, const json& j, TrainConfig& t) {
  const Path path{"ablation"};
  r.require_object(j, path);
  r.check_keys(j, path, {"plasticity", "stability", "pseudo_replay"});
  r.read_enum(j, path, "plasticity", t.plasticity_loss, plasticity_from_string);
  r.read_enum(j, path, "stability", t.stability_loss, stability_from_string);
  r.read(j, path, "pseudo_replay", t.pseudo_replay);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  train.validate();
}

ExperimentConfig parse_config(const std::string& text, const std::string& source_name) {
  const Reader r(text, source_name);
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    r.fail_at_offset(e.byte > 0 ? e.byte - 1 : 0, std::string("malformed JSON: ") + e.what());
  }
  r.require_object(root, {});
  r.check_keys(root, {}, {"seeds", "output_dir", "stream", "augment", "model", "train", "ablation"});

  ExperimentConfig cfg;
  if (!root.contains("seeds")) r.fail({"seeds"}, "missing required field");
  const json& seeds = root.at("seeds");
  if (!seeds.is_array() || seeds.empty()) r.fail({"seeds"}, "expected a non-empty array of non-negative integers");
  for (const auto& s : seeds) {
    if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<long long>() < 0))
      r.fail({"seeds"}, "expected a non-empty array of non-negative integers");
    cfg.seeds.push_back(s.get<std::uint64_t>());
  }
  if (root.contains("output_dir")) {
    std::string dir;
    r.read(root, {}, "output_dir", dir);
    cfg.output_dir = dir;
  }
  if (!root.contains("stream")) r.fail({"stream"}, "missing required field");
  parse_stream(r, root.at("stream"), cfg);
  if (root.contains("augment")) parse_augment(r, root.at("augment"), cfg.train.augment);
  if (root.contains("model")) parse_model(r, root.at("model"), cfg.train.model);
  if (root.contains("train")) parse_train(r, root.at("train"), cfg.train);
  if (root.contains("ablation")) parse_ablation(r, root.at("ablation"), cfg.train);

  const auto& t = cfg.train;
  if (t.plasticity_loss == PlasticityLoss::supcon_asym &&
      (t.stability_loss == StabilityLoss::sprd || t.stability_loss == StabilityLoss::hsd))
    r.fail({"ablation", "stability"}, "supcon-asym has no prototypes, so sprd/hsd cannot be used with it");
  if (t.distill.warmup_epochs < 0 || t.distill.warmup_epochs > t.epochs_later)
    r.fail({"train", "warmup_epochs"}, "must satisfy 0 <= warmup_epochs <= epochs_later");
  r.run({"train"}, [&] { cfg.validate(); });
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir.string();
  auto& s = j["stream"];
  if (cfg.stream.csv) s["csv"] = cfg.stream.csv->string();
  s["scenario"] = to_string(cfg.stream.scenario);
  s["tasks"] = cfg.stream.synthetic.tasks;
  s["classes_per_task"] = cfg.stream.synthetic.classes_per_task;
  s["samples_per_class"] = cfg.stream.synthetic.samples_per_class;
  s["input_dim"] = cfg.stream.synthetic.input_dim;
  s["cluster_spread"] = cfg.stream.synthetic.cluster_spread;
  s["mean_rank"] = cfg.stream.synthetic.mean_rank;
  if (cfg.stream.data_seed) s["seed"] = *cfg.stream.data_seed;

  const auto& t = cfg.train;
  auto& a = j["augment"];
  a["noise_std"] = t.augment.noise_std;
  a["scale_jitter"] = {t.augment.scale_lo, t.augment.scale_hi};
  a["rotation"] = t.augment.rotation;
  a["max_rotation"] = t.augment.max_rotation;

  j["model"]["hidden"] = t.model.hidden;
  j["model"]["embedding_dim"] = t.model.embedding_dim;

  auto& tr = j["train"];
  tr["epochs_first_task"] = t.epochs_first_task;
  tr["epochs_later"] = t.epochs_later;
  tr["batch_size"] = t.batch_size;
  tr["lr"] = t.lr;
  tr["momentum"] = t.momentum;
  tr["tau"] = t.plasticity.tau;
  tr["gamma"] = t.plasticity.gamma;
  tr["kappa_past"] = t.distill.kappa_past;
  tr["kappa_current"] = t.distill.kappa_current;
  tr["zeta_past"] = t.distill.zeta_past;
  tr["zeta_current"] = t.distill.zeta_current;
  tr["warmup_epochs"] = t.distill.warmup_epochs;
  tr["buffer"] = t.buffer_capacity;
  tr["probe_epochs"] = t.probe_epochs;
  tr["probe_lr"] = t.probe_lr;
  tr["probe_batch_size"] = t.probe_batch_size;
  tr["classifier"] = to_string(t.classifier);
  tr["probe_features"] = to_string(t.probe_features);
  tr["skip_degenerate_anchors"] = t.skip_degenerate_anchors;
  tr["track_nc"] = t.track_nc;

  auto& ab = j["ablation"];
  ab["plasticity"] = to_string(t.plasticity_loss);
  ab["stability"] = to_string(t.stability_loss);
  ab["pseudo_replay"] = t.pseudo_replay;
  return j;
}

std::string serialize_config(const ExperimentConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

TrainConfig train_config_for_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrainConfig t = cfg.train;
  t.seed = seed;
  return t;
}

TaskStream build_stream(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.stream.csv) return load_csv_stream(*cfg.stream.csv, cfg.stream.scenario);
  SyntheticStreamConfig s = cfg.stream.synthetic;
  s.scenario = cfg.stream.scenario;
  s.seed = cfg.stream.data_seed.value_or(seed);
  return make_synthetic_stream(s);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  auto parse_one = [&](const std::string& s) -> std::uint64_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("--seeds: '" + s + "' is not a non-negative integer");
    return std::stoull(s);
  };
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(parse_one(item));
    } else {
      const auto lo = parse_one(item.substr(0, dash));
      const auto hi = parse_one(item.substr(dash + 1));
      if (hi < lo) throw ConfigError("--seeds: empty range '" + item + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    }
  }
  if (out.empty()) throw ConfigError("--seeds: no seeds given");
  return out;
}

}  // namespace ncl
