#include "ncl/experiment.hpp"

#include "ncl/errors.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace ncl {

namespace {

using nlohmann::json;

bool valid_cell(const AblationCell& c) {
  return !(c.plasticity == PlasticityLoss::supcon_asym &&
           (c.stability == StabilityLoss::sprd || c.stability == StabilityLoss::hsd));
}

std::string slug(const AblationCell& c) {
  return to_string(c.plasticity) + "_" + to_string(c.stability) + "_pr-" + (c.pseudo_replay ? "on" : "off") + "_buf" +
         std::to_string(c.buffer);
}

AblationCell cell_from_json(const json& j, const AblationCell& base) {
  if (!j.is_object()) throw ConfigError("grid: each cell must be an object");
  AblationCell c = base;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "plasticity")
      c.plasticity = plasticity_from_string(it->get<std::string>());
    else if (k == "stability")
      c.stability = stability_from_string(it->get<std::string>());
    else if (k == "pseudo_replay")
      c.pseudo_replay = it->get<bool>();
    else if (k == "buffer")
      c.buffer = it->get<std::size_t>();
    else
      throw ConfigError("grid: unknown cell key '" + k + "'");
  }
  return c;
}

template <typename T, typename F>
std::vector<T> axis(const json& j, const char* key, T fallback, F convert) {
  if (!j.contains(key)) return {fallback};
  const json& a = j.at(key);
  if (!a.is_array()) throw ConfigError(std::string("grid: axis '") + key + "' must be an array");
  std::vector<T> out;
  for (const auto& v : a) out.push_back(convert(v));
  return out;
}

void write_seed_files(const MetricsReport& r, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  const std::string s = std::to_string(r.seed);
  write_report_json(r, cfg, dir / ("report_" + s + ".json"));
  write_losses_csv(r, dir / ("losses_" + s + ".csv"));
  write_accuracy_csv(r, dir / ("accuracy_" + s + ".csv"));
}

}  // namespace

ExperimentConfig apply_options(ExperimentConfig cfg, const RunOptions& opts) {
  if (opts.out) cfg.output_dir = *opts.out;
  if (opts.seeds) cfg.seeds = *opts.seeds;
  if (opts.dump_relations) cfg.train.relation_dump_dir = cfg.output_dir / "relations";
  if (opts.checkpoints) cfg.train.checkpoint_dir = cfg.output_dir / "checkpoints";
  if (opts.dump_buffer) cfg.train.buffer_dump_dir = cfg.output_dir / "buffer";
  cfg.validate();
  return cfg;
}

CellResult run_cell(const ExperimentConfig& base, const AblationCell& cell,
                    const std::optional<std::filesystem::path>& out_dir) {
  ExperimentConfig cfg = base;
  cell.apply(cfg.train);
  cfg.validate();
  CellResult result;
  result.cell = cell;
  std::vector<SeedResult> seeds;
  for (std::uint64_t seed : cfg.seeds) {
    const TaskStream stream = build_stream(cfg, seed);
    MetricsReport r = run_experiment(train_config_for_seed(cfg, seed), stream);
    if (out_dir) write_seed_files(r, cfg, *out_dir);
    seeds.push_back({seed, r.average_accuracy, r.average_forgetting});
    result.reports.push_back(std::move(r));
  }
  result.summary = summarize(cell, seeds);
  return result;
}

std::vector<AblationCell> parse_grid(const std::string& spec, const TrainConfig& base_cfg, std::ostream& warn) {
  const AblationCell base = AblationCell::of(base_cfg);
  std::vector<AblationCell> cells;
  if (spec == "plasticity-stability") {
    const std::pair<PlasticityLoss, StabilityLoss> rows[] = {
        {PlasticityLoss::fnc2, StabilityLoss::none},
        {PlasticityLoss::supcon_asym, StabilityLoss::none},
        {PlasticityLoss::supcon_asym, StabilityLoss::ird},
        {PlasticityLoss::fnc2, StabilityLoss::ird},
        {PlasticityLoss::fnc2, StabilityLoss::hsd},
    };
    for (const auto& [p, s] : rows) cells.push_back({p, s, base.pseudo_replay, base.buffer});
  } else if (spec == "pseudo-replay") {
    for (std::size_t buffer : {std::size_t{0}, std::size_t{200}})
      for (bool pr : {false, true}) cells.push_back({base.plasticity, base.stability, pr, buffer});
  } else {
    json j;
    try {
      j = json::parse(spec);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("grid: malformed JSON: ") + e.what());
    }
    try {
      if (j.is_object() && j.contains("cells")) {
        if (j.size() != 1) throw ConfigError("grid: 'cells' cannot be mixed with axes");
        if (!j.at("cells").is_array()) throw ConfigError("grid: 'cells' must be an array");
        for (const auto& c : j.at("cells")) {
          const AblationCell cell = cell_from_json(c, base);
          if (!valid_cell(cell)) throw ConfigError("grid: invalid cell " + cell.describe());
          cells.push_back(cell);
        }
      } else if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it)
          if (it.key() != "plasticity" && it.key() != "stability" && it.key() != "pseudo_replay" &&
              it.key() != "buffer")
            throw ConfigError("grid: unknown axis '" + it.key() + "'");
        const auto ps = axis(j, "plasticity", base.plasticity,
                             [](const json& v) { return plasticity_from_string(v.get<std::string>()); });
        const auto ss = axis(j, "stability", base.stability,
                             [](const json& v) { return stability_from_string(v.get<std::string>()); });
        const auto rs = axis(j, "pseudo_replay", base.pseudo_replay, [](const json& v) { return v.get<bool>(); });
        const auto bs = axis(j, "buffer", base.buffer, [](const json& v) { return v.get<std::size_t>(); });
        for (auto p : ps)
          for (auto s : ss)
            for (bool r : rs)
              for (auto b : bs) {
                const AblationCell cell{p, s, r, b};
                if (valid_cell(cell))
                  cells.push_back(cell);
                else
                  warn << "warning: skipping invalid combination " << cell.describe() << '\n';
              }
      } else {
        throw ConfigError("grid: expected a preset name or a JSON object");
      }
    } catch (const json::exception& e) {
      throw ConfigError(std::string("grid: ") + e.what());
    }
  }

  std::vector<AblationCell> unique;
  for (const auto& c : cells) {
    if (std::find(unique.begin(), unique.end(), c) != unique.end())
      warn << "warning: duplicate grid cell " << c.describe() << " removed\n";
    else
      unique.push_back(c);
  }
  if (unique.empty()) throw ConfigError("grid: no cells to run");
  return unique;
}

std::vector<AblationCell> load_grid(const std::string& spec_or_path, const TrainConfig& base, std::ostream& warn) {
  if (spec_or_path.empty()) throw ConfigError("grid: empty grid specification");
  const std::filesystem::path p(spec_or_path);
  if (spec_or_path != "plasticity-stability" && spec_or_path != "pseudo-replay" && std::filesystem::exists(p)) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_grid(ss.str(), base, warn);
  }
  return parse_grid(spec_or_path, base, warn);
}

int cmd_run(const std::filesystem::path& config, const RunOptions& opts, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = apply_options(load_config(config), opts);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  }
  try {
    const CellResult r = run_cell(cfg, AblationCell::of(cfg.train), cfg.output_dir);
    write_summary_csv({r.summary}, cfg.output_dir / "summary.csv");
    print_summary({r.summary}, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int cmd_ablate(const std::filesystem::path& config, const std::string& grid, const RunOptions& opts,
               std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  std::vector<AblationCell> cells;
  try {
    cfg = apply_options(load_config(config), opts);
    cells = load_grid(grid, cfg.train, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  }
  try {
    std::vector<SummaryRow> rows;
    for (const auto& cell : cells) {
      ExperimentConfig cell_cfg = cfg;
      const auto dir = cfg.output_dir / slug(cell);
      if (cfg.train.relation_dump_dir) cell_cfg.train.relation_dump_dir = dir / "relations";
      if (cfg.train.checkpoint_dir) cell_cfg.train.checkpoint_dir = dir / "checkpoints";
      if (cfg.train.buffer_dump_dir) cell_cfg.train.buffer_dump_dir = dir / "buffer";
      rows.push_back(run_cell(cell_cfg, cell, dir).summary);
    }
    write_summary_csv(rows, cfg.output_dir / "summary.csv");
    print_summary(rows, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int cmd_report(const std::filesystem::path& dir, std::ostream& out, std::ostream& err) {
  if (!std::filesystem::is_directory(dir)) {
    err << "error: " << dir.string() << " is not a directory\n";
    return 2;
  }
  try {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (entry.is_regular_file() && name.starts_with("report_") && name.ends_with(".json"))
        files.push_back(entry.path());
    }
    if (files.empty()) {
      err << "error: no report_*.json files under " << dir.string() << '\n';
      return 1;
    }
    std::map<AblationCell, std::vector<SeedResult>> groups;
    for (const auto& f : files) {
      const StoredReport r = read_report_json(f);
      groups[r.cell].push_back(r.result);
    }
    std::vector<SummaryRow> rows;
    for (auto& [cell, results] : groups) {
      std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.seed < b.seed; });
      rows.push_back(summarize(cell, results));
    }
    write_summary_csv(rows, dir / "summary.csv");
    print_summary(rows, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace ncl
