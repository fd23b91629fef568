#include "fame/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "fame/landscape.hpp"
#include "fame/nn.hpp"
#include "fame/parallel.hpp"
#include "fame/stats.hpp"
#include "fame/version.hpp"

namespace fame::harness {

namespace {

using nlohmann::json;

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

void write_json_doc(const json& doc, const std::filesystem::path& path) {
  write_text_file(path, doc.dump(2) + "\n");
}

void write_run_sidecar(const std::filesystem::path& outdir, double seconds) {
  json meta;
  meta["wall_clock_seconds"] = seconds;
  meta["written_at_unix"] = static_cast<std::int64_t>(
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count());
  write_json_doc(meta, outdir / "run.meta.json");
}

void emit_record(const RunRecord& record, EmitMode mode,
                 const std::filesystem::path& base, RunOutcome& outcome) {
  if (mode == EmitMode::csv || mode == EmitMode::both) {
    std::filesystem::path p = base;
    p += ".csv";
    emit_csv(record, p);
    outcome.files.push_back(p);
  }
  if (mode == EmitMode::json || mode == EmitMode::both) {
    std::filesystem::path p = base;
    p += ".json";
    emit_json(record, p);
    outcome.files.push_back(p);
  }
}

landscape::Landscape build_surface(const SurfaceSpec& spec) {
  return landscape::Landscape(spec.basins, spec.noise_std, spec.bounds);
}

std::vector<int> network_dims(const ExperimentConfig& cfg) {
  std::vector<int> dims;
  dims.push_back(2);  // every generator produces planar features
  for (int h : cfg.network->hidden) dims.push_back(h);
  dims.push_back(cfg.dataset->num_classes);
  return dims;
}

RunOutcome run_landscape(const ExperimentConfig& cfg);
RunOutcome run_train(const ExperimentConfig& cfg);
RunOutcome run_compare(const ExperimentConfig& cfg);
RunOutcome run_grid(const ExperimentConfig& cfg);

}  // namespace

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
  std::filesystem::path dir = cfg.output_dir;
  if (dir.is_relative()) {
    if (const char* root = std::getenv("FAME_OUTPUT_ROOT")) {
      if (*root != '\0') return std::filesystem::path(root) / dir;
    }
  }
  return dir;
}

RunRecord landscape_trial(const ExperimentConfig& cfg,
                          const optim::OptimizerKind& kind, std::uint64_t seed) {
  auto start = std::chrono::steady_clock::now();
  landscape::Landscape surface = build_surface(*cfg.surface);
  landscape::Trajectory traj = landscape::run_descent(
      surface, kind, cfg.descent->x0, cfg.descent->steps, seed);

  RunRecord record;
  record.artifact_version = kArtifactVersion;
  record.config_echo = config_to_json(cfg);
  record.seed = seed;
  record.diverged = traj.diverged;
  record.columns = {"step", "x", "y", "loss"};
  record.rows.reserve(traj.points.size());
  for (std::size_t t = 0; t < traj.points.size(); ++t) {
    record.rows.push_back({static_cast<double>(t), traj.points[t].x,
                           traj.points[t].y, traj.losses[t]});
  }
  record.summary["terminal_basin"] =
      traj.terminal_basin ? static_cast<double>(*traj.terminal_basin) : -1.0;
  record.summary["final_loss"] = traj.losses.back();
  record.summary["final_x"] = traj.points.back().x;
  record.summary["final_y"] = traj.points.back().y;
  record.summary["steps_recorded"] =
      static_cast<double>(traj.points.size()) - 1.0;
  record.summary["diverged"] = traj.diverged ? 1.0 : 0.0;
  record.wall_clock_seconds = elapsed_seconds(start);
  return record;
}

RunRecord train_trial(const ExperimentConfig& cfg,
                      const optim::OptimizerKind& kind, std::uint64_t seed) {
  auto start = std::chrono::steady_clock::now();
  nn::DatasetPair data = nn::make_dataset(
      cfg.dataset->generator, cfg.dataset->train_size, cfg.dataset->test_size,
      cfg.dataset->noise, cfg.dataset->seed, cfg.dataset->num_classes);
  nn::Network net = nn::Network::random(
      network_dims(cfg), nn::activation_from_string(cfg.network->activation),
      seed);
  nn::TrainOptions opts;
  opts.epochs = cfg.train->epochs;
  opts.batch_size = cfg.train->batch_size;
  opts.seed = seed;
  nn::TrainResult result = nn::train(net, data, kind, opts);

  RunRecord record;
  record.artifact_version = kArtifactVersion;
  record.config_echo = config_to_json(cfg);
  record.seed = seed;
  record.diverged = result.diverged;
  record.columns = {"epoch", "train_loss", "test_acc", "grad_var_last_layer"};
  record.rows.reserve(result.rows.size());
  for (const auto& row : result.rows) {
    record.rows.push_back({static_cast<double>(row.epoch), row.train_loss,
                           row.test_acc, row.grad_var_last_layer});
  }
  record.summary["epochs_completed"] = static_cast<double>(result.rows.size());
  record.summary["diverged"] = result.diverged ? 1.0 : 0.0;
  if (!result.rows.empty()) {
    record.summary["final_test_acc"] = result.rows.back().test_acc;
    record.summary["final_train_loss"] = result.rows.back().train_loss;
    stats::VarianceRatio ratio = stats::grad_variance_ratio(
        result.rows.front().grad_var_last_layer,
        result.rows.back().grad_var_last_layer);
    record.summary["grad_var_first_epoch"] = ratio.first_epoch_var;
    record.summary["grad_var_last_epoch"] = ratio.last_epoch_var;
    record.summary["grad_var_ratio"] = ratio.ratio;
    record.summary["grad_var_ratio_degenerate"] = ratio.degenerate ? 1.0 : 0.0;
  } else {
    record.summary["final_test_acc"] = 0.0;
    record.summary["final_train_loss"] = 0.0;
    record.summary["grad_var_first_epoch"] = 0.0;
    record.summary["grad_var_last_epoch"] = 0.0;
    record.summary["grad_var_ratio"] = 0.0;
    record.summary["grad_var_ratio_degenerate"] = 1.0;
  }
  record.wall_clock_seconds = elapsed_seconds(start);
  return record;
}

namespace {

RunOutcome run_landscape(const ExperimentConfig& cfg) {
  auto start = std::chrono::steady_clock::now();
  RunOutcome outcome;
  std::filesystem::path outdir = resolve_output_dir(cfg);
  std::filesystem::create_directories(outdir);

  const std::size_t n_opt = cfg.optimizers.size();
  const std::size_t n_seed = cfg.seeds.size();
  std::vector<RunRecord> records(n_opt * n_seed);
  parallel_for(records.size(), cfg.threads, [&](std::size_t idx) {
    std::size_t oi = idx / n_seed;
    std::size_t si = idx % n_seed;
    records[idx] = landscape_trial(cfg, cfg.optimizers[oi].kind, cfg.seeds[si]);
  });

  json trials = json::array();
  json basin_counts = json::object();
  bool any_diverged = false;
  for (std::size_t oi = 0; oi < n_opt; ++oi) {
    const std::string& label = cfg.optimizers[oi].label;
    json counts = json::object();
    for (std::size_t si = 0; si < n_seed; ++si) {
      const RunRecord& record = records[oi * n_seed + si];
      emit_record(record, cfg.emit,
                  outdir / ("traj_" + label + "_s" + std::to_string(cfg.seeds[si])),
                  outcome);
      any_diverged = any_diverged || record.diverged;
      json trial;
      trial["optimizer"] = label;
      trial["seed"] = cfg.seeds[si];
      double basin = record.summary.at("terminal_basin");
      trial["terminal_basin"] = static_cast<int>(basin);
      trial["final_loss"] = record.summary.at("final_loss");
      trial["diverged"] = record.diverged;
      trials.push_back(trial);
      std::string key =
          basin < 0.0 ? "none" : std::to_string(static_cast<int>(basin));
      counts[key] = counts.value(key, 0) + 1;
    }
    basin_counts[label] = counts;
  }

  json summary;
  summary["artifact_version"] = kArtifactVersion;
  summary["config_echo"] = config_to_json(cfg);
  summary["trials"] = trials;
  summary["basin_counts"] = basin_counts;
  std::filesystem::path summary_path = outdir / "summary.json";
  write_json_doc(summary, summary_path);
  outcome.files.push_back(summary_path);
  write_run_sidecar(outdir, elapsed_seconds(start));

  if (any_diverged) {
    outcome.exit_code = 1;
    outcome.message = "one or more trajectories diverged; records truncated";
  }
  return outcome;
}

json aggregates_to_json(const std::map<std::string, stats::MetricSummary>& aggs) {
  json out;
  for (const auto& [name, s] : aggs) {
    out[name] = {{"mean", s.mean},
                 {"stddev", s.stddev},
                 {"n", s.n},
                 {"single_trial", s.single_trial}};
  }
  return out;
}

std::map<std::string, double> trial_metrics(const RunRecord& record) {
  return {{"final_test_acc", record.summary.at("final_test_acc")},
          {"final_train_loss", record.summary.at("final_train_loss")}};
}

json trial_row(const std::string& label, const RunRecord& record) {
  json trial;
  trial["optimizer"] = label;
  trial["seed"] = record.seed;
  trial["final_test_acc"] = record.summary.at("final_test_acc");
  trial["final_train_loss"] = record.summary.at("final_train_loss");
  trial["epochs_completed"] = record.summary.at("epochs_completed");
  trial["diverged"] = record.diverged;
  return trial;
}

RunOutcome run_train(const ExperimentConfig& cfg) {
  auto start = std::chrono::steady_clock::now();
  RunOutcome outcome;
  std::filesystem::path outdir = resolve_output_dir(cfg);
  std::filesystem::create_directories(outdir);

  const std::string& label = cfg.optimizers[0].label;
  std::vector<RunRecord> records(cfg.seeds.size());
  parallel_for(records.size(), cfg.threads, [&](std::size_t si) {
    records[si] = train_trial(cfg, cfg.optimizers[0].kind, cfg.seeds[si]);
  });

  json trials = json::array();
  std::vector<std::map<std::string, double>> metrics;
  bool any_diverged = false;
  for (std::size_t si = 0; si < records.size(); ++si) {
    const RunRecord& record = records[si];
    emit_record(record, cfg.emit,
                outdir / ("train_" + label + "_s" + std::to_string(cfg.seeds[si])),
                outcome);
    any_diverged = any_diverged || record.diverged;
    trials.push_back(trial_row(label, record));
    metrics.push_back(trial_metrics(record));
  }

  json summary;
  summary["artifact_version"] = kArtifactVersion;
  summary["config_echo"] = config_to_json(cfg);
  summary["optimizer"] = label;
  summary["aggregates"] = aggregates_to_json(stats::aggregate_trials(metrics));
  summary["trials"] = trials;
  std::filesystem::path summary_path = outdir / "summary.json";
  write_json_doc(summary, summary_path);
  outcome.files.push_back(summary_path);
  write_run_sidecar(outdir, elapsed_seconds(start));

  if (any_diverged) {
    outcome.exit_code = 1;
    outcome.message = "one or more training runs diverged; records truncated";
  }
  return outcome;
}

RunOutcome run_compare(const ExperimentConfig& cfg) {
  auto start = std::chrono::steady_clock::now();
  RunOutcome outcome;
  std::filesystem::path outdir = resolve_output_dir(cfg);
  std::filesystem::create_directories(outdir);

  const std::size_t n_opt = cfg.optimizers.size();
  const std::size_t n_seed = cfg.seeds.size();
  std::vector<RunRecord> records(n_opt * n_seed);
  parallel_for(records.size(), cfg.threads, [&](std::size_t idx) {
    std::size_t oi = idx / n_seed;
    std::size_t si = idx % n_seed;
    records[idx] = train_trial(cfg, cfg.optimizers[oi].kind, cfg.seeds[si]);
  });

  json trials = json::array();
  json aggregates;
  bool any_diverged = false;
  std::string table = "optimizer,n_seeds,mean_final_test_acc,std_final_test_acc\n";
  for (std::size_t oi = 0; oi < n_opt; ++oi) {
    const std::string& label = cfg.optimizers[oi].label;
    std::vector<std::map<std::string, double>> metrics;
    for (std::size_t si = 0; si < n_seed; ++si) {
      const RunRecord& record = records[oi * n_seed + si];
      emit_record(record, cfg.emit,
                  outdir / ("train_" + label + "_s" + std::to_string(cfg.seeds[si])),
                  outcome);
      any_diverged = any_diverged || record.diverged;
      trials.push_back(trial_row(label, record));
      metrics.push_back(trial_metrics(record));
    }
    auto aggs = stats::aggregate_trials(metrics);
    aggregates[label] = aggregates_to_json(aggs);
    const auto& acc = aggs.at("final_test_acc");
    table += label + "," + std::to_string(n_seed) + "," +
             format_double(acc.mean) + "," + format_double(acc.stddev) + "\n";
  }

  json tests = json::array();
  for (std::size_t a = 0; a < n_opt; ++a) {
    for (std::size_t b = a + 1; b < n_opt; ++b) {
      std::vector<double> accs_a(n_seed), accs_b(n_seed);
      for (std::size_t si = 0; si < n_seed; ++si) {
        accs_a[si] = records[a * n_seed + si].summary.at("final_test_acc");
        accs_b[si] = records[b * n_seed + si].summary.at("final_test_acc");
      }
      stats::WilcoxonResult w = stats::wilcoxon_signed_rank(accs_a, accs_b);
      json row;
      row["a"] = cfg.optimizers[a].label;
      row["b"] = cfg.optimizers[b].label;
      row["metric"] = "final_test_acc";
      row["statistic"] = w.statistic;
      row["p_value"] = w.p_value;
      row["n_effective"] = w.n_effective;
      row["method"] = w.method == stats::WilcoxonResult::Method::exact
                          ? "exact"
                          : "normal_approx";
      row["degenerate"] = w.degenerate;
      tests.push_back(row);
    }
  }

  std::filesystem::path table_path = outdir / "compare.csv";
  write_text_file(table_path, table);
  outcome.files.push_back(table_path);

  json summary;
  summary["artifact_version"] = kArtifactVersion;
  summary["config_echo"] = config_to_json(cfg);
  summary["aggregates"] = aggregates;
  summary["wilcoxon"] = tests;
  summary["trials"] = trials;
  std::filesystem::path summary_path = outdir / "summary.json";
  write_json_doc(summary, summary_path);
  outcome.files.push_back(summary_path);
  write_run_sidecar(outdir, elapsed_seconds(start));

  if (any_diverged) {
    outcome.exit_code = 1;
    outcome.message = "one or more training runs diverged; records truncated";
  }
  return outcome;
}

RunOutcome run_grid(const ExperimentConfig& cfg) {
  auto start = std::chrono::steady_clock::now();
  RunOutcome outcome;
  std::filesystem::path outdir = resolve_output_dir(cfg);
  std::filesystem::create_directories(outdir);

  const GridSpec& grid = *cfg.grid;
  const std::size_t cells = grid_cell_count(grid);
  const std::size_t n_seed = cfg.seeds.size();

  // Cell axis values in row-major order, last axis fastest.
  std::vector<std::vector<double>> cell_values(cells);
  {
    std::vector<std::size_t> index(grid.axes.size(), 0);
    for (std::size_t cell = 0; cell < cells; ++cell) {
      std::vector<double> values(grid.axes.size());
      for (std::size_t a = 0; a < grid.axes.size(); ++a) {
        values[a] = grid.axes[a].values[index[a]];
      }
      cell_values[cell] = std::move(values);
      for (std::size_t a = index.size(); a-- > 0;) {
        if (++index[a] < grid.axes[a].values.size()) break;
        index[a] = 0;
      }
    }
  }

  std::vector<RunRecord> records(cells * n_seed);
  parallel_for(records.size(), cfg.threads, [&](std::size_t idx) {
    std::size_t cell = idx / n_seed;
    std::size_t si = idx % n_seed;
    optim::OptimizerKind kind =
        apply_grid_point(cfg.optimizers[0].kind, grid.axes, cell_values[cell]);
    records[idx] = train_trial(cfg, kind, cfg.seeds[si]);
  });

  const bool maximize = grid.metric == "final_test_acc";
  std::string table;
  for (const auto& axis : grid.axes) table += axis.param + ",";
  table += "mean_" + grid.metric + ",std_" + grid.metric + "\n";

  bool any_diverged = false;
  std::vector<double> cell_means(cells);
  json cell_rows = json::array();
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::vector<std::map<std::string, double>> metrics;
    for (std::size_t si = 0; si < n_seed; ++si) {
      const RunRecord& record = records[cell * n_seed + si];
      any_diverged = any_diverged || record.diverged;
      metrics.push_back(trial_metrics(record));
    }
    auto aggs = stats::aggregate_trials(metrics);
    const auto& m = aggs.at(grid.metric);
    cell_means[cell] = m.mean;
    for (double v : cell_values[cell]) table += format_double(v) + ",";
    table += format_double(m.mean) + "," + format_double(m.stddev) + "\n";
    json row;
    json params;
    for (std::size_t a = 0; a < grid.axes.size(); ++a) {
      params[grid.axes[a].param] = cell_values[cell][a];
    }
    row["params"] = params;
    row["mean"] = m.mean;
    row["stddev"] = m.stddev;
    cell_rows.push_back(row);
  }

  std::size_t best = 0;
  for (std::size_t cell = 1; cell < cells; ++cell) {
    if (maximize ? cell_means[cell] > cell_means[best]
                 : cell_means[cell] < cell_means[best]) {
      best = cell;
    }
  }
  double lo = *std::min_element(cell_means.begin(), cell_means.end());
  double hi = *std::max_element(cell_means.begin(), cell_means.end());

  std::filesystem::path table_path = outdir / "grid.csv";
  write_text_file(table_path, table);
  outcome.files.push_back(table_path);

  json summary;
  summary["artifact_version"] = kArtifactVersion;
  summary["config_echo"] = config_to_json(cfg);
  summary["metric"] = grid.metric;
  summary["cells"] = cells;
  json best_row;
  json best_params;
  for (std::size_t a = 0; a < grid.axes.size(); ++a) {
    best_params[grid.axes[a].param] = cell_values[best][a];
  }
  best_row["params"] = best_params;
  best_row["mean"] = cell_means[best];
  summary["best"] = best_row;
  summary["spread"] = hi - lo;
  summary["cell_results"] = cell_rows;
  std::filesystem::path summary_path = outdir / "summary.json";
  write_json_doc(summary, summary_path);
  outcome.files.push_back(summary_path);
  write_run_sidecar(outdir, elapsed_seconds(start));

  if (any_diverged) {
    outcome.exit_code = 1;
    outcome.message = "one or more grid cells diverged; records truncated";
  }
  return outcome;
}

}  // namespace

RunOutcome run(const ExperimentConfig& cfg) {
  if (cfg.kind == "landscape") return run_landscape(cfg);
  if (cfg.kind == "train") return run_train(cfg);
  if (cfg.kind == "compare") return run_compare(cfg);
  if (cfg.kind == "grid_search") return run_grid(cfg);
  throw ConfigError("config: unknown kind '" + cfg.kind + "'");
}

}  // namespace fame::harness
