#include <cmath>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fame/config.hpp"
#include "fame/kema.hpp"
#include "fame/nn.hpp"
#include "fame/optim.hpp"
#include "fame/record.hpp"
#include "fame/rng.hpp"
#include "fame/runner.hpp"
#include "fame/stats.hpp"
#include "fame/version.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Overrides {
  std::string output_dir;
  std::string emit;
  std::vector<std::uint64_t> seeds;
  int threads = 0;
};

fame::harness::ExperimentConfig load_with_overrides(const std::string& path,
                                                    const Overrides& ov) {
  auto cfg = fame::harness::load_config_file(path);
  if (!ov.output_dir.empty()) cfg.output_dir = ov.output_dir;
  if (!ov.emit.empty()) {
    if (ov.emit == "csv") cfg.emit = fame::harness::EmitMode::csv;
    else if (ov.emit == "json") cfg.emit = fame::harness::EmitMode::json;
    else if (ov.emit == "both") cfg.emit = fame::harness::EmitMode::both;
    else throw fame::harness::ConfigError("config: --emit must be 'csv', 'json' or 'both'");
  }
  if (!ov.seeds.empty()) cfg.seeds = ov.seeds;
  if (ov.threads > 0) cfg.threads = ov.threads;
  return cfg;
}

int execute(const fame::harness::ExperimentConfig& cfg) {
  auto outcome = fame::harness::run(cfg);
  for (const auto& f : outcome.files) {
    std::printf("wrote %s\n", f.string().c_str());
  }
  if (!outcome.message.empty()) {
    std::fprintf(stderr, "%s\n", outcome.message.c_str());
  }
  return outcome.exit_code;
}

std::vector<double> read_csv_column(const std::string& path, int column) {
  auto record = fame::harness::parse_csv_file(path);
  if (column < 0 || column >= static_cast<int>(record.columns.size())) {
    throw std::runtime_error("wilcoxon: column " + std::to_string(column) +
                             " out of range for '" + path + "'");
  }
  std::vector<double> out;
  out.reserve(record.rows.size());
  for (const auto& row : record.rows) {
    out.push_back(row[static_cast<std::size_t>(column)]);
  }
  return out;
}

bool report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s %s%s%s\n", ok ? "ok  " : "FAIL", name,
              detail.empty() ? "" : ": ", detail.c_str());
  return ok;
}

// Fast internal consistency checks, usable as a smoke test in the field.
int run_self_checks() {
  using namespace fame;
  bool all = true;

  {
    auto c3 = kema::kema_coefficients(3);
    auto c5 = kema::kema_coefficients(5);
    bool ok = c3 == std::vector<std::int64_t>{3, -3, 1} &&
              c5 == std::vector<std::int64_t>{5, -10, 10, -5, 1};
    for (int k = 1; k <= kema::kMaxOrder && ok; ++k) {
      std::int64_t sum = 0;
      for (auto c : kema::kema_coefficients(k)) sum += c;
      ok = sum == 1;
    }
    all &= report("chain coefficients", ok, "");
  }

  {
    Rng rng(7);
    std::vector<double> xs(200);
    for (auto& x : xs) x = rng.uniform(-5.0, 5.0);
    double worst = 0.0;
    for (int k = 1; k <= 4; ++k) {
      std::vector<double> betas(static_cast<std::size_t>(k), 0.9);
      auto ref = kema::kema_recursive_oracle(betas, xs, k);
      kema::Kema filt(betas);
      for (std::size_t t = 0; t < xs.size(); ++t) {
        worst = std::max(worst, std::fabs(filt.step(xs[t]) - ref[t]));
      }
    }
    all &= report("closed form vs recursive reference",
                  worst <= 1e-12, "max diff " + harness::format_double(worst));
  }

  {
    optim::FameHyperParams hp;
    optim::FameState st(1);
    optim::Vec params = {0.0};
    optim::fame_step(st, params, {1.0}, hp);
    bool ok = std::fabs(params[0] - (-0.0025306)) < 1e-7;
    all &= report("first-step update value", ok,
                  harness::format_double(params[0]));
  }

  {
    optim::FameHyperParams hp;
    optim::KemaFameParams kp;
    kp.order = 3;
    kp.m_betas = {hp.beta1, hp.beta3, hp.beta4};
    kp.v_betas = {hp.beta2, hp.beta5, hp.beta5};
    kp.alpha = hp.alpha;
    kp.epsilon = hp.epsilon;
    optim::FameState fs(4);
    optim::KemaFameState ks(3, 4);
    optim::Vec pf(4, 0.5), pk(4, 0.5);
    Rng rng(11);
    bool ok = true;
    for (int t = 0; t < 50 && ok; ++t) {
      optim::Vec g(4);
      for (auto& gi : g) gi = rng.normal();
      optim::fame_step(fs, pf, g, hp);
      optim::kema_fame_step(ks, pk, g, kp);
      ok = pf == pk;
    }
    all &= report("order-3 chain matches direct triple form bitwise", ok, "");
  }

  {
    auto data = nn::make_dataset("two_moons", 16, 16, 0.1, 3);
    auto net = nn::Network::random({2, 8, 2}, nn::Activation::tanh, 5);
    nn::Batch batch{data.train.inputs, data.train.labels};
    double err = nn::check_gradients(net, batch, 1e-5);
    all &= report("backprop vs central differences", err < 1e-4,
                  "max rel err " + harness::format_double(err));
  }

  {
    std::vector<double> a = {1.2, 2.1, 3.3, 4.0, 5.5};
    std::vector<double> b = {1.0, 2.0, 3.0, 3.5, 5.0};
    auto w = stats::wilcoxon_signed_rank(a, b);
    bool ok = w.statistic == 0.0 && std::fabs(w.p_value - 0.0625) < 1e-15;
    all &= report("signed-rank all-positive case", ok,
                  "p " + harness::format_double(w.p_value));
  }

  {
    fame::harness::ExperimentConfig cfg;
    cfg.kind = "landscape";
    cfg.seeds = {42};
    fame::harness::SurfaceSpec surface;
    surface.basins = {{{-1.0, 1.0}, 0.6, 0.5}, {{1.0, -1.0}, 1.0, 0.5}};
    surface.noise_std = 0.05;
    cfg.surface = surface;
    cfg.descent = fame::harness::DescentSpec{{0.0, 0.0}, 200};
    cfg.optimizers.push_back({"fame", optim::Fame{optim::FameHyperParams{}}});
    auto r1 = fame::harness::landscape_trial(cfg, cfg.optimizers[0].kind, 42);
    auto r2 = fame::harness::landscape_trial(cfg, cfg.optimizers[0].kind, 42);
    bool ok = fame::harness::to_csv(r1) == fame::harness::to_csv(r2);
    all &= report("repeat run determinism", ok, "");
  }

  std::printf("%s\n", all ? "all checks passed" : "self-check FAILED");
  return all ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fame: adaptive-moment optimizer experiments"};
  app.set_version_flag("--version", std::string(fame::kArtifactVersion));
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "experiment config file (json)")
        ->required();
    cmd->add_option("--output-dir", ov.output_dir, "override output_dir");
    cmd->add_option("--emit", ov.emit, "override emit mode (csv|json|both)");
    cmd->add_option("--seeds", ov.seeds, "override seed list")->delimiter(',');
    cmd->add_option("--threads", ov.threads, "override worker thread count");
  };

  CLI::App* cmd_run =
      app.add_subcommand("run", "run a landscape, train or compare experiment");
  add_common(cmd_run);
  CLI::App* cmd_grid = app.add_subcommand("grid", "run a grid_search experiment");
  add_common(cmd_grid);

  std::string path_a, path_b;
  int column = 0;
  CLI::App* cmd_wilcoxon = app.add_subcommand(
      "wilcoxon", "paired signed-rank test over two csv files");
  cmd_wilcoxon->add_option("a", path_a, "first csv file")->required();
  cmd_wilcoxon->add_option("b", path_b, "second csv file")->required();
  cmd_wilcoxon->add_option("--column", column, "0-based column to compare");

  CLI::App* cmd_check = app.add_subcommand("check", "run built-in self-checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) {
      auto cfg = load_with_overrides(config_path, ov);
      if (cfg.kind == "grid_search") {
        throw fame::harness::ConfigError(
            "config: kind 'grid_search' runs under the 'grid' subcommand");
      }
      return execute(cfg);
    }
    if (cmd_grid->parsed()) {
      auto cfg = load_with_overrides(config_path, ov);
      if (cfg.kind != "grid_search") {
        throw fame::harness::ConfigError(
            "config: the 'grid' subcommand needs kind 'grid_search'");
      }
      return execute(cfg);
    }
    if (cmd_wilcoxon->parsed()) {
      auto a = read_csv_column(path_a, column);
      auto b = read_csv_column(path_b, column);
      auto w = fame::stats::wilcoxon_signed_rank(a, b);
      std::printf("W=%s\np=%s\nn_effective=%d\nmethod=%s\ndegenerate=%s\n",
                  fame::harness::format_double(w.statistic).c_str(),
                  fame::harness::format_double(w.p_value).c_str(),
                  w.n_effective,
                  w.method == fame::stats::WilcoxonResult::Method::exact
                      ? "exact"
                      : "normal_approx",
                  w.degenerate ? "true" : "false");
      return 0;
    }
    if (cmd_check->parsed()) {
      return run_self_checks();
    }
  } catch (const fame::harness::ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
