#include "fame/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fame/nn.hpp"
#include "fame/record.hpp"

namespace fame::harness {

namespace {

using nlohmann::json;

void require_object(const json& value, const std::string& ctx) {
  if (!value.is_object()) {
    throw ConfigError("config: '" + ctx + "' must be an object");
  }
}

void check_keys(const json& obj, const std::string& ctx,
                const std::set<std::string>& allowed,
                const std::set<std::string>& required) {
  for (const auto& item : obj.items()) {
    if (allowed.find(item.key()) == allowed.end()) {
      throw ConfigError("config: unknown key '" + item.key() + "' in " + ctx);
    }
  }
  for (const auto& key : required) {
    if (!obj.contains(key)) {
      throw ConfigError("config: missing required key '" + key + "' in " + ctx);
    }
  }
}

double get_number(const json& obj, const std::string& ctx, const std::string& key,
                  double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number()) {
    throw ConfigError("config: key '" + key + "' in " + ctx + " must be a number");
  }
  return obj.at(key).get<double>();
}

int get_int(const json& obj, const std::string& ctx, const std::string& key,
            int fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number_integer()) {
    throw ConfigError("config: key '" + key + "' in " + ctx +
                      " must be an integer");
  }
  return obj.at(key).get<int>();
}

std::string get_string(const json& obj, const std::string& ctx,
                       const std::string& key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) {
    throw ConfigError("config: key '" + key + "' in " + ctx +
                      " must be a string");
  }
  return obj.at(key).get<std::string>();
}

bool get_bool(const json& obj, const std::string& ctx, const std::string& key,
              bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_boolean()) {
    throw ConfigError("config: key '" + key + "' in " + ctx +
                      " must be a boolean");
  }
  return obj.at(key).get<bool>();
}

optim::DecayMode parse_decay_mode(const json& obj, const std::string& ctx) {
  std::string mode = get_string(obj, ctx, "decay_mode", "coupled");
  if (mode == "coupled") return optim::DecayMode::coupled;
  if (mode == "decoupled") return optim::DecayMode::decoupled;
  throw ConfigError("config: key 'decay_mode' in " + ctx +
                    " must be 'coupled' or 'decoupled'");
}

std::vector<double> get_double_list(const json& obj, const std::string& ctx,
                                    const std::string& key) {
  if (!obj.contains(key) || !obj.at(key).is_array()) {
    throw ConfigError("config: key '" + key + "' in " + ctx +
                      " must be an array of numbers");
  }
  std::vector<double> out;
  for (const auto& v : obj.at(key)) {
    if (!v.is_number()) {
      throw ConfigError("config: key '" + key + "' in " + ctx +
                        " must be an array of numbers");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

optim::FameHyperParams parse_fame_params(const json& spec, const std::string& ctx) {
  optim::FameHyperParams hp;
  hp.alpha = get_number(spec, ctx, "alpha", hp.alpha);
  hp.beta1 = get_number(spec, ctx, "beta1", hp.beta1);
  hp.beta2 = get_number(spec, ctx, "beta2", hp.beta2);
  hp.beta3 = get_number(spec, ctx, "beta3", hp.beta3);
  hp.beta4 = get_number(spec, ctx, "beta4", hp.beta4);
  hp.beta5 = get_number(spec, ctx, "beta5", hp.beta5);
  hp.epsilon = get_number(spec, ctx, "epsilon", hp.epsilon);
  hp.weight_decay = get_number(spec, ctx, "weight_decay", hp.weight_decay);
  hp.decay_mode = parse_decay_mode(spec, ctx);
  return hp;
}

landscape::Point parse_point(const json& value, const std::string& ctx) {
  if (!value.is_array() || value.size() != 2 || !value[0].is_number() ||
      !value[1].is_number()) {
    throw ConfigError("config: " + ctx + " must be a [x, y] number pair");
  }
  return {value[0].get<double>(), value[1].get<double>()};
}

SurfaceSpec parse_surface(const json& spec) {
  require_object(spec, "surface");
  check_keys(spec, "surface", {"basins", "noise_std", "bounds"}, {"basins"});
  SurfaceSpec out;
  if (!spec.at("basins").is_array() || spec.at("basins").empty()) {
    throw ConfigError("config: key 'basins' in surface must be a non-empty array");
  }
  for (const auto& b : spec.at("basins")) {
    require_object(b, "surface.basins[]");
    check_keys(b, "surface.basins[]", {"center", "depth", "width"},
               {"center", "depth", "width"});
    landscape::Basin basin;
    basin.center = parse_point(b.at("center"), "surface.basins[].center");
    basin.depth = get_number(b, "surface.basins[]", "depth", 1.0);
    basin.width = get_number(b, "surface.basins[]", "width", 0.5);
    if (!(basin.depth > 0.0)) {
      throw ConfigError("config: key 'depth' in surface.basins[] must be positive");
    }
    if (!(basin.width > 0.0)) {
      throw ConfigError("config: key 'width' in surface.basins[] must be positive");
    }
    out.basins.push_back(basin);
  }
  out.noise_std = get_number(spec, "surface", "noise_std", 0.0);
  if (out.noise_std < 0.0) {
    throw ConfigError("config: key 'noise_std' in surface must be non-negative");
  }
  if (spec.contains("bounds")) {
    const auto& b = spec.at("bounds");
    require_object(b, "surface.bounds");
    check_keys(b, "surface.bounds", {"xmin", "xmax", "ymin", "ymax"},
               {"xmin", "xmax", "ymin", "ymax"});
    out.bounds.xmin = get_number(b, "surface.bounds", "xmin", -3.0);
    out.bounds.xmax = get_number(b, "surface.bounds", "xmax", 3.0);
    out.bounds.ymin = get_number(b, "surface.bounds", "ymin", -3.0);
    out.bounds.ymax = get_number(b, "surface.bounds", "ymax", 3.0);
    if (out.bounds.xmin >= out.bounds.xmax || out.bounds.ymin >= out.bounds.ymax) {
      throw ConfigError("config: surface.bounds must describe a non-empty box");
    }
  }
  return out;
}

DescentSpec parse_descent(const json& spec) {
  require_object(spec, "descent");
  check_keys(spec, "descent", {"x0", "steps"}, {"x0", "steps"});
  DescentSpec out;
  out.x0 = parse_point(spec.at("x0"), "descent.x0");
  out.steps = get_int(spec, "descent", "steps", 1000);
  if (out.steps < 1) {
    throw ConfigError("config: key 'steps' in descent must be >= 1");
  }
  return out;
}

DatasetSpec parse_dataset(const json& spec) {
  require_object(spec, "dataset");
  check_keys(spec, "dataset",
             {"generator", "train_size", "test_size", "noise", "seed",
              "num_classes"},
             {"generator"});
  DatasetSpec out;
  out.generator = get_string(spec, "dataset", "generator", out.generator);
  if (out.generator != "two_moons" && out.generator != "spirals" &&
      out.generator != "gaussian_blobs") {
    throw ConfigError("config: key 'generator' in dataset must be one of "
                      "'two_moons', 'spirals', 'gaussian_blobs'");
  }
  out.train_size = get_int(spec, "dataset", "train_size", out.train_size);
  out.test_size = get_int(spec, "dataset", "test_size", out.test_size);
  if (out.train_size < 1 || out.test_size < 1) {
    throw ConfigError("config: dataset sizes must be >= 1");
  }
  out.noise = get_number(spec, "dataset", "noise", out.noise);
  if (out.noise < 0.0) {
    throw ConfigError("config: key 'noise' in dataset must be non-negative");
  }
  if (spec.contains("seed")) {
    if (!spec.at("seed").is_number_unsigned() && !spec.at("seed").is_number_integer()) {
      throw ConfigError("config: key 'seed' in dataset must be an integer");
    }
    out.seed = spec.at("seed").get<std::uint64_t>();
  }
  out.num_classes = get_int(spec, "dataset", "num_classes", out.num_classes);
  if (out.num_classes < 2) {
    throw ConfigError("config: key 'num_classes' in dataset must be >= 2");
  }
  return out;
}

NetworkSpec parse_network(const json& spec) {
  require_object(spec, "network");
  check_keys(spec, "network", {"hidden", "activation"}, {"hidden"});
  NetworkSpec out;
  if (!spec.at("hidden").is_array()) {
    throw ConfigError("config: key 'hidden' in network must be an array");
  }
  out.hidden.clear();
  for (const auto& h : spec.at("hidden")) {
    if (!h.is_number_integer() || h.get<int>() < 1) {
      throw ConfigError("config: key 'hidden' in network must hold integers >= 1");
    }
    out.hidden.push_back(h.get<int>());
  }
  out.activation = get_string(spec, "network", "activation", out.activation);
  try {
    nn::activation_from_string(out.activation);
  } catch (const std::invalid_argument&) {
    throw ConfigError(
        "config: key 'activation' in network must be one of 'identity', "
        "'relu', 'tanh'");
  }
  return out;
}

TrainSpec parse_train(const json& spec) {
  require_object(spec, "train");
  check_keys(spec, "train", {"epochs", "batch_size"}, {"epochs"});
  TrainSpec out;
  out.epochs = get_int(spec, "train", "epochs", out.epochs);
  out.batch_size = get_int(spec, "train", "batch_size", out.batch_size);
  if (out.epochs < 1) throw ConfigError("config: key 'epochs' in train must be >= 1");
  if (out.batch_size < 1) {
    throw ConfigError("config: key 'batch_size' in train must be >= 1");
  }
  return out;
}

GridSpec parse_grid(const json& spec) {
  require_object(spec, "grid");
  check_keys(spec, "grid", {"axes", "metric", "cell_cap"}, {"axes"});
  GridSpec out;
  if (!spec.at("axes").is_array() || spec.at("axes").empty()) {
    throw ConfigError("config: key 'axes' in grid must be a non-empty array");
  }
  std::set<std::string> seen;
  for (const auto& axis_spec : spec.at("axes")) {
    require_object(axis_spec, "grid.axes[]");
    check_keys(axis_spec, "grid.axes[]",
               {"param", "values", "from", "to", "step"}, {"param"});
    GridAxis axis;
    axis.param = get_string(axis_spec, "grid.axes[]", "param", "");
    if (axis.param.empty()) {
      throw ConfigError("config: key 'param' in grid.axes[] must be non-empty");
    }
    if (!seen.insert(axis.param).second) {
      throw ConfigError("config: duplicate grid axis '" + axis.param + "'");
    }
    if (axis_spec.contains("values")) {
      if (axis_spec.contains("from") || axis_spec.contains("to") ||
          axis_spec.contains("step")) {
        throw ConfigError("config: grid axis '" + axis.param +
                          "' must use either 'values' or a range, not both");
      }
      axis.values = get_double_list(axis_spec, "grid.axes[]", "values");
      if (axis.values.empty()) {
        throw ConfigError("config: grid axis '" + axis.param +
                          "' has an empty values list");
      }
    } else {
      if (!axis_spec.contains("from") || !axis_spec.contains("to") ||
          !axis_spec.contains("step")) {
        throw ConfigError("config: grid axis '" + axis.param +
                          "' needs 'values' or all of 'from'/'to'/'step'");
      }
      double from = get_number(axis_spec, "grid.axes[]", "from", 0.0);
      double to = get_number(axis_spec, "grid.axes[]", "to", 0.0);
      double step = get_number(axis_spec, "grid.axes[]", "step", 0.0);
      if (!(step > 0.0) || to < from) {
        throw ConfigError("config: grid axis '" + axis.param +
                          "' range needs step > 0 and to >= from");
      }
      long count = std::lround(std::floor((to - from) / step + 1e-9)) + 1;
      for (long i = 0; i < count; ++i) {
        axis.values.push_back(from + static_cast<double>(i) * step);
      }
    }
    out.axes.push_back(std::move(axis));
  }
  out.metric = get_string(spec, "grid", "metric", out.metric);
  if (out.metric != "final_test_acc" && out.metric != "final_train_loss") {
    throw ConfigError("config: key 'metric' in grid must be 'final_test_acc' "
                      "or 'final_train_loss'");
  }
  out.cell_cap = get_int(spec, "grid", "cell_cap", out.cell_cap);
  if (out.cell_cap < 1) {
    throw ConfigError("config: key 'cell_cap' in grid must be >= 1");
  }
  return out;
}

}  // namespace

LabeledOptimizer parse_optimizer(const json& spec) {
  require_object(spec, "optimizer");
  if (!spec.contains("kind") || !spec.at("kind").is_string()) {
    throw ConfigError("config: missing required key 'kind' in optimizer");
  }
  std::string kind = spec.at("kind").get<std::string>();
  std::string ctx = "optimizer '" + kind + "'";
  LabeledOptimizer out;
  if (kind == "sgd_momentum") {
    check_keys(spec, ctx, {"kind", "name", "lr", "momentum", "weight_decay"}, {});
    optim::SgdMomentumParams p;
    p.lr = get_number(spec, ctx, "lr", p.lr);
    p.momentum = get_number(spec, ctx, "momentum", p.momentum);
    p.weight_decay = get_number(spec, ctx, "weight_decay", p.weight_decay);
    out.kind = optim::SgdMomentum{p};
  } else if (kind == "adam") {
    check_keys(spec, ctx,
               {"kind", "name", "lr", "beta1", "beta2", "epsilon",
                "weight_decay", "bias_correction"},
               {});
    optim::AdamParams p;
    p.lr = get_number(spec, ctx, "lr", p.lr);
    p.beta1 = get_number(spec, ctx, "beta1", p.beta1);
    p.beta2 = get_number(spec, ctx, "beta2", p.beta2);
    p.epsilon = get_number(spec, ctx, "epsilon", p.epsilon);
    p.weight_decay = get_number(spec, ctx, "weight_decay", p.weight_decay);
    p.bias_correction = get_bool(spec, ctx, "bias_correction", p.bias_correction);
    out.kind = optim::Adam{p};
  } else if (kind == "adamw") {
    check_keys(spec, ctx,
               {"kind", "name", "lr", "beta1", "beta2", "epsilon", "weight_decay"},
               {});
    optim::AdamWParams p;
    p.lr = get_number(spec, ctx, "lr", p.lr);
    p.beta1 = get_number(spec, ctx, "beta1", p.beta1);
    p.beta2 = get_number(spec, ctx, "beta2", p.beta2);
    p.epsilon = get_number(spec, ctx, "epsilon", p.epsilon);
    p.weight_decay = get_number(spec, ctx, "weight_decay", p.weight_decay);
    out.kind = optim::AdamW{p};
  } else if (kind == "fame" || kind == "partial_fame") {
    check_keys(spec, ctx,
               {"kind", "name", "alpha", "beta1", "beta2", "beta3", "beta4",
                "beta5", "epsilon", "weight_decay", "decay_mode"},
               {});
    optim::FameHyperParams hp = parse_fame_params(spec, ctx);
    if (kind == "fame") {
      out.kind = optim::Fame{hp};
    } else {
      out.kind = optim::PartialFame{hp};
    }
  } else if (kind == "kema_fame") {
    check_keys(spec, ctx,
               {"kind", "name", "order", "m_betas", "v_betas", "alpha",
                "epsilon", "weight_decay", "decay_mode"},
               {"order", "m_betas", "v_betas"});
    optim::KemaFameParams p;
    p.order = get_int(spec, ctx, "order", p.order);
    p.m_betas = get_double_list(spec, ctx, "m_betas");
    p.v_betas = get_double_list(spec, ctx, "v_betas");
    p.alpha = get_number(spec, ctx, "alpha", p.alpha);
    p.epsilon = get_number(spec, ctx, "epsilon", p.epsilon);
    p.weight_decay = get_number(spec, ctx, "weight_decay", p.weight_decay);
    p.decay_mode = parse_decay_mode(spec, ctx);
    out.kind = optim::KemaFame{p};
  } else {
    throw ConfigError("config: unknown optimizer kind '" + kind + "'");
  }
  try {
    optim::validate(out.kind);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config: invalid " + ctx + ": " + e.what());
  }
  out.label = get_string(spec, ctx, "name", kind);
  if (out.label.empty()) {
    throw ConfigError("config: key 'name' in " + ctx + " must be non-empty");
  }
  return out;
}

std::size_t grid_cell_count(const GridSpec& grid) {
  std::size_t cells = 1;
  for (const auto& axis : grid.axes) cells *= axis.values.size();
  return cells;
}

optim::OptimizerKind apply_grid_point(const optim::OptimizerKind& base,
                                      const std::vector<GridAxis>& axes,
                                      const std::vector<double>& values) {
  if (axes.size() != values.size()) {
    throw ConfigError("config: grid point arity mismatch");
  }
  optim::OptimizerKind out = base;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const std::string& name = axes[i].param;
    double value = values[i];
    bool ok = std::visit(
        [&](auto& k) -> bool {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, optim::SgdMomentum>) {
            if (name == "lr") k.params.lr = value;
            else if (name == "momentum") k.params.momentum = value;
            else if (name == "weight_decay") k.params.weight_decay = value;
            else return false;
          } else if constexpr (std::is_same_v<T, optim::Adam>) {
            if (name == "lr") k.params.lr = value;
            else if (name == "beta1") k.params.beta1 = value;
            else if (name == "beta2") k.params.beta2 = value;
            else if (name == "epsilon") k.params.epsilon = value;
            else if (name == "weight_decay") k.params.weight_decay = value;
            else return false;
          } else if constexpr (std::is_same_v<T, optim::AdamW>) {
            if (name == "lr") k.params.lr = value;
            else if (name == "beta1") k.params.beta1 = value;
            else if (name == "beta2") k.params.beta2 = value;
            else if (name == "epsilon") k.params.epsilon = value;
            else if (name == "weight_decay") k.params.weight_decay = value;
            else return false;
          } else if constexpr (std::is_same_v<T, optim::Fame> ||
                               std::is_same_v<T, optim::PartialFame>) {
            if (name == "alpha") k.params.alpha = value;
            else if (name == "beta1") k.params.beta1 = value;
            else if (name == "beta2") k.params.beta2 = value;
            else if (name == "beta3") k.params.beta3 = value;
            else if (name == "beta4") k.params.beta4 = value;
            else if (name == "beta5") k.params.beta5 = value;
            else if (name == "epsilon") k.params.epsilon = value;
            else if (name == "weight_decay") k.params.weight_decay = value;
            else return false;
          } else if constexpr (std::is_same_v<T, optim::KemaFame>) {
            if (name == "alpha") k.params.alpha = value;
            else if (name == "epsilon") k.params.epsilon = value;
            else if (name == "weight_decay") k.params.weight_decay = value;
            else return false;
          }
          return true;
        },
        out);
    if (!ok) {
      throw ConfigError("config: grid axis '" + name +
                        "' is not a parameter of optimizer kind '" +
                        optim::kind_name(base) + "'");
    }
  }
  try {
    optim::validate(out);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: grid cell produces an invalid "
                                  "optimizer: ") +
                      e.what());
  }
  return out;
}

ExperimentConfig parse_config(const json& doc) {
  require_object(doc, "config");
  check_keys(doc, "config",
             {"schema_version", "kind", "optimizer", "optimizers", "seeds",
              "output_dir", "emit", "threads", "surface", "descent", "dataset",
              "network", "train", "grid"},
             {"schema_version", "kind", "seeds"});

  ExperimentConfig cfg;
  cfg.schema_version = get_int(doc, "config", "schema_version", -1);
  if (cfg.schema_version != kSchemaVersion) {
    throw ConfigError("config: unsupported schema_version " +
                      std::to_string(cfg.schema_version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  cfg.kind = get_string(doc, "config", "kind", "");
  if (cfg.kind != "landscape" && cfg.kind != "train" && cfg.kind != "compare" &&
      cfg.kind != "grid_search") {
    throw ConfigError("config: key 'kind' must be one of 'landscape', 'train', "
                      "'compare', 'grid_search'");
  }

  if (!doc.at("seeds").is_array() || doc.at("seeds").empty()) {
    throw ConfigError("config: key 'seeds' must be a non-empty array");
  }
  std::set<std::uint64_t> seen_seeds;
  for (const auto& s : doc.at("seeds")) {
    if (!s.is_number_integer() && !s.is_number_unsigned()) {
      throw ConfigError("config: key 'seeds' must hold integers");
    }
    std::uint64_t seed = s.get<std::uint64_t>();
    if (!seen_seeds.insert(seed).second) {
      throw ConfigError("config: duplicate seed " + std::to_string(seed));
    }
    cfg.seeds.push_back(seed);
  }

  cfg.output_dir = get_string(doc, "config", "output_dir", cfg.output_dir);
  if (cfg.output_dir.empty()) {
    throw ConfigError("config: key 'output_dir' must be non-empty");
  }
  std::string emit = get_string(doc, "config", "emit", "both");
  if (emit == "csv") cfg.emit = EmitMode::csv;
  else if (emit == "json") cfg.emit = EmitMode::json;
  else if (emit == "both") cfg.emit = EmitMode::both;
  else throw ConfigError("config: key 'emit' must be 'csv', 'json' or 'both'");
  cfg.threads = get_int(doc, "config", "threads", 1);
  if (cfg.threads < 1 || cfg.threads > 256) {
    throw ConfigError("config: key 'threads' must lie in [1, 256]");
  }

  if (doc.contains("optimizer") && doc.contains("optimizers")) {
    throw ConfigError("config: use either 'optimizer' or 'optimizers', not both");
  }
  if (doc.contains("optimizer")) {
    cfg.optimizers.push_back(parse_optimizer(doc.at("optimizer")));
  } else if (doc.contains("optimizers")) {
    if (!doc.at("optimizers").is_array() || doc.at("optimizers").empty()) {
      throw ConfigError("config: key 'optimizers' must be a non-empty array");
    }
    for (const auto& spec : doc.at("optimizers")) {
      cfg.optimizers.push_back(parse_optimizer(spec));
    }
  } else {
    throw ConfigError("config: missing required key 'optimizer' (or 'optimizers')");
  }

  // Deduplicate default labels deterministically.
  std::map<std::string, int> label_counts;
  for (auto& opt : cfg.optimizers) ++label_counts[opt.label];
  std::map<std::string, int> used;
  for (auto& opt : cfg.optimizers) {
    if (label_counts[opt.label] > 1) {
      opt.label += "_" + std::to_string(++used[opt.label]);
    }
  }

  if (doc.contains("surface")) cfg.surface = parse_surface(doc.at("surface"));
  if (doc.contains("descent")) cfg.descent = parse_descent(doc.at("descent"));
  if (doc.contains("dataset")) cfg.dataset = parse_dataset(doc.at("dataset"));
  if (doc.contains("network")) cfg.network = parse_network(doc.at("network"));
  if (doc.contains("train")) cfg.train = parse_train(doc.at("train"));
  if (doc.contains("grid")) cfg.grid = parse_grid(doc.at("grid"));

  auto require_block = [&](bool present, const char* key) {
    if (!present) {
      throw ConfigError("config: kind '" + cfg.kind + "' requires key '" + key +
                        "'");
    }
  };
  auto forbid_block = [&](bool present, const char* key) {
    if (present) {
      throw ConfigError("config: kind '" + cfg.kind + "' does not accept key '" +
                        std::string(key) + "'");
    }
  };

  if (cfg.kind == "landscape") {
    require_block(cfg.surface.has_value(), "surface");
    require_block(cfg.descent.has_value(), "descent");
    forbid_block(cfg.dataset.has_value(), "dataset");
    forbid_block(cfg.network.has_value(), "network");
    forbid_block(cfg.train.has_value(), "train");
    forbid_block(cfg.grid.has_value(), "grid");
  } else {
    require_block(cfg.dataset.has_value(), "dataset");
    require_block(cfg.network.has_value(), "network");
    require_block(cfg.train.has_value(), "train");
    forbid_block(cfg.surface.has_value(), "surface");
    forbid_block(cfg.descent.has_value(), "descent");
    if (cfg.kind == "grid_search") {
      require_block(cfg.grid.has_value(), "grid");
      if (cfg.optimizers.size() != 1) {
        throw ConfigError("config: kind 'grid_search' takes exactly one optimizer");
      }
      std::size_t cells = grid_cell_count(*cfg.grid);
      if (cells > static_cast<std::size_t>(cfg.grid->cell_cap)) {
        throw ConfigError("config: grid describes " + std::to_string(cells) +
                          " cells, exceeding cell_cap " +
                          std::to_string(cfg.grid->cell_cap));
      }
      // Check every cell up front so no work starts on an invalid grid.
      std::vector<std::size_t> index(cfg.grid->axes.size(), 0);
      for (std::size_t cell = 0; cell < cells; ++cell) {
        std::vector<double> values;
        values.reserve(index.size());
        for (std::size_t a = 0; a < index.size(); ++a) {
          values.push_back(cfg.grid->axes[a].values[index[a]]);
        }
        apply_grid_point(cfg.optimizers[0].kind, cfg.grid->axes, values);
        for (std::size_t a = index.size(); a-- > 0;) {
          if (++index[a] < cfg.grid->axes[a].values.size()) break;
          index[a] = 0;
        }
      }
    } else {
      forbid_block(cfg.grid.has_value(), "grid");
      if (cfg.kind == "train" && cfg.optimizers.size() != 1) {
        throw ConfigError("config: kind 'train' takes exactly one optimizer");
      }
      if (cfg.kind == "compare" && cfg.optimizers.size() < 2) {
        throw ConfigError("config: kind 'compare' needs at least two optimizers");
      }
    }
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config: cannot parse '" + path.string() + "': " + e.what());
  } catch (const std::runtime_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(doc);
}

nlohmann::json optimizer_to_json(const LabeledOptimizer& opt) {
  json spec;
  spec["kind"] = optim::kind_name(opt.kind);
  spec["name"] = opt.label;
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, optim::SgdMomentum>) {
          spec["lr"] = k.params.lr;
          spec["momentum"] = k.params.momentum;
          spec["weight_decay"] = k.params.weight_decay;
        } else if constexpr (std::is_same_v<T, optim::Adam>) {
          spec["lr"] = k.params.lr;
          spec["beta1"] = k.params.beta1;
          spec["beta2"] = k.params.beta2;
          spec["epsilon"] = k.params.epsilon;
          spec["weight_decay"] = k.params.weight_decay;
          spec["bias_correction"] = k.params.bias_correction;
        } else if constexpr (std::is_same_v<T, optim::AdamW>) {
          spec["lr"] = k.params.lr;
          spec["beta1"] = k.params.beta1;
          spec["beta2"] = k.params.beta2;
          spec["epsilon"] = k.params.epsilon;
          spec["weight_decay"] = k.params.weight_decay;
        } else if constexpr (std::is_same_v<T, optim::Fame> ||
                             std::is_same_v<T, optim::PartialFame>) {
          spec["alpha"] = k.params.alpha;
          spec["beta1"] = k.params.beta1;
          spec["beta2"] = k.params.beta2;
          spec["beta3"] = k.params.beta3;
          spec["beta4"] = k.params.beta4;
          spec["beta5"] = k.params.beta5;
          spec["epsilon"] = k.params.epsilon;
          spec["weight_decay"] = k.params.weight_decay;
          spec["decay_mode"] = k.params.decay_mode == optim::DecayMode::coupled
                                   ? "coupled"
                                   : "decoupled";
        } else if constexpr (std::is_same_v<T, optim::KemaFame>) {
          spec["order"] = k.params.order;
          spec["m_betas"] = k.params.m_betas;
          spec["v_betas"] = k.params.v_betas;
          spec["alpha"] = k.params.alpha;
          spec["epsilon"] = k.params.epsilon;
          spec["weight_decay"] = k.params.weight_decay;
          spec["decay_mode"] = k.params.decay_mode == optim::DecayMode::coupled
                                   ? "coupled"
                                   : "decoupled";
        }
      },
      opt.kind);
  return spec;
}

std::string emit_mode_name(EmitMode mode) {
  switch (mode) {
    case EmitMode::csv:
      return "csv";
    case EmitMode::json:
      return "json";
    case EmitMode::both:
      return "both";
  }
  return "both";
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["schema_version"] = cfg.schema_version;
  doc["kind"] = cfg.kind;
  doc["seeds"] = cfg.seeds;
  doc["output_dir"] = cfg.output_dir;
  doc["emit"] = emit_mode_name(cfg.emit);
  doc["threads"] = cfg.threads;
  json opts = json::array();
  for (const auto& opt : cfg.optimizers) opts.push_back(optimizer_to_json(opt));
  doc["optimizers"] = opts;
  if (cfg.surface) {
    json surface;
    json basins = json::array();
    for (const auto& b : cfg.surface->basins) {
      json basin;
      basin["center"] = {b.center.x, b.center.y};
      basin["depth"] = b.depth;
      basin["width"] = b.width;
      basins.push_back(basin);
    }
    surface["basins"] = basins;
    surface["noise_std"] = cfg.surface->noise_std;
    surface["bounds"] = {{"xmin", cfg.surface->bounds.xmin},
                         {"xmax", cfg.surface->bounds.xmax},
                         {"ymin", cfg.surface->bounds.ymin},
                         {"ymax", cfg.surface->bounds.ymax}};
    doc["surface"] = surface;
  }
  if (cfg.descent) {
    doc["descent"] = {{"x0", {cfg.descent->x0.x, cfg.descent->x0.y}},
                      {"steps", cfg.descent->steps}};
  }
  if (cfg.dataset) {
    doc["dataset"] = {{"generator", cfg.dataset->generator},
                      {"train_size", cfg.dataset->train_size},
                      {"test_size", cfg.dataset->test_size},
                      {"noise", cfg.dataset->noise},
                      {"seed", cfg.dataset->seed},
                      {"num_classes", cfg.dataset->num_classes}};
  }
  if (cfg.network) {
    doc["network"] = {{"hidden", cfg.network->hidden},
                      {"activation", cfg.network->activation}};
  }
  if (cfg.train) {
    doc["train"] = {{"epochs", cfg.train->epochs},
                    {"batch_size", cfg.train->batch_size}};
  }
  if (cfg.grid) {
    json axes = json::array();
    for (const auto& axis : cfg.grid->axes) {
      axes.push_back({{"param", axis.param}, {"values", axis.values}});
    }
    doc["grid"] = {{"axes", axes},
                   {"metric", cfg.grid->metric},
                   {"cell_cap", cfg.grid->cell_cap}};
  }
  return doc;
}

}  // namespace fame::harness
