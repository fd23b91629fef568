#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "fame/config.hpp"

using namespace fame::harness;
using nlohmann::json;

namespace {

json minimal_landscape() {
  return json::parse(R"({
    "schema_version": 1,
    "kind": "landscape",
    "seeds": [1, 2],
    "optimizer": {"kind": "fame"},
    "surface": {
      "basins": [
        {"center": [-1.0, 1.0], "depth": 0.6, "width": 0.5},
        {"center": [1.0, -1.0], "depth": 1.0, "width": 0.5}
      ],
      "noise_std": 0.05
    },
    "descent": {"x0": [0.0, 0.0], "steps": 100}
  })");
}

json minimal_train() {
  return json::parse(R"({
    "schema_version": 1,
    "kind": "train",
    "seeds": [7],
    "optimizer": {"kind": "adam", "lr": 0.01},
    "dataset": {"generator": "two_moons", "train_size": 32, "test_size": 16},
    "network": {"hidden": [8]},
    "train": {"epochs": 2, "batch_size": 8}
  })");
}

// Error-message probe: returns what() of the ConfigError the parse raises,
// empty if it parses cleanly.
std::string parse_error(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool mentions(const std::string& message, const std::string& needle) {
  return message.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("minimal landscape config parses with defaults") {
  auto cfg = parse_config(minimal_landscape());
  CHECK(cfg.kind == "landscape");
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(cfg.output_dir == "out");
  CHECK(cfg.emit == EmitMode::both);
  CHECK(cfg.threads == 1);
  REQUIRE(cfg.optimizers.size() == 1);
  CHECK(cfg.optimizers[0].label == "fame");
  REQUIRE(cfg.surface.has_value());
  CHECK(cfg.surface->basins.size() == 2);
  CHECK(cfg.surface->noise_std == 0.05);
  CHECK(cfg.surface->bounds.xmin == -3.0);
  REQUIRE(cfg.descent.has_value());
  CHECK(cfg.descent->steps == 100);
  CHECK_FALSE(cfg.dataset.has_value());
}

TEST_CASE("minimal train config parses with defaults") {
  auto cfg = parse_config(minimal_train());
  CHECK(cfg.kind == "train");
  REQUIRE(cfg.dataset.has_value());
  CHECK(cfg.dataset->generator == "two_moons");
  CHECK(cfg.dataset->noise == 0.2);
  CHECK(cfg.dataset->num_classes == 2);
  REQUIRE(cfg.network.has_value());
  CHECK(cfg.network->hidden == std::vector<int>{8});
  CHECK(cfg.network->activation == "relu");
  REQUIRE(cfg.train.has_value());
  CHECK(cfg.train->epochs == 2);
}

TEST_CASE("unknown keys are rejected by name") {
  auto doc = minimal_landscape();
  doc["typo_key"] = 1;
  CHECK(mentions(parse_error(doc), "unknown key 'typo_key'"));

  doc = minimal_landscape();
  doc["surface"]["sigma"] = 0.5;
  auto msg = parse_error(doc);
  CHECK(mentions(msg, "unknown key 'sigma'"));
  CHECK(mentions(msg, "surface"));

  doc = minimal_train();
  doc["optimizer"]["beta3"] = 0.3;  // adam has no beta3
  CHECK(mentions(parse_error(doc), "beta3"));
}

TEST_CASE("schema version is pinned") {
  auto doc = minimal_landscape();
  doc["schema_version"] = 2;
  CHECK(mentions(parse_error(doc), "schema_version"));
  doc.erase("schema_version");
  CHECK(mentions(parse_error(doc), "schema_version"));
}

TEST_CASE("kind is restricted to the four experiment types") {
  auto doc = minimal_landscape();
  doc["kind"] = "descend";
  CHECK(mentions(parse_error(doc), "kind"));
}

TEST_CASE("seed lists must be non-empty unique integers") {
  auto doc = minimal_landscape();
  doc["seeds"] = json::array();
  CHECK(mentions(parse_error(doc), "seeds"));
  doc["seeds"] = {1, 1};
  CHECK(mentions(parse_error(doc), "duplicate seed 1"));
  doc["seeds"] = {1.5};
  CHECK(mentions(parse_error(doc), "integers"));
}

TEST_CASE("optimizer and optimizers are mutually exclusive") {
  auto doc = minimal_landscape();
  doc["optimizers"] = {doc["optimizer"]};
  CHECK(mentions(parse_error(doc), "not both"));
  doc.erase("optimizer");
  CHECK(parse_error(doc).empty());
  doc.erase("optimizers");
  CHECK(mentions(parse_error(doc), "optimizer"));
}

TEST_CASE("per-kind optimizer counts are enforced") {
  auto doc = minimal_train();
  auto opt = doc["optimizer"];
  doc.erase("optimizer");
  doc["optimizers"] = {opt, {{"kind", "fame"}}};
  CHECK(mentions(parse_error(doc), "exactly one"));

  doc["kind"] = "compare";
  CHECK(parse_error(doc).empty());
  doc["optimizers"] = {opt};
  CHECK(mentions(parse_error(doc), "at least two"));
}

TEST_CASE("duplicate default labels are disambiguated") {
  auto doc = minimal_train();
  doc["kind"] = "compare";
  doc.erase("optimizer");
  doc["optimizers"] = {{{"kind", "adam"}},
                       {{"kind", "adam"}, {"lr", 0.01}},
                       {{"kind", "fame"}}};
  auto cfg = parse_config(doc);
  REQUIRE(cfg.optimizers.size() == 3);
  CHECK(cfg.optimizers[0].label == "adam_1");
  CHECK(cfg.optimizers[1].label == "adam_2");
  CHECK(cfg.optimizers[2].label == "fame");

  doc["optimizers"] = {{{"kind", "adam"}, {"name", "tuned"}},
                       {{"kind", "adam"}}};
  cfg = parse_config(doc);
  CHECK(cfg.optimizers[0].label == "tuned");
  CHECK(cfg.optimizers[1].label == "adam");
}

TEST_CASE("emit, threads and output_dir are validated") {
  auto doc = minimal_landscape();
  doc["emit"] = "yaml";
  CHECK(mentions(parse_error(doc), "emit"));
  doc = minimal_landscape();
  doc["threads"] = 0;
  CHECK(mentions(parse_error(doc), "threads"));
  doc["threads"] = 257;
  CHECK(mentions(parse_error(doc), "threads"));
  doc = minimal_landscape();
  doc["output_dir"] = "";
  CHECK(mentions(parse_error(doc), "output_dir"));
}

TEST_CASE("kind-specific blocks are required and fenced off") {
  auto doc = minimal_landscape();
  doc.erase("descent");
  CHECK(mentions(parse_error(doc), "descent"));

  doc = minimal_landscape();
  doc["dataset"] = {{"generator", "two_moons"}};
  CHECK(mentions(parse_error(doc), "does not accept key 'dataset'"));

  doc = minimal_train();
  doc.erase("network");
  CHECK(mentions(parse_error(doc), "network"));

  doc = minimal_train();
  doc["surface"] = {{"basins", json::array()}};
  CHECK_FALSE(parse_error(doc).empty());
}

TEST_CASE("every optimizer kind parses its own parameter set") {
  auto check_kind = [](json spec, const std::string& expected) {
    auto opt = parse_optimizer(spec);
    CHECK(fame::optim::kind_name(opt.kind) == expected);
    CHECK(opt.label == expected);
  };
  check_kind({{"kind", "sgd_momentum"}, {"lr", 0.05}, {"momentum", 0.8}},
             "sgd_momentum");
  check_kind({{"kind", "adam"}, {"beta1", 0.8}, {"bias_correction", false}},
             "adam");
  check_kind({{"kind", "adamw"}, {"weight_decay", 0.1}}, "adamw");
  check_kind({{"kind", "fame"}, {"beta3", 0.4}, {"decay_mode", "decoupled"}},
             "fame");
  check_kind({{"kind", "partial_fame"}, {"alpha", 0.01}}, "partial_fame");
  check_kind({{"kind", "kema_fame"},
              {"order", 2},
              {"m_betas", {0.9, 0.3}},
              {"v_betas", {0.999, 0.8}}},
             "kema_fame");

  auto named = parse_optimizer(
      {{"kind", "fame"}, {"name", "fame_tuned"}, {"alpha", 0.002}});
  CHECK(named.label == "fame_tuned");

  CHECK_THROWS_AS(parse_optimizer({{"kind", "rmsprop"}}), ConfigError);
  CHECK_THROWS_AS(parse_optimizer({{"kind", "adam"}, {"lr", -0.1}}), ConfigError);
  CHECK_THROWS_AS(parse_optimizer({{"kind", "fame"}, {"beta1", 1.5}}),
                  ConfigError);
  CHECK_THROWS_AS(parse_optimizer({{"kind", "kema_fame"}, {"order", 2}}),
                  ConfigError);
  CHECK_THROWS_AS(parse_optimizer({{"kind", "adam"}, {"name", ""}}), ConfigError);
}

TEST_CASE("fame optimizer parse picks up every hyper-parameter") {
  auto opt = parse_optimizer(json::parse(R"({
    "kind": "fame", "alpha": 0.002, "beta1": 0.8, "beta2": 0.99,
    "beta3": 0.2, "beta4": 0.6, "beta5": 0.7, "epsilon": 1e-9,
    "weight_decay": 0.01, "decay_mode": "decoupled"
  })"));
  const auto& hp = std::get<fame::optim::Fame>(opt.kind).params;
  CHECK(hp.alpha == 0.002);
  CHECK(hp.beta1 == 0.8);
  CHECK(hp.beta2 == 0.99);
  CHECK(hp.beta3 == 0.2);
  CHECK(hp.beta4 == 0.6);
  CHECK(hp.beta5 == 0.7);
  CHECK(hp.epsilon == 1e-9);
  CHECK(hp.weight_decay == 0.01);
  CHECK(hp.decay_mode == fame::optim::DecayMode::decoupled);
}

TEST_CASE("grid axes expand ranges and cap cell counts") {
  auto doc = minimal_train();
  doc["kind"] = "grid_search";
  doc["grid"] = json::parse(R"({
    "axes": [
      {"param": "lr", "values": [0.001, 0.01]},
      {"param": "beta1", "from": 0.5, "to": 0.9, "step": 0.1}
    ]
  })");
  auto cfg = parse_config(doc);
  REQUIRE(cfg.grid.has_value());
  REQUIRE(cfg.grid->axes.size() == 2);
  CHECK(cfg.grid->axes[0].values == std::vector<double>{0.001, 0.01});
  REQUIRE(cfg.grid->axes[1].values.size() == 5);
  CHECK(cfg.grid->axes[1].values[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cfg.grid->axes[1].values[4] == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(grid_cell_count(*cfg.grid) == 10);
  CHECK(cfg.grid->metric == "final_test_acc");

  doc["grid"]["cell_cap"] = 9;
  auto msg = parse_error(doc);
  CHECK(mentions(msg, "10"));
  CHECK(mentions(msg, "9"));
}

TEST_CASE("grid axis specifications are strict") {
  auto doc = minimal_train();
  doc["kind"] = "grid_search";

  doc["grid"] = {{"axes", {{{"param", "lr"}, {"values", {0.1}}, {"from", 0.1}}}}};
  CHECK(mentions(parse_error(doc), "not both"));

  doc["grid"] = {{"axes", {{{"param", "lr"}, {"from", 0.1}, {"to", 0.2}}}}};
  CHECK(mentions(parse_error(doc), "step"));

  doc["grid"] = {{"axes", {{{"param", "lr"}, {"values", json::array()}}}}};
  CHECK(mentions(parse_error(doc), "empty values"));

  doc["grid"] = {{"axes",
                  {{{"param", "lr"}, {"values", {0.1}}},
                   {{"param", "lr"}, {"values", {0.2}}}}}};
  CHECK(mentions(parse_error(doc), "duplicate grid axis 'lr'"));

  doc["grid"] = {{"axes", {{{"param", "beta3"}, {"values", {0.1}}}}}};
  auto msg = parse_error(doc);  // adam has no beta3
  CHECK(mentions(msg, "beta3"));
  CHECK(mentions(msg, "adam"));

  doc["grid"] = {{"axes", {{{"param", "lr"}, {"values", {0.1}}}}},
                 {"metric", "wallclock"}};
  CHECK(mentions(parse_error(doc), "metric"));

  // A cell that breaks optimizer validation is caught before any run.
  doc["grid"] = {{"axes", {{{"param", "beta1"}, {"values", {0.9, 1.5}}}}}};
  CHECK(mentions(parse_error(doc), "invalid"));
}

TEST_CASE("grid points override base optimizer parameters") {
  auto base = parse_optimizer({{"kind", "adam"}}).kind;
  std::vector<GridAxis> axes = {{"lr", {0.5}}, {"beta2", {0.95}}};
  auto cell = apply_grid_point(base, axes, {0.5, 0.95});
  const auto& p = std::get<fame::optim::Adam>(cell).params;
  CHECK(p.lr == 0.5);
  CHECK(p.beta2 == 0.95);
  CHECK(std::get<fame::optim::Adam>(base).params.lr == 1e-3);

  CHECK_THROWS_AS(apply_grid_point(base, axes, {0.5}), ConfigError);
  std::vector<GridAxis> bad_axes = {{"order", {4.0}}};
  CHECK_THROWS_AS(apply_grid_point(base, bad_axes, {4.0}), ConfigError);
}

TEST_CASE("normalized echo is a parse fixpoint") {
  for (auto doc : {minimal_landscape(), minimal_train()}) {
    auto cfg = parse_config(doc);
    auto echo = config_to_json(cfg);
    auto cfg2 = parse_config(echo);
    auto echo2 = config_to_json(cfg2);
    CHECK(echo.dump(2) == echo2.dump(2));
    CHECK(echo.at("output_dir") == "out");
    CHECK(echo.at("emit") == "both");
    CHECK(echo.at("optimizers").is_array());
  }
}

TEST_CASE("block validation messages name the offending key") {
  auto doc = minimal_landscape();
  doc["surface"]["basins"][0].erase("width");
  CHECK(mentions(parse_error(doc), "width"));

  doc = minimal_landscape();
  doc["surface"]["basins"][0]["width"] = 0.0;
  CHECK_FALSE(parse_error(doc).empty());

  doc = minimal_landscape();
  doc["descent"]["steps"] = 0;
  CHECK(mentions(parse_error(doc), "steps"));

  doc = minimal_landscape();
  doc["descent"]["x0"] = {1.0};
  CHECK(mentions(parse_error(doc), "x0"));

  doc = minimal_train();
  doc["dataset"]["generator"] = "circles";
  CHECK(mentions(parse_error(doc), "generator"));

  doc = minimal_train();
  doc["dataset"]["noise"] = -0.5;
  CHECK(mentions(parse_error(doc), "noise"));

  doc = minimal_train();
  doc["network"]["activation"] = "gelu";
  CHECK(mentions(parse_error(doc), "activation"));

  doc = minimal_train();
  doc["network"]["hidden"] = {8, 0};
  CHECK(mentions(parse_error(doc), "hidden"));

  doc = minimal_train();
  doc["train"]["epochs"] = 0;
  CHECK(mentions(parse_error(doc), "epochs"));

  doc = minimal_landscape();
  doc["surface"]["bounds"] = {{"xmin", 1.0}, {"xmax", -1.0}, {"ymin", 0.0},
                              {"ymax", 1.0}};
  CHECK(mentions(parse_error(doc), "bounds"));
}

TEST_CASE("surface basin width zero is rejected at parse time") {
  auto doc = minimal_landscape();
  doc["surface"]["basins"][0]["width"] = 0.0;
  // Either the parse or the later landscape construction must refuse; the
  // contract here is that parse_config already does.
  CHECK_THROWS(parse_config(doc));
}

TEST_CASE("config files load with clear errors") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "fame_config_test";
  fs::create_directories(dir);

  auto good = dir / "good.json";
  std::ofstream(good) << minimal_landscape().dump(2);
  auto cfg = load_config_file(good);
  CHECK(cfg.kind == "landscape");

  CHECK_THROWS_AS(load_config_file(dir / "missing.json"), ConfigError);

  auto bad = dir / "bad.json";
  std::ofstream(bad) << "{ not json";
  CHECK_THROWS_AS(load_config_file(bad), ConfigError);

  fs::remove_all(dir);
}

TEST_CASE("emit mode names round trip") {
  CHECK(emit_mode_name(EmitMode::csv) == "csv");
  CHECK(emit_mode_name(EmitMode::json) == "json");
  CHECK(emit_mode_name(EmitMode::both) == "both");
}
