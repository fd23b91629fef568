#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace fame::harness {

// One trial's trajectory plus its summary. Everything here is
// deterministic for a fixed config and seed; wall-clock time is carried
// alongside but only ever written to the metadata sidecar.
struct RunRecord {
  std::string artifact_version;
  nlohmann::json config_echo;  // null when not attached
  std::uint64_t seed = 0;
  bool diverged = false;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::map<std::string, double> summary;
  double wall_clock_seconds = 0.0;  // sidecar only, excluded from equality
};

// Equality over the deterministic content (everything but wall clock).
bool same_content(const RunRecord& a, const RunRecord& b);

// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double x);

// CSV carries the tabular slice: header row then data rows, '.' decimal
// separator, '\n' line endings. JSON carries the whole record with keys in
// sorted order. emit_json additionally writes "<path>.meta.json" holding
// wall clock and timestamp, which golden comparisons must ignore.
std::string to_csv(const RunRecord& r);
nlohmann::json to_json(const RunRecord& r);
void emit_csv(const RunRecord& r, const std::filesystem::path& path);
void emit_json(const RunRecord& r, const std::filesystem::path& path);

RunRecord parse_csv(const std::string& text);
RunRecord parse_csv_file(const std::filesystem::path& path);
RunRecord parse_json(const nlohmann::json& doc);
RunRecord parse_json_file(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace fame::harness
