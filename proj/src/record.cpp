#include "fame/record.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fame::harness {

namespace {

double parse_double_token(const std::string& token) {
  if (token.empty()) {
    throw std::runtime_error("record: empty numeric field");
  }
  const char* begin = token.c_str();
  char* end = nullptr;
  double value = std::strtod(begin, &end);
  if (end != begin + token.size()) {
    throw std::runtime_error("record: malformed numeric field '" + token + "'");
  }
  return value;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

bool same_content(const RunRecord& a, const RunRecord& b) {
  return a.artifact_version == b.artifact_version &&
         a.config_echo == b.config_echo && a.seed == b.seed &&
         a.diverged == b.diverged && a.columns == b.columns &&
         a.rows == b.rows && a.summary == b.summary;
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string to_csv(const RunRecord& r) {
  std::string out;
  for (std::size_t c = 0; c < r.columns.size(); ++c) {
    if (c > 0) out.push_back(',');
    out += r.columns[c];
  }
  out.push_back('\n');
  for (const auto& row : r.rows) {
    if (row.size() != r.columns.size()) {
      throw std::runtime_error("record: row width does not match header");
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out.push_back(',');
      out += format_double(row[c]);
    }
    out.push_back('\n');
  }
  return out;
}

nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json doc;
  doc["artifact_version"] = r.artifact_version;
  doc["config_echo"] = r.config_echo;
  doc["seed"] = r.seed;
  doc["diverged"] = r.diverged;
  doc["columns"] = r.columns;
  doc["rows"] = r.rows;
  doc["summary"] = r.summary;
  return doc;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("record: cannot open '" + path.string() +
                             "' for writing");
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) {
    throw std::runtime_error("record: short write to '" + path.string() + "'");
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("record: cannot open '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void emit_csv(const RunRecord& r, const std::filesystem::path& path) {
  write_text_file(path, to_csv(r));
}

void emit_json(const RunRecord& r, const std::filesystem::path& path) {
  write_text_file(path, to_json(r).dump(2) + "\n");
  nlohmann::json meta;
  meta["wall_clock_seconds"] = r.wall_clock_seconds;
  meta["written_at_unix"] = static_cast<std::int64_t>(
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count());
  std::filesystem::path sidecar = path;
  sidecar += ".meta.json";
  write_text_file(sidecar, meta.dump(2) + "\n");
}

RunRecord parse_csv(const std::string& text) {
  RunRecord r;
  std::size_t pos = 0;
  bool header_done = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) {
      throw std::runtime_error("record: csv must end with a newline");
    }
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (!header_done) {
      r.columns = split(line, ',');
      header_done = true;
      continue;
    }
    auto fields = split(line, ',');
    if (fields.size() != r.columns.size()) {
      throw std::runtime_error("record: csv row width does not match header");
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_double_token(f));
    r.rows.push_back(std::move(row));
  }
  if (!header_done) {
    throw std::runtime_error("record: csv has no header row");
  }
  return r;
}

RunRecord parse_csv_file(const std::filesystem::path& path) {
  return parse_csv(read_text_file(path));
}

RunRecord parse_json(const nlohmann::json& doc) {
  RunRecord r;
  r.artifact_version = doc.at("artifact_version").get<std::string>();
  r.config_echo = doc.at("config_echo");
  r.seed = doc.at("seed").get<std::uint64_t>();
  r.diverged = doc.at("diverged").get<bool>();
  r.columns = doc.at("columns").get<std::vector<std::string>>();
  r.rows = doc.at("rows").get<std::vector<std::vector<double>>>();
  r.summary = doc.at("summary").get<std::map<std::string, double>>();
  return r;
}

RunRecord parse_json_file(const std::filesystem::path& path) {
  return parse_json(nlohmann::json::parse(read_text_file(path)));
}

}  // namespace fame::harness
