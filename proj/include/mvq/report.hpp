#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mvq/counting.hpp"

namespace mvq {

// nlohmann's default object keeps keys sorted, which the byte-stable JSON
// output relies on; do not switch to ordered_json.
using Json = nlohmann::json;

inline std::string rational_string(const BigRational& r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

// Uniform result envelope for every CLI command. JSON output is a pure
// function of (command, seed, params, results, checks): timing lives only in
// the text rendering, so identical runs serialize to identical bytes.
class ExperimentReport {
 public:
  ExperimentReport(std::string command, std::uint64_t seed) : command_(std::move(command)), seed_(seed) {
    params_ = Json::object();
    results_ = Json::object();
  }

  Json& params() { return params_; }
  Json& results() { return results_; }

  void add_check(const std::string& name, bool passed, Json detail = Json::object()) {
    Json c;
    c["name"] = name;
    c["passed"] = passed;
    c["detail"] = std::move(detail);
    checks_.push_back(std::move(c));
  }

  void set_table(std::vector<std::string> columns, std::vector<std::vector<std::string>> rows) {
    table_columns_ = std::move(columns);
    table_rows_ = std::move(rows);
  }

  void set_duration_ms(double ms) { duration_ms_ = ms; }

  bool all_passed() const {
    for (const auto& c : checks_)
      if (!c.at("passed").get<bool>()) return false;
    return true;
  }

  Json to_json() const {
    Json j;
    j["schema_version"] = 1;
    j["command"] = command_;
    j["seed"] = seed_;
    j["params"] = params_;
    j["results"] = results_;
    j["checks"] = checks_;
    if (!table_columns_.empty()) {
      Json t;
      t["columns"] = table_columns_;
      t["rows"] = table_rows_;
      j["table"] = std::move(t);
    }
    return j;
  }

  std::string to_text() const {
    std::ostringstream os;
    os << "command: " << command_ << "\n";
    os << "seed: " << seed_ << "\n";
    if (!params_.empty()) os << "params: " << params_.dump() << "\n";
    if (!results_.empty()) os << "results: " << results_.dump(2) << "\n";
    if (!table_columns_.empty()) {
      os << "table:\n  ";
      for (std::size_t i = 0; i < table_columns_.size(); ++i)
        os << (i ? "  " : "") << table_columns_[i];
      os << "\n";
      for (const auto& row : table_rows_) {
        os << "  ";
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "  " : "") << row[i];
        os << "\n";
      }
    }
    for (const auto& c : checks_) {
      os << (c.at("passed").get<bool>() ? "[ok]   " : "[FAIL] ") << c.at("name").get<std::string>();
      const Json& d = c.at("detail");
      if (!d.empty()) os << "  " << d.dump();
      os << "\n";
    }
    if (duration_ms_) os << "duration_ms: " << *duration_ms_ << "\n";
    return os.str();
  }

  // CSV covers only the tabular part of a report; commands without a table
  // have no CSV rendering.
  std::optional<std::string> to_csv() const {
    if (table_columns_.empty()) return std::nullopt;
    std::ostringstream os;
    auto field = [](const std::string& s) {
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string q = "\"";
      for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
      }
      return q + "\"";
    };
    for (std::size_t i = 0; i < table_columns_.size(); ++i)
      os << (i ? "," : "") << field(table_columns_[i]);
    os << "\n";
    for (const auto& row : table_rows_) {
      for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << field(row[i]);
      os << "\n";
    }
    return os.str();
  }

 private:
  std::string command_;
  std::uint64_t seed_;
  Json params_, results_;
  std::vector<Json> checks_;
  std::vector<std::string> table_columns_;
  std::vector<std::vector<std::string>> table_rows_;
  std::optional<double> duration_ms_;
};

}  // namespace mvq
