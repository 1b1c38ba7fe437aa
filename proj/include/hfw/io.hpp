#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "hfw/config.hpp"

namespace hfw {

using Json = nlohmann::ordered_json;

// Comma separated, header row, '.' decimals via format_real.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void add_row(const std::vector<double>& values);
  void add_row(const std::vector<std::string>& cells);
  size_t rows() const { return rows_.size(); }
  std::string text() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string sha256_hex(const std::string& bytes);
std::string read_file(const std::string& path);

// Log-log plot of columns of a CSV file against its first column.
std::string gnuplot_loglog_script(const std::string& csv_name, const std::string& png_name,
                                  const std::vector<std::string>& series, const std::string& xlabel,
                                  const std::string& ylabel);

struct StageResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ProducedFile {
  std::string name;
  std::string sha256;
  size_t bytes = 0;
};

// Collects the files of one command invocation and writes manifest.json last.
class OutputSet {
 public:
  OutputSet(std::string dir, std::string command);
  const std::string& dir() const { return dir_; }
  void write(const std::string& name, const std::string& content);
  void write_csv(const std::string& name, const CsvTable& table) { write(name, table.text()); }
  void write_json(const std::string& name, const Json& j);
  void stage(const std::string& name, bool pass, const std::string& detail = "");
  const std::vector<StageResult>& stages() const { return stages_; }
  const std::vector<ProducedFile>& files() const { return files_; }
  // Returns the manifest written to <dir>/manifest.json.
  Json finish(const RunConfig& cfg, const std::string& command_line, int exit_code);

 private:
  std::string dir_;
  std::string command_;
  std::string started_;
  std::vector<ProducedFile> files_;
  std::vector<StageResult> stages_;
};

// Recomputes every digest listed in a manifest; returns the names that do not match.
std::vector<std::string> verify_manifest(const std::string& dir);

extern const char* const kToolVersion;

}  // namespace hfw
