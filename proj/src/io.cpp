#include "hfw/io.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

namespace hfw {

const char* const kToolVersion = "0.1.0";

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void CsvTable::add_row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_real(v));
  add_row(cells);
}

void CsvTable::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != header_.size()) throw std::invalid_argument("CSV row width does not match the header");
  rows_.push_back(cells);
}

std::string CsvTable::text() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_cell(cells[i]);
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string gnuplot_loglog_script(const std::string& csv_name, const std::string& png_name,
                                  const std::vector<std::string>& series, const std::string& xlabel,
                                  const std::string& ylabel) {
  std::ostringstream s;
  s << "set datafile separator ','\n"
    << "set key autotitle columnhead left top\n"
    << "set logscale xy\n"
    << "set xlabel '" << xlabel << "'\n"
    << "set ylabel '" << ylabel << "'\n"
    << "set terminal pngcairo size 800,600\n"
    << "set output '" << png_name << "'\n"
    << "plot ";
  for (size_t i = 0; i < series.size(); ++i) {
    s << (i ? ", \\\n     " : "") << "'" << csv_name << "' using 1:(column('" << series[i]
      << "')) with linespoints title '" << series[i] << "'";
  }
  s << "\n";
  return s.str();
}

OutputSet::OutputSet(std::string dir, std::string command)
    : dir_(std::move(dir)), command_(std::move(command)), started_(utc_now()) {
  std::filesystem::create_directories(dir_);
}

void OutputSet::write(const std::string& name, const std::string& content) {
  const std::string path = (std::filesystem::path(dir_) / name).string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  out.close();
  if (!out) throw std::runtime_error("write failed for " + path);
  for (auto& f : files_) {
    if (f.name == name) {
      f = {name, sha256_hex(content), content.size()};
      return;
    }
  }
  files_.push_back({name, sha256_hex(content), content.size()});
}

void OutputSet::write_json(const std::string& name, const Json& j) { write(name, j.dump(2) + "\n"); }

void OutputSet::stage(const std::string& name, bool pass, const std::string& detail) {
  stages_.push_back({name, pass, detail});
}

Json OutputSet::finish(const RunConfig& cfg, const std::string& command_line, int exit_code) {
  Json m;
  m["tool"] = "hfwave";
  m["version"] = kToolVersion;
  m["command"] = command_;
  m["command_line"] = command_line;
  m["started"] = started_;
  m["finished"] = utc_now();
  m["exit_code"] = exit_code;
  Json c = Json::object();
  for (const auto& [k, v] : cfg.echo()) c[k] = v;
  m["config"] = c;
  Json files = Json::array();
  for (const auto& f : files_) files.push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  m["files"] = files;
  Json st = Json::array();
  for (const auto& s : stages_) st.push_back({{"name", s.name}, {"pass", s.pass}, {"detail", s.detail}});
  m["stages"] = st;
  const std::string path = (std::filesystem::path(dir_) / "manifest.json").string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << m.dump(2) << "\n";
  return m;
}

std::vector<std::string> verify_manifest(const std::string& dir) {
  const Json m = Json::parse(read_file((std::filesystem::path(dir) / "manifest.json").string()));
  std::vector<std::string> bad;
  for (const auto& f : m.at("files")) {
    const std::string name = f.at("name").get<std::string>();
    std::string content;
    try {
      content = read_file((std::filesystem::path(dir) / name).string());
    } catch (const std::exception&) {
      bad.push_back(name);
      continue;
    }
    if (sha256_hex(content) != f.at("sha256").get<std::string>() || content.size() != f.at("bytes").get<size_t>()) {
      bad.push_back(name);
    }
  }
  return bad;
}

}  // namespace hfw
