#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "mulopt/error.hpp"
#include "mulopt/pareto.hpp"
#include "mulopt/run.hpp"

namespace mulopt {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return os.str();
}

// Writes a sibling temp file, flushes it to disk, then renames it over `path`.
// Readers see either the old contents or the new, never a prefix.
inline void write_file_atomic(const fs::path& path, const std::string& contents) {
  static std::atomic<unsigned> counter{0};
  const auto dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  const auto tmp = dir / ("." + path.filename().string() + ".tmp." + std::to_string(::getpid()) + "." +
                          std::to_string(counter++));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw IoError("cannot write " + tmp.string());
    }
  }
  if (FILE* f = std::fopen(tmp.c_str(), "rb")) {
    ::fsync(::fileno(f));
    std::fclose(f);
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + path.string());
  }
}

// ---- CSV --------------------------------------------------------------------

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string pareto_to_csv(const ParetoSet& set) {
  std::string out = "area,delay,label\n";
  for (const auto& p : set.sorted()) out += format_double(p.area) + "," + format_double(p.delay) + "," + p.label + "\n";
  return out;
}

// (area, delay) rows of any CSV with those two header columns: run logs,
// Pareto files, and sample files all qualify. Rows get `label` unless the
// file has its own label column.
inline std::vector<ParetoPoint> read_points_csv(const std::string& text, const std::string& label,
                                               const std::string& source = "input") {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw IoError(source + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  int ia = -1, id = -1, il = -1;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    if (header[i] == "area") ia = i;
    if (header[i] == "delay") id = i;
    if (header[i] == "label") il = i;
  }
  if (ia < 0 || id < 0) throw IoError(source + " lacks area and delay columns");
  std::vector<ParetoPoint> out;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != static_cast<int>(header.size()))
      throw IoError(source + " row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                    " fields, expected " + std::to_string(header.size()));
    ParetoPoint p;
    try {
      std::size_t used = 0;
      p.area = std::stod(cells[ia], &used);
      if (used != cells[ia].size()) throw std::invalid_argument("trailing text");
      p.delay = std::stod(cells[id], &used);
      if (used != cells[id].size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw IoError(source + " row " + std::to_string(row) + " has a non-numeric area or delay");
    }
    p.label = il >= 0 ? cells[il] : label;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace mulopt
