#pragma once

// Artifact serialization: CSV tables, JSON documents, and flat-binary grid
// fields with a JSON sidecar header.  All numeric formatting is fixed
// (%.12g for CSV, shortest-roundtrip for JSON), so identical inputs produce
// byte-identical artifacts.

#include <complex>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "desclab/grid.hpp"

namespace desclab {

using ordered_json = nlohmann::ordered_json;

inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// Rectangular CSV with a fixed header; cells are preformatted strings or
// doubles rendered through fmt_g.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header)
      : header_(std::move(header)) {}

  class Row {
   public:
    Row& cell(const std::string& s) {
      cells_.push_back(s);
      return *this;
    }
    Row& cell(double v) { return cell(fmt_g(v)); }
    Row& cell(int v) { return cell(std::to_string(v)); }
    Row& cell(std::size_t v) { return cell(std::to_string(v)); }

   private:
    friend class CsvTable;
    std::vector<std::string> cells_;
  };

  Row& add_row() {
    rows_.emplace_back();
    return rows_.back();
  }

  std::size_t n_rows() const { return rows_.size(); }

  std::string str() const {
    std::string out = join(header_);
    for (const Row& r : rows_) {
      if (r.cells_.size() != header_.size())
        throw std::logic_error("csv row width does not match the header");
      out += join(r.cells_);
    }
    return out;
  }

 private:
  static std::string join(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += ',';
      if (cells[i].find_first_of(",\"\n") != std::string::npos)
        throw std::logic_error("csv cell needs quoting: " + cells[i]);
      line += cells[i];
    }
    line += '\n';
    return line;
  }

  std::vector<std::string> header_;
  std::vector<Row> rows_;
};

inline void write_text(const std::filesystem::path& path,
                       const std::string& content) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string json_str(const ordered_json& j) { return j.dump(2) + "\n"; }

inline void write_json(const std::filesystem::path& path,
                       const ordered_json& j) {
  write_text(path, json_str(j));
}

// Grid field as <base>.json (header) + <base>.bin (row-major, t-major,
// interleaved re/im doubles, little-endian host order).
inline void write_field(const std::filesystem::path& base,
                        const GridField& u) {
  ordered_json header;
  header["dims"] = {u.spec.n_t, u.spec.n_x};
  header["spacing"] = {u.spec.h_t(), u.spec.h_x()};
  header["extent"] = {u.spec.T, u.spec.X};
  header["boundary"] = u.spec.boundary == BoundaryRule::periodic
                           ? "periodic"
                           : "dirichlet_zero";
  header["dtype"] = "complex128";
  header["order"] = "row-major";
  header["data"] = base.filename().string() + ".bin";
  std::filesystem::path jpath = base;
  jpath += ".json";
  write_json(jpath, header);

  std::filesystem::path bpath = base;
  bpath += ".bin";
  if (bpath.has_parent_path())
    std::filesystem::create_directories(bpath.parent_path());
  std::ofstream out(bpath, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open for writing: " + bpath.string());
  static_assert(sizeof(std::complex<double>) == 16);
  out.write(reinterpret_cast<const char*>(u.values.data()),
            static_cast<std::streamsize>(16 * u.values.size()));
  if (!out) throw std::runtime_error("write failed: " + bpath.string());
}

inline GridField read_field(const std::filesystem::path& base) {
  std::filesystem::path jpath = base;
  jpath += ".json";
  std::ifstream jin(jpath);
  if (!jin) throw std::runtime_error("cannot open: " + jpath.string());
  ordered_json header = ordered_json::parse(jin);

  GridSpec spec;
  spec.n_t = header.at("dims")[0].get<int>();
  spec.n_x = header.at("dims")[1].get<int>();
  spec.T = header.at("extent")[0].get<double>();
  spec.X = header.at("extent")[1].get<double>();
  spec.boundary = header.at("boundary").get<std::string>() == "periodic"
                      ? BoundaryRule::periodic
                      : BoundaryRule::dirichlet_zero;
  if (header.at("dtype").get<std::string>() != "complex128")
    throw std::runtime_error("unsupported field dtype");

  GridField u(spec);
  std::filesystem::path bpath = base;
  bpath += ".bin";
  std::ifstream bin(bpath, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open: " + bpath.string());
  bin.read(reinterpret_cast<char*>(u.values.data()),
           static_cast<std::streamsize>(16 * u.values.size()));
  if (bin.gcount() != static_cast<std::streamsize>(16 * u.values.size()))
    throw std::runtime_error("short read: " + bpath.string());
  return u;
}

}  // namespace desclab
