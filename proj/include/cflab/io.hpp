#pragma once

// CSV artifacts. Every file has a header row; doubles are written with 17
// significant digits so values round-trip exactly.

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cflab/bernstein.hpp"
#include "cflab/characteristics.hpp"
#include "cflab/error.hpp"
#include "cflab/kinetic.hpp"
#include "cflab/report.hpp"
#include "cflab/stochastic.hpp"

namespace cflab::io {

inline std::string num(double v) { return fmt::format("{:.17g}", v); }

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path), path_(path) {
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

  void row(std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
      out_ << (first ? "" : ",") << num(v);
      first = false;
    }
    out_ << '\n';
  }

  ~CsvWriter() { out_.flush(); }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

/// Parsed numeric CSV: header names and rows of doubles.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ParseError("missing column '" + name + "'");
  }
};

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactMissing("missing artifact " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  table.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != table.header.size())
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": wrong column count");
    std::vector<double> row;
    for (const auto& c : cells) {
      // strtod rather than stod: subnormal values are valid data, not errors.
      char* end = nullptr;
      const double v = c.empty() ? 0.0 : std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size() || std::isspace(static_cast<unsigned char>(c[0])))
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + c + "'");
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

// --- trajectory ------------------------------------------------------------

inline void write_trajectory(const std::filesystem::path& path, const MomentSeries& series) {
  CsvWriter w(path, {"t", "m0", "m1", "m2", "m3", "m4", "m5", "mass_drift", "top_bin_occupancy"});
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& m = series.moments[i];
    w.row({series.times[i], m[0], m[1], m[2], m[3], m[4], m[5], series.mass_drift[i],
           series.top_bin_occupancy[i]});
  }
}

inline MomentSeries read_trajectory(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  const std::size_t ct = table.column("t");
  std::size_t cm[6];
  for (int k = 0; k < 6; ++k) cm[k] = table.column("m" + std::to_string(k));
  const std::size_t cd = table.column("mass_drift");
  const std::size_t co = table.column("top_bin_occupancy");
  MomentSeries s;
  for (const auto& r : table.rows) {
    if (!s.times.empty() && !(r[ct] > s.times.back()))
      throw ParseError(path.string() + ": times not strictly increasing");
    s.times.push_back(r[ct]);
    Moments m{};
    for (int k = 0; k < 6; ++k) m[k] = r[cm[k]];
    s.moments.push_back(m);
    s.mass_drift.push_back(r[cd]);
    s.top_bin_occupancy.push_back(r[co]);
  }
  return s;
}

// --- snapshots (long format: one row per (t, bin)) -------------------------

inline void write_snapshots(const std::filesystem::path& path,
                            const std::vector<kinetic::Snapshot>& snaps) {
  CsvWriter w(path, {"t", "s", "N"});
  for (const auto& snap : snaps) {
    const auto& g = snap.dist.grid();
    for (std::size_t b = 0; b < g.bins(); ++b) w.row({snap.t, g.size(b), snap.dist.count(b)});
  }
}

inline std::vector<kinetic::Snapshot> read_snapshots(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  const std::size_t ct = table.column("t"), cs = table.column("s"), cn = table.column("N");
  std::vector<kinetic::Snapshot> out;
  std::size_t i = 0;
  while (i < table.rows.size()) {
    const double t = table.rows[i][ct];
    std::vector<double> sizes, counts;
    for (; i < table.rows.size() && table.rows[i][ct] == t; ++i) {
      sizes.push_back(table.rows[i][cs]);
      counts.push_back(table.rows[i][cn]);
    }
    if (sizes.size() < 2) throw ParseError(path.string() + ": snapshot with < 2 bins");
    const double ds = sizes.front();
    for (std::size_t b = 0; b < sizes.size(); ++b)
      if (std::abs(sizes[b] - ds * static_cast<double>(b + 1)) > 1e-9 * sizes[b])
        throw ParseError(path.string() + ": sizes are not a uniform lattice");
    try {
      out.push_back({t, Distribution(SizeGrid(ds, sizes.size()), std::move(counts))});
    } catch (const std::invalid_argument& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  return out;
}

// --- fields, fans, ensembles, reports ---------------------------------------

/// `residual` may be empty (written as NaN).
inline void write_field(const std::filesystem::path& path, const bernstein::BernsteinField& f,
                        const std::vector<double>& residual) {
  CsvWriter w(path, {"x", "t", "F", "Fx", "Fxx", "G_eps", "residual"});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t ti = 0; ti < f.nt(); ++ti)
    for (std::size_t xi = 0; xi < f.nx(); ++xi) {
      const std::size_t i = f.index(ti, xi);
      w.row({f.x_grid[xi], f.times[ti], f.F[i], f.Fx[i], f.Fxx[i], f.has_g() ? f.G_eps[i] : nan,
             residual.empty() ? nan : residual[i]});
    }
}

inline void write_fan(const std::filesystem::path& path, const hj::CharacteristicFan& fan) {
  CsvWriter w(path, {"start_x", "t", "X", "P", "Z", "terminated_flag"});
  for (const auto& p : fan.paths)
    for (std::size_t k = 0; k < p.states.size(); ++k) {
      const auto& s = p.states[k];
      const bool last = k + 1 == p.states.size();
      w.row({p.start, fan.times[k], s.X, s.P, s.Z, (p.terminated && last) ? 1.0 : 0.0});
    }
}

inline void write_ensemble(const std::filesystem::path& path,
                           const stochastic::EnsembleMoments& e) {
  CsvWriter w(path, {"t", "mean_m0", "mean_m1", "mean_m2", "mean_m3", "stderr_m0", "stderr_m1",
                     "stderr_m2", "stderr_m3", "replicas"});
  for (std::size_t i = 0; i < e.times.size(); ++i) {
    const auto& m = e.mean[i];
    const auto& s = e.stderr_[i];
    w.row({e.times[i], m[0], m[1], m[2], m[3], s[0], s[1], s[2], s[3],
           static_cast<double>(e.replicas)});
  }
}

inline void write_report(const std::filesystem::path& path, const std::vector<BoundReport>& rows) {
  CsvWriter w(path, {"name", "status", "worst_margin", "t", "x_or_k"});
  for (const auto& r : rows)
    w.row({r.name, r.passed() ? "PASS" : "FAIL", num(r.worst_margin), num(r.t), num(r.x_or_k)});
}

}  // namespace cflab::io
