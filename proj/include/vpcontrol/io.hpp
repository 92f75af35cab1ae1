#pragma once

// File formats: ensemble checkpoints, grid dumps, solution exports and
// optimizer traces.

#include "vpcontrol/control.hpp"
#include "vpcontrol/fields.hpp"
#include "vpcontrol/phase_space.hpp"
#include "vpcontrol/poisson.hpp"
#include "vpcontrol/vlasov.hpp"

#include <boost/crc.hpp>
#include <nlohmann/json.hpp>

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

namespace vpc::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Ensemble checkpoint (little-endian binary):
//   8-byte magic "VPCENS01", uint64 count,
//   doubles h, A, r_x, r_v, t,
//   count rows of 13 doubles: origin_x[3] origin_v[3] pos_x[3] pos_v[3] value

inline constexpr char kEnsembleMagic[8] = {'V', 'P', 'C', 'E', 'N', 'S', '0', '1'};

struct Checkpoint {
  ParticleEnsemble ensemble;
  double time = 0.0;
};

inline void write_ensemble(const std::string& path, const ParticleEnsemble& ens, double time) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write checkpoint " + path);
  out.write(kEnsembleMagic, sizeof kEnsembleMagic);
  const std::uint64_t count = ens.size();
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  const double header[5] = {ens.spacing, ens.datum.amplitude, ens.datum.r_x, ens.datum.r_v, time};
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  std::vector<double> row(13);
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const auto& o = ens.origins[i];
    const auto& p = ens.points[i];
    for (int a = 0; a < 3; ++a) {
      row[a] = o.x[a];
      row[3 + a] = o.v[a];
      row[6 + a] = p.x[a];
      row[9 + a] = p.v[a];
    }
    row[12] = ens.values[i];
    out.write(reinterpret_cast<const char*>(row.data()), 13 * sizeof(double));
  }
  if (!out) throw Error("io", "short write to checkpoint " + path);
}

inline Checkpoint read_ensemble(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("config-reference", "cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + 8, kEnsembleMagic)) throw InvalidArgument(path + " is not an ensemble checkpoint");
  std::uint64_t count = 0;
  double header[5];
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in) throw InvalidArgument("truncated checkpoint header in " + path);
  Checkpoint cp;
  auto& ens = cp.ensemble;
  ens.spacing = header[0];
  const double h3 = header[0] * header[0] * header[0];
  ens.weight = h3 * h3;
  ens.datum = InitialDatum{header[1], header[2], header[3]};
  cp.time = header[4];
  ens.origins.resize(count);
  ens.points.resize(count);
  ens.values.resize(count);
  std::vector<double> row(13);
  for (std::uint64_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(row.data()), 13 * sizeof(double));
    if (!in) throw InvalidArgument("truncated checkpoint body in " + path);
    for (int a = 0; a < 3; ++a) {
      ens.origins[i].x[a] = row[a];
      ens.origins[i].v[a] = row[3 + a];
      ens.points[i].x[a] = row[6 + a];
      ens.points[i].v[a] = row[9 + a];
    }
    ens.values[i] = row[12];
  }
  return cp;
}

// ---------------------------------------------------------------------------
// Grid dumps: raw doubles (C order, components innermost) + JSON sidecar.

template <class T>
void write_grid(const std::string& base, const GridField<T>& g, double time, const std::string& name) {
  constexpr int comps = std::is_same_v<T, double> ? 1 : 3;
  {
    std::ofstream out(base + ".bin", std::ios::binary);
    if (!out) throw Error("io", "cannot write grid dump " + base + ".bin");
    for (const auto& v : g.data) {
      if constexpr (comps == 1) {
        out.write(reinterpret_cast<const char*>(&v), sizeof(double));
      } else {
        const double c[3] = {v[0], v[1], v[2]};
        out.write(reinterpret_cast<const char*>(c), sizeof c);
      }
    }
  }
  nlohmann::json j;
  j["field"] = name;
  j["time"] = time;
  j["center"] = {g.spec.center[0], g.spec.center[1], g.spec.center[2]};
  j["half_extent"] = g.spec.half_extent;
  j["n"] = g.spec.n;
  j["components"] = comps;
  j["layout"] = "row-major (i, j, k[, component]), float64 little-endian";
  std::ofstream side(base + ".json");
  side << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

inline std::string crc32_of_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  boost::crc_32_type crc;
  crc.process_bytes(buf.data(), buf.size());
  char hex[9];
  std::snprintf(hex, sizeof hex, "%08x", crc.checksum());
  return hex;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline nlohmann::json numerics_to_json(const Numerics& n) {
  return {{"h", n.h},
          {"dt", n.dt},
          {"grid_n", n.grid_n},
          {"snapshot_stride", n.snapshot_stride},
          {"efield_stride", n.efield_stride},
          {"grid_half_extent", n.grid_half_extent},
          {"electric", n.electric},
          {"poisson", n.poisson == PoissonMethod::Fourier ? "fourier" : "direct"}};
}

/// t, E, kinetic, field, L1, L2, Linf, P, Q, S
inline void write_diagnostics_csv(const std::string& path, const SolutionRecord& rec) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path);
  out << "t,energy,kinetic,field,norm1,norm2,norminf,P,Q,S\n";
  for (std::size_t k = 0; k < rec.times.size(); ++k) {
    const EnergyParts e = k < rec.energy_series.size() ? rec.energy_series[k] : EnergyParts{};
    const auto& nr = rec.norm_series[k];
    const auto& r = rec.radii_series[k];
    out << fmt(rec.times[k]) << ',' << fmt(e.total()) << ',' << fmt(e.kinetic) << ',' << fmt(e.field) << ','
        << fmt(nr[0]) << ',' << fmt(nr[1]) << ',' << fmt(nr[2]) << ',' << fmt(r.P) << ',' << fmt(r.Q) << ','
        << fmt(r.S) << '\n';
  }
}

/// Directory export: diagnostics.csv, snapshots/ens_XXXX.bin, field.json
/// and the returned manifest fragment (files with CRC-32 checksums).
inline nlohmann::json export_record(const std::string& dir, const SolutionRecord& rec, bool snapshots = true) {
  fs::create_directories(dir);
  nlohmann::json files = nlohmann::json::object();
  auto add = [&](const std::string& rel) { files[rel] = crc32_of_file((fs::path(dir) / rel).string()); };

  write_diagnostics_csv((fs::path(dir) / "diagnostics.csv").string(), rec);
  add("diagnostics.csv");
  write_field_file((fs::path(dir) / "field.json").string(), rec.field_params);
  add("field.json");
  if (snapshots) {
    fs::create_directories(fs::path(dir) / "snapshots");
    for (std::size_t k = 0; k < rec.positions.size(); ++k) {
      char name[64];
      std::snprintf(name, sizeof name, "snapshots/ens_%04zu.bin", k);
      write_ensemble((fs::path(dir) / name).string(), rec.ensemble_at(k), rec.position_times[k]);
      add(name);
    }
  }
  if (!rec.trace.tags.empty()) {
    rec.trace.write_csv((fs::path(dir) / "trajectories.csv").string());
    add("trajectories.csv");
  }
  nlohmann::json m;
  m["numerics"] = numerics_to_json(rec.numerics);
  m["grid"] = {{"half_extent", rec.grid.half_extent}, {"n", rec.grid.n}};
  m["datum"] = {{"amplitude", rec.datum.amplitude}, {"r_x", rec.datum.r_x}, {"r_v", rec.datum.r_v}};
  m["steps"] = rec.n_steps;
  m["dt"] = rec.dt;
  m["markers"] = rec.final_state.size();
  m["files"] = files;
  return m;
}

/// iter, J, tracking, regularization, v_norm, alpha, accepted
inline void write_trace_csv(const std::string& path, const OptTrace& trace) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path);
  out << "iter,J,tracking,regularization,v_norm,alpha,accepted\n";
  for (const auto& it : trace.iterates)
    out << it.iter << ',' << fmt(it.cost.total) << ',' << fmt(it.cost.tracking) << ','
        << fmt(it.cost.regularization) << ',' << fmt(it.v_norm) << ',' << fmt(it.alpha) << ','
        << (it.accepted ? 1 : 0) << '\n';
}

}  // namespace vpc::io
