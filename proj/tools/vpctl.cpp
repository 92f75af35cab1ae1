// vpctl: simulate, optimize and verify from an INI configuration.
//
//   vpctl simulate run.ini [--out DIR]
//   vpctl optimize run.ini [--out DIR]
//   vpctl verify run.ini [--suite poisson,speed,...] [--out DIR]
//
// Exit codes: 0 success, 2 config error, 3 runtime error, 4 verification
// failure. Every run writes DIR/manifest.json, also on failure.

#include "vpcontrol/vpcontrol.hpp"

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using json = nlohmann::json;

namespace {

enum Exit { kOk = 0, kConfig = 2, kRuntime = 3, kVerify = 4 };

class ConfigError : public vpc::Error {
public:
  ConfigError(const std::string& code, const std::string& what) : vpc::Error(code, what) {}
};

int exit_code_for(const vpc::Error& e) {
  const std::string& c = e.code();
  if (c == "config" || c == "config-reference" || c == "invalid-argument") return kConfig;
  return kRuntime;
}

// ---------------------------------------------------------------------------
// Configuration

struct RunConfig {
  fs::path source;
  vpc::InitialDatum datum;
  vpc::FieldParams field;
  std::string field_file;
  vpc::Numerics numerics;
  double lambda = 1e-3;
  fs::path out = "out";
  bool snapshots = true;

  std::string target_field;
  std::string target_checkpoint;

  vpc::OptOptions opt;
  bool start_zero = true;

  std::vector<std::string> suites;
  double tol_speed = 1e-13;
  vpc::verify::PoissonTolerances tol_poisson;
  vpc::verify::FlowTolerances tol_flow;
  vpc::verify::ConservationTolerances tol_conservation;
  vpc::verify::FlowOptions flow;
  vpc::verify::LipschitzOptions lipschitz;
  int poisson_n = 32;
};

template <class T>
T get(const pt::ptree& tree, const std::string& key, T fallback) {
  try {
    return tree.get<T>(key, fallback);
  } catch (const pt::ptree_error&) {
    throw ConfigError("config", "bad value for " + key);
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::string resolve(const fs::path& base, const std::string& rel) {
  if (rel.empty()) return rel;
  const fs::path p(rel);
  const fs::path full = p.is_absolute() ? p : base / p;
  if (!fs::exists(full)) throw ConfigError("config-reference", "referenced file not found: " + full.string());
  return full.string();
}

void check_keys(const pt::ptree& tree) {
  static const std::set<std::string> known = {
      "datum.amplitude",       "datum.r_x",           "datum.r_v",
      "field.file",            "numerics.h",          "numerics.dt",
      "numerics.grid_n",       "numerics.snapshot_stride", "numerics.efield_stride",
      "numerics.grid_half_extent", "numerics.electric", "numerics.poisson",
      "numerics.trace_particles", "cost.lambda",      "cost.K",
      "cost.beta",             "cost.T",              "target.field",
      "target.checkpoint",     "optimize.budget",     "optimize.alpha0",
      "optimize.shrink",       "optimize.expand",     "optimize.sufficient_decrease",
      "optimize.gtol",         "optimize.gtol_rel",   "optimize.scheme",
      "optimize.step",         "optimize.directions", "optimize.seed",
      "optimize.start_zero",   "output.dir",          "output.snapshots",
      "verify.suites",         "verify.tol_speed",    "verify.tol_ball_potential",
      "verify.tol_ball_field", "verify.tol_methods",  "verify.tol_det",
      "verify.tol_inverse",    "verify.tol_energy",   "verify.tol_round_trip",
      "verify.tol_support",    "verify.round_trip_stride", "verify.points",
      "verify.seed",           "verify.poisson_n",    "verify.halvings",
      "verify.eps0",           "verify.random_pairs", "verify.slope_low",
      "verify.slope_high",     "verify.marker_stride", "verify.derivative_markers"};
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config", "key outside a section: " + section);
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      if (!known.count(full)) throw ConfigError("config", "unknown key " + full);
    }
  }
}

RunConfig parse_config(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("config-reference", "config file not found: " + path);
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config", e.what());
  }
  check_keys(tree);

  RunConfig c;
  c.source = path;
  const fs::path base = fs::absolute(path).parent_path();

  c.datum.amplitude = get(tree, "datum.amplitude", c.datum.amplitude);
  c.datum.r_x = get(tree, "datum.r_x", c.datum.r_x);
  c.datum.r_v = get(tree, "datum.r_v", c.datum.r_v);

  c.field_file = resolve(base, get<std::string>(tree, "field.file", ""));
  if (!c.field_file.empty()) c.field = vpc::read_field_file(c.field_file);
  c.field.K = get(tree, "cost.K", c.field.K);
  c.field.beta = get(tree, "cost.beta", c.field.beta);
  c.field.T = get(tree, "cost.T", c.field.T);
  c.lambda = get(tree, "cost.lambda", c.lambda);

  auto& n = c.numerics;
  n.h = get(tree, "numerics.h", n.h);
  n.dt = get(tree, "numerics.dt", n.dt);
  n.grid_n = get(tree, "numerics.grid_n", n.grid_n);
  n.snapshot_stride = get(tree, "numerics.snapshot_stride", n.snapshot_stride);
  n.efield_stride = get(tree, "numerics.efield_stride", n.efield_stride);
  n.grid_half_extent = get(tree, "numerics.grid_half_extent", n.grid_half_extent);
  n.electric = get(tree, "numerics.electric", n.electric);
  const auto poisson = get<std::string>(tree, "numerics.poisson", "fourier");
  if (poisson == "fourier") n.poisson = vpc::PoissonMethod::Fourier;
  else if (poisson == "direct") n.poisson = vpc::PoissonMethod::Direct;
  else throw ConfigError("config", "numerics.poisson must be fourier or direct");
  for (const auto& s : split_list(get<std::string>(tree, "numerics.trace_particles", ""))) {
    try {
      n.trace_particles.push_back(std::stoul(s));
    } catch (const std::exception&) {
      throw ConfigError("config", "bad particle index in numerics.trace_particles: " + s);
    }
  }

  c.target_field = resolve(base, get<std::string>(tree, "target.field", ""));
  c.target_checkpoint = resolve(base, get<std::string>(tree, "target.checkpoint", ""));
  if (!c.target_field.empty() && !c.target_checkpoint.empty())
    throw ConfigError("config", "target.field and target.checkpoint are mutually exclusive");

  auto& o = c.opt;
  o.budget = get(tree, "optimize.budget", o.budget);
  o.alpha0 = get(tree, "optimize.alpha0", o.alpha0);
  o.shrink = get(tree, "optimize.shrink", o.shrink);
  o.expand = get(tree, "optimize.expand", o.expand);
  o.sufficient_decrease = get(tree, "optimize.sufficient_decrease", o.sufficient_decrease);
  o.gtol = get(tree, "optimize.gtol", o.gtol);
  o.gtol_rel = get(tree, "optimize.gtol_rel", o.gtol_rel);
  const auto scheme = get<std::string>(tree, "optimize.scheme", "central");
  if (scheme == "central") o.grad.scheme = vpc::GradScheme::Central;
  else if (scheme == "spsa") o.grad.scheme = vpc::GradScheme::Simultaneous;
  else throw ConfigError("config", "optimize.scheme must be central or spsa");
  o.grad.step = get(tree, "optimize.step", o.grad.step);
  o.grad.directions = get(tree, "optimize.directions", o.grad.directions);
  o.grad.seed = get(tree, "optimize.seed", o.grad.seed);
  c.start_zero = get(tree, "optimize.start_zero", c.start_zero);

  c.out = get<std::string>(tree, "output.dir", "out");
  if (c.out.is_relative()) c.out = base / c.out;
  c.snapshots = get(tree, "output.snapshots", c.snapshots);

  c.suites = split_list(get<std::string>(tree, "verify.suites", "poisson,speed,flow,conservation"));
  c.tol_speed = get(tree, "verify.tol_speed", c.tol_speed);
  c.tol_poisson.ball_potential = get(tree, "verify.tol_ball_potential", c.tol_poisson.ball_potential);
  c.tol_poisson.ball_field = get(tree, "verify.tol_ball_field", c.tol_poisson.ball_field);
  c.tol_poisson.methods = get(tree, "verify.tol_methods", c.tol_poisson.methods);
  c.tol_flow.det = get(tree, "verify.tol_det", c.tol_flow.det);
  c.tol_flow.inverse = get(tree, "verify.tol_inverse", c.tol_flow.inverse);
  c.tol_conservation.energy = get(tree, "verify.tol_energy", c.tol_conservation.energy);
  c.tol_conservation.round_trip = get(tree, "verify.tol_round_trip", c.tol_conservation.round_trip);
  c.tol_conservation.support = get(tree, "verify.tol_support", c.tol_conservation.support);
  c.tol_conservation.round_trip_stride =
      get<std::size_t>(tree, "verify.round_trip_stride", c.tol_conservation.round_trip_stride);
  c.flow.points = get<std::size_t>(tree, "verify.points", c.flow.points);
  c.flow.seed = get<std::uint64_t>(tree, "verify.seed", c.flow.seed);
  c.poisson_n = get(tree, "verify.poisson_n", c.poisson_n);
  c.lipschitz.halvings = get(tree, "verify.halvings", c.lipschitz.halvings);
  c.lipschitz.eps0 = get(tree, "verify.eps0", c.lipschitz.eps0);
  c.lipschitz.random_pairs = get(tree, "verify.random_pairs", c.lipschitz.random_pairs);
  c.lipschitz.slope_low = get(tree, "verify.slope_low", c.lipschitz.slope_low);
  c.lipschitz.slope_high = get(tree, "verify.slope_high", c.lipschitz.slope_high);
  c.lipschitz.probe.marker_stride = get<std::size_t>(tree, "verify.marker_stride", c.lipschitz.probe.marker_stride);
  c.lipschitz.probe.derivative_markers =
      get<std::size_t>(tree, "verify.derivative_markers", c.lipschitz.probe.derivative_markers);

  try {
    c.datum.validate();
    c.field.validate();
    c.numerics.validate();
  } catch (const vpc::Error& e) {
    throw ConfigError("config", e.what());
  }
  if (!(c.lambda >= 0.0)) throw ConfigError("config", "cost.lambda must be >= 0");
  if (o.budget < 0) throw ConfigError("config", "optimize.budget must be >= 0");
  if (!(o.grad.step > 0.0)) throw ConfigError("config", "optimize.step must be > 0");
  if (!(o.shrink > 0.0 && o.shrink < 1.0)) throw ConfigError("config", "optimize.shrink must lie in (0, 1)");
  if (!(o.alpha0 > 0.0)) throw ConfigError("config", "optimize.alpha0 must be > 0");
  if (c.poisson_n < 8) throw ConfigError("config", "verify.poisson_n must be >= 8");
  return c;
}

// ---------------------------------------------------------------------------
// Output directory guard

class DirLock {
public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".vpctl.lock") {
    fs::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) throw vpc::Error("locked", "output directory in use (lock file " + path_.string() + ")");
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd_, pid.data(), pid.size()) < 0) {
    }
  }
  ~DirLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      std::error_code ec;
      fs::remove(path_, ec);
    }
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

private:
  fs::path path_;
  int fd_ = -1;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw vpc::Error("io", "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json datum_json(const vpc::InitialDatum& d) { return {{"amplitude", d.amplitude}, {"r_x", d.r_x}, {"r_v", d.r_v}}; }

// ---------------------------------------------------------------------------
// Subcommands

int cmd_simulate(const RunConfig& c, json& manifest) {
  vpc::Numerics num = c.numerics;
  num.keep_positions = c.snapshots;
  const auto rec = vpc::simulate(c.datum, c.field, num);
  json m = vpc::io::export_record(c.out.string(), rec, c.snapshots);
  vpc::io::write_ensemble((c.out / "final_state.bin").string(), rec.final_state, rec.T());
  m["files"]["final_state.bin"] = vpc::io::crc32_of_file((c.out / "final_state.bin").string());
  manifest.update(m);
  manifest["final_radii"] = {{"P", rec.final_radii.P}, {"Q", rec.final_radii.Q}, {"S", rec.final_radii.S}};
  if (!rec.energy_series.empty()) manifest["energy_drift"] = vpc::verify::energy_drift(rec);
  std::cout << "simulate: " << rec.final_state.size() << " markers, " << rec.n_steps << " steps, grid L = "
            << rec.grid.half_extent << ", Q(T) = " << rec.final_radii.Q << '\n';
  return kOk;
}

vpc::Target load_target(const RunConfig& c) {
  if (!c.target_checkpoint.empty()) {
    auto cp = vpc::io::read_ensemble(c.target_checkpoint);
    return {std::move(cp.ensemble), cp.time};
  }
  if (!c.target_field.empty()) {
    auto b = vpc::read_field_file(c.target_field);
    b.T = c.field.T;
    return vpc::make_target(b, c.datum, c.numerics);
  }
  throw ConfigError("config", "optimize needs target.field or target.checkpoint");
}

int cmd_optimize(const RunConfig& c, json& manifest) {
  if (c.field.dim() == 0) throw ConfigError("config", "optimize needs a parametrized field in field.file");
  const vpc::Target target = load_target(c);
  if (std::abs(target.T - c.field.T) > 1e-12 * c.field.T)
    throw ConfigError("config", "target time differs from the field final time");
  vpc::FieldParams start = c.start_zero ? vpc::FieldParams::zero_like(c.field) : c.field;

  auto quad = std::make_shared<vpc::NormQuadrature>(start.modes, vpc::QuadratureSpec{});
  vpc::CostFunctional j(target, c.lambda, c.datum, c.numerics, quad);
  const auto trace = vpc::optimize(start, j, *quad, c.opt);

  fs::create_directories(c.out / "iterates");
  json files = json::object();
  vpc::io::write_trace_csv((c.out / "trace.csv").string(), trace);
  files["trace.csv"] = vpc::io::crc32_of_file((c.out / "trace.csv").string());
  vpc::write_field_file((c.out / "best_field.json").string(), trace.best);
  files["best_field.json"] = vpc::io::crc32_of_file((c.out / "best_field.json").string());
  for (std::size_t k = 0; k < trace.iterates.size(); ++k) {
    const auto& it = trace.iterates[k];
    if (!it.accepted) continue;
    vpc::FieldParams p = start;
    p.theta = it.theta;
    char name[64];
    std::snprintf(name, sizeof name, "iterates/iter_%04d.json", it.iter);
    vpc::write_field_file((c.out / name).string(), p);
    files[name] = vpc::io::crc32_of_file((c.out / name).string());
  }

  const auto& first = trace.iterates.front().cost;
  manifest["optimizer_status"] = trace.status;
  manifest["evaluations"] = trace.evaluations;
  manifest["lambda"] = c.lambda;
  manifest["initial"] = {{"J", first.total}, {"tracking", first.tracking}, {"regularization", first.regularization}};
  manifest["best"] = {{"J", trace.best_cost.total},
                      {"tracking", trace.best_cost.tracking},
                      {"regularization", trace.best_cost.regularization}};
  manifest["gradient_norms"] = trace.gradient_norms;
  manifest["numerics"] = vpc::io::numerics_to_json(c.numerics);
  manifest["files"] = files;
  std::cout << "optimize: " << trace.status << " after " << trace.evaluations << " evaluations, J " << first.total
            << " -> " << trace.best_cost.total << '\n';
  return kOk;
}

int cmd_verify(const RunConfig& c, const std::vector<std::string>& suites, json& manifest) {
  namespace v = vpc::verify;
  std::vector<v::Check> checks;
  static const std::set<std::string> known = {"poisson", "speed", "flow", "conservation", "lipschitz"};
  for (const auto& s : suites)
    if (!known.count(s)) throw ConfigError("config", "unknown verify suite " + s);

  // Suites that need a nonzero control fall back to a seeded random one.
  auto control = [&] {
    if (c.field.dim() > 0) return c.field;
    vpc::RandomFieldSpec spec;
    spec.T = c.field.T;
    spec.beta = c.field.beta;
    spec.K = c.field.K;
    return vpc::random_admissible_field(spec, c.flow.seed);
  };

  for (const auto& s : suites) {
    std::vector<v::Check> part;
    if (s == "poisson") part = v::poisson_suite(c.poisson_n, c.tol_poisson);
    else if (s == "speed") part = v::speed_suite(c.datum, control(), c.numerics, c.tol_speed);
    else if (s == "flow") part = v::flow_suite(c.datum, c.field, c.numerics, c.tol_flow, c.flow);
    else if (s == "conservation") part = v::conservation_suite(vpc::simulate(c.datum, c.field, c.numerics), c.tol_conservation);
    else if (s == "lipschitz") part = v::lipschitz_suite(c.datum, control(), c.numerics, c.lipschitz);
    checks.insert(checks.end(), part.begin(), part.end());
  }

  json rows = json::array();
  std::printf("%-13s %-40s %-24s %-26s %s\n", "suite", "check", "measured", "tolerance", "result");
  for (const auto& ch : checks) {
    std::printf("%-13s %-40s %-24.17g %-26s %s\n", ch.suite.c_str(), ch.name.c_str(), ch.measured, ch.bound().c_str(),
                ch.pass ? "PASS" : "FAIL");
    rows.push_back({{"suite", ch.suite}, {"check", ch.name}, {"measured", ch.measured}, {"bound", ch.bound()},
                    {"pass", ch.pass}});
  }
  manifest["checks"] = rows;
  const bool ok = v::all_pass(checks);
  if (!ok) {
    std::vector<std::string> failed;
    for (const auto& ch : checks)
      if (!ch.pass) failed.push_back(ch.suite + "/" + ch.name);
    manifest["failed"] = failed;
    std::cerr << "error code=verification-failed checks=";
    for (std::size_t i = 0; i < failed.size(); ++i) std::cerr << (i ? ";" : "") << failed[i];
    std::cerr << '\n';
  }
  return ok ? kOk : kVerify;
}

std::string one_line(std::string s) {
  for (auto& ch : s)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Controlled Vlasov-Poisson simulation, optimization and verification"};
  app.require_subcommand(1);
  std::string config_path, out_override, suite_override;
  auto* sim = app.add_subcommand("simulate", "Run the particle-mesh solver and export diagnostics");
  auto* opt = app.add_subcommand("optimize", "Projected descent on the tracking cost");
  auto* ver = app.add_subcommand("verify", "Run property suites and print a pass/fail table");
  for (auto* sub : {sim, opt, ver}) {
    sub->add_option("config", config_path, "INI configuration file")->required();
    sub->add_option("--out", out_override, "Output directory (overrides output.dir)");
  }
  ver->add_option("--suite", suite_override, "Comma-separated suites: poisson,speed,flow,conservation,lipschitz");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  json manifest;
  manifest["command"] = command;
  manifest["config"] = config_path;

  fs::path out_dir = out_override.empty() ? fs::path() : fs::path(out_override);
  int rc = kOk;
  std::optional<DirLock> lock;
  const auto start = std::chrono::steady_clock::now();
  try {
    RunConfig cfg;
    try {
      cfg = parse_config(config_path);
    } catch (...) {
      if (out_dir.empty()) out_dir = fs::path(config_path).parent_path() / "out";
      throw;
    }
    if (!out_override.empty()) cfg.out = out_override;
    out_dir = cfg.out;
    lock.emplace(out_dir);
    manifest["datum"] = datum_json(cfg.datum);
    manifest["field"] = vpc::field_to_json(cfg.field);

    if (command == "simulate") rc = cmd_simulate(cfg, manifest);
    else if (command == "optimize") rc = cmd_optimize(cfg, manifest);
    else rc = cmd_verify(cfg, suite_override.empty() ? cfg.suites : split_list(suite_override), manifest);
    manifest["status"] = rc == kOk ? "ok" : "verification-failed";
  } catch (const vpc::Error& e) {
    rc = e.code() == "locked" ? kRuntime : exit_code_for(e);
    manifest["status"] = "error";
    manifest["error"] = {{"code", e.code()}, {"message", one_line(e.what())}};
    std::cerr << "error code=" << e.code() << " message=\"" << one_line(e.what()) << "\"\n";
    if (e.code() == "locked") return rc;
  } catch (const std::exception& e) {
    rc = kRuntime;
    manifest["status"] = "error";
    manifest["error"] = {{"code", "runtime"}, {"message", one_line(e.what())}};
    std::cerr << "error code=runtime message=\"" << one_line(e.what()) << "\"\n";
  }
  manifest["exit_code"] = rc;
  manifest["elapsed_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    if (out_dir.empty()) out_dir = "out";
    fs::create_directories(out_dir);
    write_json(out_dir / "manifest.json", manifest);
  } catch (const std::exception& e) {
    std::cerr << "error code=io message=\"cannot write manifest: " << one_line(e.what()) << "\"\n";
    if (rc == kOk) rc = kRuntime;
  }
  return rc;
}
