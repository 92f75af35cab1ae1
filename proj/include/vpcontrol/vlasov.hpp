#pragma once

// Particle-mesh transport of the lattice markers under the self-consistent
// field -grad psi_f and an external magnetic field B, the semi-Lagrangian
// point evaluation f(t, z) = f0(Z(0, t, z)), energy diagnostics and the
// empirical Lipschitz probe of B -> f_B.

#include "vpcontrol/characteristics.hpp"
#include "vpcontrol/core.hpp"
#include "vpcontrol/fields.hpp"
#include "vpcontrol/phase_space.hpp"
#include "vpcontrol/poisson.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vpc {

struct Numerics {
  double h = 0.25;              // lattice spacing
  double dt = 0.01;             // time step (rounded down to divide T)
  int grid_n = 32;              // grid points per axis
  int snapshot_stride = 10;     // diagnostics and position snapshots every k steps; T is always recorded
  int efield_stride = 1;        // stored E grids every k steps
  double grid_half_extent = 0;  // 0 selects auto-sizing
  bool electric = true;         // false freezes the self-consistent force at zero
  bool keep_positions = true;   // positions at every snapshot (otherwise only t = 0 and T)
  bool energy = true;           // energy at snapshots (one extra Poisson solve each)
  PoissonMethod poisson = PoissonMethod::Fourier;
  std::vector<std::size_t> trace_particles;

  void validate() const {
    require(std::isfinite(h) && h > 0.0, "numerics h must be > 0");
    require(std::isfinite(dt) && dt > 0.0, "numerics dt must be > 0");
    require(grid_n >= 8, "numerics grid_n must be >= 8");
    require(snapshot_stride >= 1, "snapshot_stride must be >= 1");
    require(efield_stride >= 1, "efield_stride must be >= 1");
    require(std::isfinite(grid_half_extent) && grid_half_extent >= 0.0, "grid_half_extent must be >= 0");
  }
};

struct EnergyParts {
  double kinetic = 0.0;
  double field = 0.0;
  double total() const { return kinetic + field; }
};

inline double kinetic_energy(std::span<const PhasePoint> points, std::span<const double> values, double weight) {
  double acc = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) acc += points[i].v.squaredNorm() * values[i];
  return 0.5 * acc * weight;
}

/// 1/2 sum |v_i|^2 f_i w + 1/2 int rho psi.
inline EnergyParts total_energy(const ParticleEnsemble& ens, const GridSpec& grid,
                                PoissonMethod method = PoissonMethod::Fourier) {
  EnergyParts out;
  out.kinetic = kinetic_energy(ens.points, ens.values, ens.weight);
  const auto rho = deposit_charge(ens, grid);
  out.field = potential_energy(rho, solve_potential(rho, method));
  return out;
}

struct SolutionRecord {
  InitialDatum datum;
  FieldParams field_params;
  Numerics numerics;
  GridSpec grid;
  double dt = 0.0;
  int n_steps = 0;

  std::vector<double> times;
  std::vector<int> steps;
  std::vector<double> position_times;             // every snapshot when keep_positions, else 0 and T
  std::vector<std::vector<PhasePoint>> positions;  // parallel to position_times
  std::vector<EnergyParts> energy_series;
  std::vector<std::array<double, 3>> norm_series;  // p = 1, 2, inf
  std::vector<SupportRadii> radii_series;

  ParticleEnsemble final_state;  // origins, values and positions at T
  SupportRadii final_radii;      // running maxima over every step

  std::vector<double> efield_times;  // step midpoints
  std::vector<VectorGrid> efields;

  TrajectoryTrace trace;

  double T() const { return field_params.T; }

  /// Ensemble at snapshot k (requires stored positions).
  ParticleEnsemble ensemble_at(std::size_t k) const {
    require(k < positions.size(), "snapshot index out of range");
    ParticleEnsemble e = final_state;
    e.points = positions[k];
    return e;
  }
};

/// Electric field from the current grid, magnetic field from the control.
struct GridForces {
  const VectorGrid* efield = nullptr;
  const FieldParams* bfield = nullptr;
  const GridSpec* domain = nullptr;

  Vec3 electric(double, const Vec3& x) const {
    if (efield) return interpolate_field(*efield, x);
    if (domain && !domain->contains(x)) throw DomainError("point " + detail::describe(x) + " outside the grid box");
    return Vec3::Zero();
  }
  Vec3 magnetic(double s, const Vec3& x) const { return bfield ? eval_field(*bfield, s, x) : Vec3::Zero(); }
};

/// Replays the stored fields of a finished run for characteristic
/// integration at arbitrary times: stored E grids (linear in time between
/// stored step midpoints) plus the control field.
class RunForces {
public:
  explicit RunForces(const SolutionRecord& rec) : rec_(&rec) {}

  Vec3 electric(double s, const Vec3& x) const {
    const auto& r = *rec_;
    if (r.efields.empty()) {
      if (!r.grid.contains(x)) throw DomainError("point " + detail::describe(x) + " outside the grid box");
      return Vec3::Zero();
    }
    const auto& ts = r.efield_times;
    const double tol = 1e-9 * r.dt;
    auto it = std::lower_bound(ts.begin(), ts.end(), s - tol);
    if (it != ts.end() && std::abs(*it - s) <= tol) return interpolate_field(r.efields[it - ts.begin()], x);
    if (it == ts.begin()) return interpolate_field(r.efields.front(), x);
    if (it == ts.end()) return interpolate_field(r.efields.back(), x);
    const std::size_t hi = it - ts.begin(), lo = hi - 1;
    const double w = (s - ts[lo]) / (ts[hi] - ts[lo]);
    return (1.0 - w) * interpolate_field(r.efields[lo], x) + w * interpolate_field(r.efields[hi], x);
  }

  Vec3 magnetic(double s, const Vec3& x) const { return eval_field(rec_->field_params, s, x); }

private:
  const SolutionRecord* rec_;
};

/// Half extent of the simulation box: 1.5 times the kinematic bound
/// Q(T) <= r_x + T r_v + T^2/2 max|E|, with max|E| taken from the initial
/// state on a box of half extent 1.5 r_x. B does not change speeds.
inline double auto_half_extent(const ParticleEnsemble& ens, double T, const Numerics& num) {
  const auto& d = ens.datum;
  double e0 = 0.0;
  if (num.electric && d.amplitude > 0.0 && !ens.empty()) {
    GridSpec probe{Vec3::Zero(), 1.5 * d.r_x, num.grid_n};
    PoissonSolver solver(probe);
    e0 = max_magnitude(electric_field(solver.solve(deposit_charge(ens, probe))));
  }
  const double q_bound = d.r_x + T * d.r_v + 0.5 * T * T * e0;
  return 1.5 * q_bound;
}

namespace detail {

inline void check_inside(const GridSpec& grid, std::span<const PhasePoint> pts) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!pts[i].finite()) throw NumericError("particle " + std::to_string(i) + " has non-finite coordinates");
    if (!grid.contains(pts[i].x))
      throw DomainError("particle " + std::to_string(i) + " escaped the grid box at x = " + describe(pts[i].x));
  }
}

inline void check_finite(const VectorGrid& e) {
  for (const auto& v : e.data)
    if (!all_finite(v)) throw NumericError("electric field contains non-finite values");
}

}  // namespace detail

/// Self-consistent field at the given marker positions.
class FieldSolver {
public:
  FieldSolver(const GridSpec& grid, PoissonMethod method) : grid_(grid), method_(method) {
    if (method_ == PoissonMethod::Fourier) fourier_.emplace(grid_);
  }

  VectorGrid efield(std::span<const PhasePoint> points, std::span<const double> values, double weight) {
    auto e = electric_field(potential(points, values, weight).second);
    detail::check_finite(e);
    return e;
  }

  double energy(std::span<const PhasePoint> points, std::span<const double> values, double weight) {
    const auto [rho, psi] = potential(points, values, weight);
    return potential_energy(rho, psi);
  }

private:
  std::pair<ScalarGrid, ScalarGrid> potential(std::span<const PhasePoint> points, std::span<const double> values,
                                              double weight) {
    auto rho = deposit_charge(points, values, weight, grid_);
    auto psi = fourier_ ? fourier_->solve(rho) : solve_potential_direct(rho);
    return {std::move(rho), std::move(psi)};
  }

  GridSpec grid_;
  PoissonMethod method_;
  std::optional<PoissonSolver> fourier_;
};

/// Forward particle-mesh run of the controlled system on [0, B.T].
inline SolutionRecord simulate(const InitialDatum& datum, const FieldParams& b, const Numerics& num) {
  num.validate();
  b.validate();
  datum.validate();

  SolutionRecord rec;
  rec.datum = datum;
  rec.field_params = b;
  rec.numerics = num;
  const double T = b.T;
  rec.n_steps = step_count(T, 0.0, num.dt);
  rec.dt = T / rec.n_steps;
  const double dt = rec.dt;

  ParticleEnsemble ens = sample_ensemble(datum, num.h);
  const double half = num.grid_half_extent > 0.0 ? num.grid_half_extent : auto_half_extent(ens, T, num);
  rec.grid = GridSpec{Vec3::Zero(), half, num.grid_n};
  rec.grid.validate();
  detail::check_inside(rec.grid, ens.points);

  std::optional<FieldSolver> solver;
  if (num.electric) solver.emplace(rec.grid, num.poisson);
  const std::span<const double> values(ens.values);

  rec.trace.tags = num.trace_particles;
  SupportRadii radii = support_radii(ens);

  auto snapshot = [&](int step) {
    const double t = step == rec.n_steps ? T : step * dt;
    rec.times.push_back(t);
    rec.steps.push_back(step);
    const std::span<const PhasePoint> pts(ens.points);
    if (num.keep_positions || step == 0 || step == rec.n_steps) {
      rec.position_times.push_back(t);
      rec.positions.push_back(ens.points);
    }
    rec.norm_series.push_back({lp_norm(ens, 1.0), lp_norm(ens, 2.0), lp_norm(ens, kInfNorm)});
    rec.radii_series.push_back(radii);
    if (num.energy) {
      EnergyParts e;
      e.kinetic = kinetic_energy(pts, values, ens.weight);
      if (solver) e.field = solver->energy(pts, values, ens.weight);
      rec.energy_series.push_back(e);
    }
  };

  snapshot(0);
  rec.trace.record(0.0, ens.points);

  std::vector<PhasePoint> mids(ens.size());
  for (int n = 0; n < rec.n_steps; ++n) {
    const double s = n * dt;
    const double mid = s + 0.5 * dt;
    GridForces forces{nullptr, &b, &rec.grid};
    VectorGrid e;
    if (solver) {
      for (std::size_t p = 0; p < ens.size(); ++p) mids[p].x = ens.points[p].x + (0.5 * dt) * ens.points[p].v;
      e = solver->efield(mids, values, ens.weight);
      forces.efield = &e;
    }
    for (std::size_t p = 0; p < ens.size(); ++p) ens.points[p] = push_step(ens.points[p], forces, s, dt);
    detail::check_inside(rec.grid, ens.points);
    if (solver && (n % num.efield_stride == 0 || n == rec.n_steps - 1)) {
      rec.efield_times.push_back(mid);
      rec.efields.push_back(std::move(e));
    }
    radii = support_radii(ens, radii);
    rec.trace.record(n + 1 == rec.n_steps ? T : (n + 1) * dt, ens.points);
    if ((n + 1) % num.snapshot_stride == 0 || n + 1 == rec.n_steps) snapshot(n + 1);
  }
  rec.final_radii = radii;
  rec.final_state = std::move(ens);
  return rec;
}

struct PointValue {
  double value = 0.0;
  bool outside = false;  // foot point provably outside the reachable support
};

/// f(t, z) = f0(Z(0, t, z)) by backward characteristic integration through
/// the stored fields of `rec`.
inline PointValue eval_f(const SolutionRecord& rec, double t, const PhasePoint& z) {
  const double T = rec.T();
  require(t >= -1e-12 * T && t <= T * (1 + 1e-12), "eval_f time outside [0, T]");
  if (t <= 0.0) return {rec.datum(z), false};
  // supp f(s) lies in |x| <= Q(T) for every s <= T; a characteristic that
  // leaves a box containing that ball with margin carries f = 0.
  auto provably_outside = [&]() {
    if (rec.final_radii.Q * 1.2 <= rec.grid.half_extent) return true;
    throw DomainError("characteristic left the grid box, which does not cover the support with margin");
  };
  if (!rec.grid.contains(z.x)) return {0.0, provably_outside()};
  const RunForces forces(rec);
  const double ratio = t / rec.dt;
  const int n = std::abs(ratio - std::round(ratio)) < 1e-9 ? std::max(1, static_cast<int>(std::round(ratio)))
                                                           : step_count(0.0, t, rec.dt);
  const double step = -t / n;
  PhasePoint cur = z;
  try {
    for (int k = 0; k < n; ++k) {
      cur = push_step(cur, forces, t + k * step, step);
      if (!rec.grid.contains(cur.x)) return {0.0, provably_outside()};
    }
  } catch (const DomainError&) {
    return {0.0, provably_outside()};
  }
  return {rec.datum(cur), false};
}

struct ProbeEntry {
  double sup_diff_f = 0.0;   // max over snapshots and markers of |f_B - f_H|
  double sup_diff_df = 0.0;  // max over sampled markers of |d_z f_B(T) - d_z f_H(T)|
  double w_dist = 0.0;       // ||B - H||_W
  double ratio = 0.0;        // sup_diff_f / w_dist
};

struct ProbeReport {
  std::vector<ProbeEntry> pairs;
  double max_ratio = 0.0;
  double slope = std::numeric_limits<double>::quiet_NaN();        // log sup_diff_f vs log w_dist
  double hoelder_fit = std::numeric_limits<double>::quiet_NaN();  // log sup_diff_df vs log w_dist
  std::vector<std::string> warnings;
};

struct ProbeOptions {
  std::size_t marker_stride = 7;        // subsample of markers for the sup norm
  std::size_t derivative_markers = 32;  // markers used for the derivative differences (0 disables)
  double derivative_step = 1e-3;
  QuadratureSpec quadrature{};
};

namespace detail {

inline double log_log_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (xs[i] > 0.0 && ys[i] > 0.0) {
      lx.push_back(std::log(xs[i]));
      ly.push_back(std::log(ys[i]));
    }
  if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= lx.size();
  my /= ly.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

inline std::array<double, 6> gradient_f(const SolutionRecord& rec, double t, const PhasePoint& z, double step) {
  std::array<double, 6> g{};
  for (int a = 0; a < 6; ++a) {
    PhasePoint p = z, m = z;
    if (a < 3) {
      p.x[a] += step;
      m.x[a] -= step;
    } else {
      p.v[a - 3] += step;
      m.v[a - 3] -= step;
    }
    g[a] = (eval_f(rec, t, p).value - eval_f(rec, t, m).value) / (2.0 * step);
  }
  return g;
}

}  // namespace detail

/// Sup-norm distance of f_B and f_H over the snapshots of the B run,
/// sampled at the B markers: |f0(z_i) - f_H(t, X_B(t, z_i))|.
inline double sup_difference(const SolutionRecord& rb, const SolutionRecord& rh, std::size_t marker_stride) {
  require(marker_stride >= 1, "marker stride must be >= 1");
  double sup = 0.0;
  const auto& values = rb.final_state.values;
  for (std::size_t k = 0; k < rb.positions.size(); ++k) {
    const double t = rb.position_times[k];
    if (t <= 0.0) continue;
    const auto& pts = rb.positions[k];
    for (std::size_t i = 0; i < pts.size(); i += marker_stride)
      sup = std::max(sup, std::abs(values[i] - eval_f(rh, t, pts[i]).value));
  }
  return sup;
}

inline double sup_derivative_difference(const SolutionRecord& rb, const SolutionRecord& rh, std::size_t count,
                                        double step) {
  if (count == 0) return 0.0;
  const auto& pts = rb.final_state.points;
  const std::size_t stride = std::max<std::size_t>(1, pts.size() / count);
  double sup = 0.0;
  for (std::size_t i = 0; i < pts.size(); i += stride) {
    const auto gb = detail::gradient_f(rb, rb.T(), pts[i], step);
    const auto gh = detail::gradient_f(rh, rh.T(), pts[i], step);
    for (int a = 0; a < 6; ++a) sup = std::max(sup, std::abs(gb[a] - gh[a]));
  }
  return sup;
}

using FieldPair = std::pair<FieldParams, FieldParams>;

inline ProbeReport lipschitz_probe(const std::vector<FieldPair>& pairs, const InitialDatum& datum,
                                   const Numerics& numerics, const ProbeOptions& opts = {}) {
  ProbeReport rep;
  std::optional<SolutionRecord> cached_b;
  std::vector<double> dists, diffs, ddiffs;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& [b, h] = pairs[k];
    const double wd = w_distance(b, h, opts.quadrature);
    if (!(wd > 0.0)) {
      rep.warnings.push_back("pair " + std::to_string(k) + " skipped: ||B - H||_W = 0");
      continue;
    }
    if (!cached_b || !(cached_b->field_params.theta == b.theta && cached_b->field_params.same_structure(b)))
      cached_b = simulate(datum, b, numerics);
    const auto rh = simulate(datum, h, numerics);
    ProbeEntry e;
    e.w_dist = wd;
    e.sup_diff_f = sup_difference(*cached_b, rh, opts.marker_stride);
    e.sup_diff_df = sup_derivative_difference(*cached_b, rh, opts.derivative_markers, opts.derivative_step);
    e.ratio = e.sup_diff_f / wd;
    rep.max_ratio = std::max(rep.max_ratio, e.ratio);
    rep.pairs.push_back(e);
    dists.push_back(wd);
    diffs.push_back(e.sup_diff_f);
    ddiffs.push_back(e.sup_diff_df);
  }
  rep.slope = detail::log_log_slope(dists, diffs);
  rep.hoelder_fit = detail::log_log_slope(dists, ddiffs);
  return rep;
}

}  // namespace vpc
