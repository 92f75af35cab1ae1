#pragma once

// Property suites shared by the command-line verifier and the acceptance
// binary. Each suite returns measured values next to their tolerances.

#include "vpcontrol/characteristics.hpp"
#include "vpcontrol/fields.hpp"
#include "vpcontrol/phase_space.hpp"
#include "vpcontrol/poisson.hpp"
#include "vpcontrol/vlasov.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace vpc::verify {

enum class Relation { AtMost, AtLeast, Within, Equal };

struct Check {
  std::string suite;
  std::string name;
  double measured = 0.0;
  double low = 0.0;   // Within: lower end; AtLeast: threshold
  double high = 0.0;  // Within: upper end; AtMost: threshold
  Relation relation = Relation::AtMost;
  bool pass = false;

  std::string bound() const {
    char buf[96];
    switch (relation) {
      case Relation::AtMost: std::snprintf(buf, sizeof buf, "<= %.3g", high); break;
      case Relation::AtLeast: std::snprintf(buf, sizeof buf, ">= %.3g", low); break;
      case Relation::Within: std::snprintf(buf, sizeof buf, "in [%.3g, %.3g]", low, high); break;
      case Relation::Equal: std::snprintf(buf, sizeof buf, "== %.17g", high); break;
    }
    return buf;
  }
};

inline Check at_most(std::string suite, std::string name, double measured, double tol) {
  return {std::move(suite), std::move(name), measured, 0.0, tol, Relation::AtMost, measured <= tol};
}
inline Check at_least(std::string suite, std::string name, double measured, double tol) {
  return {std::move(suite), std::move(name), measured, tol, 0.0, Relation::AtLeast, measured >= tol};
}
inline Check within(std::string suite, std::string name, double measured, double lo, double hi) {
  return {std::move(suite), std::move(name), measured, lo, hi, Relation::Within, measured >= lo && measured <= hi};
}
inline Check equal(std::string suite, std::string name, double measured, double expected) {
  return {std::move(suite), std::move(name), measured, expected, expected, Relation::Equal, measured == expected};
}

inline bool all_pass(const std::vector<Check>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

// ---------------------------------------------------------------------------
// Poisson

struct PoissonTolerances {
  double ball_potential = 1e-2;  // relative, at the centre and at 2a
  double ball_field = 2e-2;      // relative |E| at 2a
  double methods = 1e-10;        // Fourier vs direct, relative max
};

/// Nodes at multiples of a/6 with a node at the origin.
inline GridSpec ball_grid(double a, int n) {
  const double s = a / 6.0;
  const double half = 0.5 * (n - 1) * s;
  const double shift = (n % 2 == 0) ? 0.5 * s : 0.0;
  return GridSpec{Vec3::Constant(shift), half, n};
}

/// Uniform ball of radius a and density rho0, deposited by the volume
/// fraction of each dual cell inside the ball (sub^3 sub-samples).
inline ScalarGrid uniform_ball(const GridSpec& spec, double a, double rho0, int sub = 8) {
  ScalarGrid rho = zero_scalar_grid(spec);
  const double s = spec.spacing();
  for (int i = 0; i < spec.n; ++i)
    for (int j = 0; j < spec.n; ++j)
      for (int k = 0; k < spec.n; ++k) {
        const Vec3 c = spec.node(i, j, k);
        if (c.norm() > a + s) continue;
        int inside = 0;
        for (int p = 0; p < sub; ++p)
          for (int q = 0; q < sub; ++q)
            for (int r = 0; r < sub; ++r) {
              const Vec3 y = c + s * Vec3((p + 0.5) / sub - 0.5, (q + 0.5) / sub - 0.5, (r + 0.5) / sub - 0.5);
              if (y.squaredNorm() < a * a) ++inside;
            }
        rho.data[spec.index(i, j, k)] = rho0 * inside / (sub * sub * sub);
      }
  return rho;
}

inline std::vector<Check> poisson_suite(int n = 32, const PoissonTolerances& tol = {}) {
  const std::string suite = "poisson";
  const double a = 1.0;
  const GridSpec spec = ball_grid(a, n);
  const ScalarGrid rho = uniform_ball(spec, a, 1.0);
  const double q = total_charge(rho);
  const ScalarGrid psi = solve_potential_direct(rho);
  const VectorGrid e = electric_field(psi);

  std::vector<Check> out;
  const double psi0 = interpolate_field(psi, Vec3::Zero());
  out.push_back(at_most(suite, "ball psi(0) rel err", std::abs(psi0 - 1.5 * q / a) / (1.5 * q / a), tol.ball_potential));
  const Vec3 x2(2.0 * a, 0.0, 0.0);
  const double psi2 = interpolate_field(psi, x2);
  out.push_back(at_most(suite, "ball psi(2a) rel err", std::abs(psi2 - q / (2 * a)) / (q / (2 * a)), tol.ball_potential));
  const double e2 = interpolate_field(e, x2).norm();
  const double e2_ref = q / (4 * a * a);
  out.push_back(at_most(suite, "ball |E|(2a) rel err", std::abs(e2 - e2_ref) / e2_ref, tol.ball_field));

  PoissonSolver fourier(spec);
  const ScalarGrid psi_f = fourier.solve(rho);
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < psi.data.size(); ++i) {
    diff = std::max(diff, std::abs(psi.data[i] - psi_f.data[i]));
    scale = std::max(scale, std::abs(psi.data[i]));
  }
  out.push_back(at_most(suite, "fourier vs direct rel max", diff / scale, tol.methods));

  // Smooth bump on a fixed box: the interior residual of the 7-point
  // Laplacian must fall when the grid is refined.
  auto residual = [](int m) {
    const GridSpec g{Vec3::Zero(), 2.0, m};
    ScalarGrid r = zero_scalar_grid(g);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k) {
          const double r2 = g.node(i, j, k).squaredNorm();
          r.data[g.index(i, j, k)] = r2 < 1.0 ? std::pow(1.0 - r2, 4) : 0.0;
        }
    PoissonSolver solver(g);
    return laplacian_residual(solver.solve(r), r, 2);
  };
  const double coarse = residual(n / 2), fine = residual(n);
  out.push_back(at_most(suite, "laplacian residual fine/coarse", fine / coarse, 1.0));
  return out;
}

// ---------------------------------------------------------------------------
// Sampling helpers

/// Uniform draws from the product of the balls |x| <= rx, |v| <= rv.
inline std::vector<PhasePoint> random_phase_points(std::size_t count, double rx, double rv, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto ball = [&](double r) -> Vec3 {
    Vec3 y;
    do y = Vec3(unit(rng), unit(rng), unit(rng));
    while (y.squaredNorm() > 1.0);
    return r * y;
  };
  std::vector<PhasePoint> out(count);
  for (auto& z : out) {
    z.x = ball(rx);
    z.v = ball(rv);
  }
  return out;
}

inline double median(std::vector<double> v) {
  require(!v.empty(), "median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double max_of(const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }

// ---------------------------------------------------------------------------
// Speed neutrality of B

/// Max over markers and snapshots of ||v_i(t)| - |v_i(0)|| / |v_i(0)| with
/// the electric force switched off.
inline double speed_drift(const InitialDatum& datum, const FieldParams& b, Numerics num) {
  num.electric = false;
  num.keep_positions = true;
  num.energy = false;
  const auto rec = simulate(datum, b, num);
  const auto& v0 = rec.positions.front();
  double drift = 0.0;
  for (std::size_t k = 1; k < rec.positions.size(); ++k)
    for (std::size_t i = 0; i < v0.size(); ++i) {
      const double s0 = v0[i].v.norm();
      if (s0 == 0.0) continue;
      drift = std::max(drift, std::abs(rec.positions[k][i].v.norm() - s0) / s0);
    }
  return drift;
}

inline std::vector<Check> speed_suite(const InitialDatum& datum, const FieldParams& b, const Numerics& num,
                                      double tol = 1e-13) {
  return {at_most("speed", "max relative |v| drift", speed_drift(datum, b, num), tol)};
}

// ---------------------------------------------------------------------------
// Flow map

struct FlowMeasurement {
  std::vector<double> det_error;      // |det dZ(T, 0, z)/dz - 1|
  std::vector<double> inverse_error;  // |Z(0, T, Z(T, 0, z)) - z|
  double support_radius = 0.0;        // S(0)
  double dt = 0.0;
};

struct FlowOptions {
  std::size_t points = 50;
  std::uint64_t seed = 2024;
  double delta_fraction = 1e-4;  // FD step relative to the support radius r_x
};

inline FlowMeasurement measure_flow(const InitialDatum& datum, const FieldParams& b, Numerics num,
                                    const FlowOptions& opt = {}) {
  num.keep_positions = false;
  num.energy = false;
  const auto rec = simulate(datum, b, num);
  const RunForces forces(rec);
  const double T = rec.T();
  FlowMeasurement m;
  m.dt = rec.dt;
  m.support_radius = rec.radii_series.front().S;
  const double delta = opt.delta_fraction * datum.r_x;
  for (const auto& z : random_phase_points(opt.points, datum.r_x, datum.r_v, opt.seed)) {
    m.det_error.push_back(std::abs(flow_jacobian_det(z, T, 0.0, forces, rec.dt, delta) - 1.0));
    const PhasePoint fwd = integrate_flow(z, T, 0.0, forces, rec.dt);
    const PhasePoint back = integrate_flow(fwd, 0.0, T, forces, rec.dt);
    m.inverse_error.push_back(std::sqrt((back.x - z.x).squaredNorm() + (back.v - z.v).squaredNorm()));
  }
  return m;
}

struct FlowTolerances {
  double det = 1e-3;
  double inverse = 1e-4;  // relative to the support radius
};

inline std::vector<Check> flow_suite(const InitialDatum& datum, const FieldParams& b, const Numerics& num,
                                     const FlowTolerances& tol = {}, const FlowOptions& opt = {}) {
  const auto m = measure_flow(datum, b, num, opt);
  return {at_most("flow", "max |det - 1|", max_of(m.det_error), tol.det),
          at_most("flow", "max inverse error / S(0)", max_of(m.inverse_error) / m.support_radius, tol.inverse)};
}

// ---------------------------------------------------------------------------
// Conservation

struct ConservationTolerances {
  double energy = 1e-2;     // max_t |E(t) - E(0)| / E(0)
  double round_trip = 1e-2;  // eval_f at markers vs stored values, relative to sup f0
  double support = 1e-6;     // Q(T) <= Q(0) + T P(T) + tol
  std::size_t round_trip_stride = 1;
};

inline double energy_drift(const SolutionRecord& rec) {
  require(!rec.energy_series.empty(), "run carries no energy series");
  const double e0 = rec.energy_series.front().total();
  double drift = 0.0;
  for (const auto& e : rec.energy_series) drift = std::max(drift, std::abs(e.total() - e0));
  return e0 != 0.0 ? drift / std::abs(e0) : drift;
}

/// Max over snapshots and p of |norm_p(t) - norm_p(0)|; zero when the
/// series is bit-identical.
inline double norm_spread(const SolutionRecord& rec) {
  double spread = 0.0;
  for (const auto& row : rec.norm_series)
    for (int p = 0; p < 3; ++p) spread = std::max(spread, std::abs(row[p] - rec.norm_series.front()[p]));
  return spread;
}

inline double round_trip_error(const SolutionRecord& rec, std::size_t stride) {
  require(stride >= 1, "round-trip stride must be >= 1");
  const auto& st = rec.final_state;
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < st.size(); i += stride) {
    err = std::max(err, std::abs(eval_f(rec, rec.T(), st.points[i]).value - st.values[i]));
    scale = std::max(scale, st.values[i]);
  }
  return scale > 0.0 ? err / scale : err;
}

/// 1 when every radii entry is >= its predecessor, else 0.
inline double radii_monotone(const SolutionRecord& rec) {
  for (std::size_t k = 1; k < rec.radii_series.size(); ++k) {
    const auto& a = rec.radii_series[k - 1];
    const auto& b = rec.radii_series[k];
    if (b.P < a.P || b.Q < a.Q || b.S < a.S) return 0.0;
  }
  return 1.0;
}

/// Q(T) - Q(0) - T P(T).
inline double kinematic_excess(const SolutionRecord& rec) {
  const auto& r0 = rec.radii_series.front();
  const auto& rt = rec.radii_series.back();
  return rt.Q - r0.Q - rec.T() * rt.P;
}

inline std::vector<Check> conservation_suite(const SolutionRecord& rec, const ConservationTolerances& tol = {}) {
  const std::string s = "conservation";
  return {equal(s, "norm spread across snapshots", norm_spread(rec), 0.0),
          at_most(s, "relative energy drift", energy_drift(rec), tol.energy),
          at_most(s, "eval_f round trip at markers", round_trip_error(rec, tol.round_trip_stride), tol.round_trip),
          equal(s, "support radii monotone", radii_monotone(rec), 1.0),
          at_most(s, "Q(T) - Q(0) - T P(T)", kinematic_excess(rec), tol.support)};
}

// ---------------------------------------------------------------------------
// Lipschitz probe

struct LipschitzOptions {
  int halvings = 4;          // family eps0 / 2^k, k = 0..halvings
  double eps0 = 0.1;         // ||eps0 dB||_V as a fraction of K
  int random_pairs = 0;      // additional random admissible pairs for the max ratio
  std::uint64_t seed = 99;
  ProbeOptions probe{};
  double slope_low = 0.8;
  double slope_high = 1.2;
};

/// H_k = B + eps_k dB with dB a seeded random direction in theta.
inline std::vector<FieldPair> halving_family(const FieldParams& b, const LipschitzOptions& opt,
                                             const QuadratureSpec& quad = {}) {
  require(b.dim() > 0, "Lipschitz family needs a parametrized field");
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  FieldParams db = b;
  for (auto& c : db.theta) c = unit(rng);
  db = scaled(db, opt.eps0 * b.K / vnorm(db, quad).v_norm);
  std::vector<FieldPair> pairs;
  double eps = 1.0;
  for (int k = 0; k <= opt.halvings; ++k, eps *= 0.5) {
    FieldParams h = b;
    for (std::size_t i = 0; i < h.theta.size(); ++i) h.theta[i] += eps * db.theta[i];
    pairs.emplace_back(b, h);
  }
  return pairs;
}

inline std::vector<FieldPair> random_pairs(int count, const RandomFieldSpec& spec, std::uint64_t seed,
                                           const QuadratureSpec& quad = {}) {
  std::vector<FieldPair> pairs;
  for (int k = 0; k < count; ++k)
    pairs.emplace_back(random_admissible_field(spec, seed + 2 * k, quad),
                       random_admissible_field(spec, seed + 2 * k + 1, quad));
  return pairs;
}

struct LipschitzResult {
  ProbeReport family;
  ProbeReport random;
};

inline LipschitzResult measure_lipschitz(const InitialDatum& datum, const FieldParams& b, const Numerics& num,
                                         const LipschitzOptions& opt = {}) {
  LipschitzResult r;
  r.family = lipschitz_probe(halving_family(b, opt, opt.probe.quadrature), datum, num, opt.probe);
  if (opt.random_pairs > 0) {
    RandomFieldSpec spec;
    spec.T = b.T;
    spec.beta = b.beta;
    spec.K = b.K;
    r.random = lipschitz_probe(random_pairs(opt.random_pairs, spec, opt.seed + 1000, opt.probe.quadrature), datum,
                               num, opt.probe);
  }
  return r;
}

inline std::vector<Check> lipschitz_suite(const InitialDatum& datum, const FieldParams& b, const Numerics& num,
                                          const LipschitzOptions& opt = {}) {
  const auto r = measure_lipschitz(datum, b, num, opt);
  std::vector<Check> out{within("lipschitz", "log-log slope sup|f_B - f_H| vs W", r.family.slope, opt.slope_low,
                                opt.slope_high)};
  if (opt.random_pairs > 0) {
    const bool ok = std::isfinite(r.random.max_ratio) && static_cast<int>(r.random.pairs.size()) == opt.random_pairs;
    Check c = at_most("lipschitz", "max ratio over random pairs (finite)", r.random.max_ratio,
                      std::numeric_limits<double>::max());
    c.pass = c.pass && ok;
    out.push_back(c);
  }
  return out;
}

}  // namespace vpc::verify
