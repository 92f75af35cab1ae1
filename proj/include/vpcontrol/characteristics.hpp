#pragma once

// Characteristic system x' = v, v' = F(s, x) + v x G(s, x).
//
// One step is drift(dt/2) - kick(dt/2) - rotate - kick(dt/2) - drift(dt/2)
// with both fields sampled at the step midpoint. The rotation is the Boris
// construction with tan(angle/2) = |G| dt/2, so it preserves |v|, and the
// step is its own inverse under dt -> -dt.

#include "vpcontrol/core.hpp"
#include "vpcontrol/phase_space.hpp"

#include <Eigen/LU>

#include <cmath>
#include <concepts>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

namespace vpc {

template <class F>
concept ForceField = requires(const F& f, double s, const Vec3& x) {
  { f.electric(s, x) } -> std::convertible_to<Vec3>;
  { f.magnetic(s, x) } -> std::convertible_to<Vec3>;
};

/// Fields given by callables; used for analytic test configurations.
struct AnalyticForces {
  std::function<Vec3(double, const Vec3&)> e;
  std::function<Vec3(double, const Vec3&)> b;

  Vec3 electric(double s, const Vec3& x) const { return e ? e(s, x) : Vec3::Zero(); }
  Vec3 magnetic(double s, const Vec3& x) const { return b ? b(s, x) : Vec3::Zero(); }
};

inline AnalyticForces constant_forces(const Vec3& e, const Vec3& b) {
  return {[e](double, const Vec3&) { return e; }, [b](double, const Vec3&) { return b; }};
}

/// Kick - rotate - kick velocity update.
inline Vec3 boris_velocity(const Vec3& v, const Vec3& f, const Vec3& g, double dt) {
  const Vec3 v_minus = v + (0.5 * dt) * f;
  const Vec3 t = (0.5 * dt) * g;
  const Vec3 s = (2.0 / (1.0 + t.squaredNorm())) * t;
  const Vec3 v_prime = v_minus + v_minus.cross(t);
  const Vec3 v_plus = v_minus + v_prime.cross(s);
  return v_plus + (0.5 * dt) * f;
}

template <ForceField F>
PhasePoint push_step(const PhasePoint& z, const F& forces, double s, double dt) {
  const double mid = s + 0.5 * dt;
  const Vec3 x_mid = z.x + (0.5 * dt) * z.v;
  const Vec3 f = forces.electric(mid, x_mid);
  const Vec3 g = forces.magnetic(mid, x_mid);
  PhasePoint out;
  out.v = boris_velocity(z.v, f, g, dt);
  out.x = x_mid + (0.5 * dt) * out.v;
  return out;
}

/// Number of equal steps of size at most dt_max covering |s - t|.
inline int step_count(double s, double t, double dt_max) {
  require(dt_max > 0.0 && std::isfinite(dt_max), "time step must be > 0");
  const double span = std::abs(s - t);
  return std::max(1, static_cast<int>(std::ceil(span / dt_max - 1e-9)));
}

struct FlowMapSample {
  double s = 0.0;
  double t = 0.0;
  PhasePoint input;
  PhasePoint output;
};

/// Z(s, t, z): the state at time s of the characteristic through z at time
/// t. Works in either time direction.
template <ForceField F>
PhasePoint integrate_flow(const PhasePoint& z, double s, double t, const F& forces, double dt_max) {
  if (s == t) return z;
  const int n = step_count(s, t, dt_max);
  const double step = (s - t) / n;
  PhasePoint cur = z;
  for (int k = 0; k < n; ++k) cur = push_step(cur, forces, t + k * step, step);
  return cur;
}

template <ForceField F>
FlowMapSample sample_flow(const PhasePoint& z, double s, double t, const F& forces, double dt_max) {
  return {s, t, z, integrate_flow(z, s, t, forces, dt_max)};
}

using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Central-difference Jacobian dZ(s, t, z)/dz.
template <ForceField F>
Mat6 flow_jacobian(const PhasePoint& z, double s, double t, const F& forces, double dt_max, double delta) {
  require(delta > 0.0, "finite-difference step must be > 0");
  Mat6 jac;
  for (int a = 0; a < 6; ++a) {
    PhasePoint plus = z, minus = z;
    if (a < 3) {
      plus.x[a] += delta;
      minus.x[a] -= delta;
    } else {
      plus.v[a - 3] += delta;
      minus.v[a - 3] -= delta;
    }
    const PhasePoint zp = integrate_flow(plus, s, t, forces, dt_max);
    const PhasePoint zm = integrate_flow(minus, s, t, forces, dt_max);
    for (int q = 0; q < 3; ++q) {
      jac(q, a) = (zp.x[q] - zm.x[q]) / (2.0 * delta);
      jac(q + 3, a) = (zp.v[q] - zm.v[q]) / (2.0 * delta);
    }
  }
  return jac;
}

template <ForceField F>
double flow_jacobian_det(const PhasePoint& z, double s, double t, const F& forces, double dt_max, double delta) {
  return flow_jacobian(z, s, t, forces, dt_max, delta).determinant();
}

/// Per-step (s, x, v) rows of tagged particles.
struct TrajectoryTrace {
  struct Row {
    double s;
    std::size_t particle;
    PhasePoint z;
  };
  std::vector<std::size_t> tags;
  std::vector<Row> rows;

  void record(double s, std::span<const PhasePoint> points) {
    for (auto p : tags)
      if (p < points.size()) rows.push_back({s, p, points[p]});
  }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write trajectory trace " + path);
    out.precision(17);
    out << "s,particle,x0,x1,x2,v0,v1,v2\n";
    for (const auto& r : rows)
      out << r.s << ',' << r.particle << ',' << r.z.x[0] << ',' << r.z.x[1] << ',' << r.z.x[2] << ',' << r.z.v[0]
          << ',' << r.z.v[1] << ',' << r.z.v[2] << '\n';
  }
};

}  // namespace vpc
