#pragma once

// Initial datum, lattice sampling of phase space, discrete L^p norms and
// support radii.

#include "vpcontrol/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace vpc {

struct PhasePoint {
  Vec3 x = Vec3::Zero();
  Vec3 v = Vec3::Zero();

  double norm() const { return std::sqrt(x.squaredNorm() + v.squaredNorm()); }
  bool finite() const { return all_finite(x) && all_finite(v); }
};

/// Compactly supported C^2 bump
///   A (1 - |x|^2/r_x^2)_+^4 (1 - |v|^2/r_v^2)_+^4.
struct InitialDatum {
  double amplitude = 1.0;
  double r_x = 1.0;
  double r_v = 1.0;

  void validate() const {
    require(std::isfinite(amplitude) && amplitude >= 0.0, "datum amplitude must be >= 0");
    require(std::isfinite(r_x) && r_x > 0.0, "datum r_x must be > 0");
    require(std::isfinite(r_v) && r_v > 0.0, "datum r_v must be > 0");
  }

  /// Radial profile (1 - s^2)_+^4 with s^2 = |y|^2 / r^2.
  static double profile(double squared_ratio) {
    const double u = 1.0 - squared_ratio;
    if (u <= 0.0) return 0.0;
    const double u2 = u * u;
    return u2 * u2;
  }

  double operator()(const PhasePoint& z) const {
    return amplitude * profile(z.x.squaredNorm() / (r_x * r_x)) *
           profile(z.v.squaredNorm() / (r_v * r_v));
  }
};

inline double eval_initial_datum(const InitialDatum& datum, const PhasePoint& z) { return datum(z); }

/// Lattice markers for f. `values` are fixed at sampling time; only
/// `points` move.
struct ParticleEnsemble {
  std::vector<PhasePoint> points;
  std::vector<PhasePoint> origins;
  std::vector<double> values;
  double weight = 0.0;  // h^6
  double spacing = 0.0; // h
  InitialDatum datum;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

namespace detail {

/// Lattice points m*h (m integer) with |y| < radius, ordered lexicographically.
inline std::vector<Vec3> ball_lattice(double radius, double h) {
  const int m_max = static_cast<int>(std::floor(radius / h));
  std::vector<Vec3> out;
  const double r2 = radius * radius;
  for (int i = -m_max; i <= m_max; ++i)
    for (int j = -m_max; j <= m_max; ++j)
      for (int k = -m_max; k <= m_max; ++k) {
        const Vec3 y(i * h, j * h, k * h);
        if (y.squaredNorm() < r2) out.push_back(y);
      }
  return out;
}

inline int axis_count(double radius, double h) {
  // points m*h on a coordinate axis with |m h| < radius
  const int m = static_cast<int>(std::ceil(radius / h)) - 1;
  return 2 * std::max(m, 0) + 1;
}

}  // namespace detail

/// Regular 6D lattice of spacing h restricted to the open support box of
/// the datum (the set where the bump is positive when amplitude > 0).
inline ParticleEnsemble sample_ensemble(const InitialDatum& datum, double h) {
  datum.validate();
  require(std::isfinite(h) && h > 0.0, "lattice spacing must be > 0");
  if (detail::axis_count(datum.r_x, h) < 2 || detail::axis_count(datum.r_v, h) < 2)
    throw InvalidArgument("lattice spacing too coarse: fewer than 2 points per axis inside the support");

  const auto xs = detail::ball_lattice(datum.r_x, h);
  const auto vs = detail::ball_lattice(datum.r_v, h);

  ParticleEnsemble ens;
  ens.datum = datum;
  ens.spacing = h;
  const double h3 = h * h * h;
  ens.weight = h3 * h3;
  const std::size_t n = xs.size() * vs.size();
  ens.points.reserve(n);
  ens.origins.reserve(n);
  ens.values.reserve(n);
  for (const auto& x : xs)
    for (const auto& v : vs) {
      const PhasePoint z{x, v};
      ens.origins.push_back(z);
      ens.points.push_back(z);
      ens.values.push_back(datum(z));
    }
  return ens;
}

inline constexpr double kInfNorm = std::numeric_limits<double>::infinity();

/// Discrete L^p norm; positions never enter.
inline double lp_norm(std::span<const double> values, double weight, double p) {
  require(p >= 1.0, "lp_norm requires p >= 1");
  if (std::isinf(p)) {
    double m = 0.0;
    for (double f : values) m = std::max(m, f);
    return m;
  }
  double acc = 0.0;
  if (p == 1.0) {
    for (double f : values) acc += f;
    return acc * weight;
  }
  if (p == 2.0) {
    for (double f : values) acc += f * f;
    return std::sqrt(acc * weight);
  }
  for (double f : values) acc += std::pow(f, p);
  return std::pow(acc * weight, 1.0 / p);
}

inline double lp_norm(const ParticleEnsemble& ens, double p) {
  return lp_norm(std::span<const double>(ens.values), ens.weight, p);
}

/// Running maxima over the support history: P velocity, Q position,
/// S phase-space radius.
struct SupportRadii {
  double P = 0.0;
  double Q = 0.0;
  double S = 0.0;
};

inline SupportRadii support_radii(std::span<const PhasePoint> points, std::span<const double> values,
                                  const SupportRadii& history = {}) {
  double p2 = 0.0, q2 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(values[i] > 0.0)) continue;
    const double v2 = points[i].v.squaredNorm();
    const double x2 = points[i].x.squaredNorm();
    p2 = std::max(p2, v2);
    q2 = std::max(q2, x2);
    s2 = std::max(s2, x2 + v2);
  }
  return {std::max(history.P, std::sqrt(p2)), std::max(history.Q, std::sqrt(q2)),
          std::max(history.S, std::sqrt(s2))};
}

inline SupportRadii support_radii(const ParticleEnsemble& ens, const SupportRadii& history = {}) {
  return support_radii(std::span<const PhasePoint>(ens.points), std::span<const double>(ens.values), history);
}

}  // namespace vpc
