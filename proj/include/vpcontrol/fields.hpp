#pragma once

// External magnetic control fields B_theta(t, x) = sum_j c_j(t) Phi_j(x),
// their Sobolev-type norms by tensor quadrature, and the projection onto the
// admissible ball ||B||_V <= K.

#include "vpcontrol/core.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace vpc {

/// Spatial shape exp(-|x|^2 / (2 sigma^2)) cos(k.x + phase) * direction.
struct FieldMode {
  Vec3 k = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double sigma = 2.0;
  double phase = 0.0;

  bool operator==(const FieldMode& o) const {
    return k == o.k && direction == o.direction && sigma == o.sigma && phase == o.phase;
  }
};

struct FieldParams {
  std::vector<double> theta;  // theta[j * n_time_knots + m]: mode j at knot m
  int n_time_knots = 2;
  std::vector<FieldMode> modes;
  double T = 1.0;
  double beta = 6.0;
  double K = 5.0;

  std::size_t dim() const { return theta.size(); }

  void validate() const {
    require(std::isfinite(beta) && beta > 3.0, "field beta must be > 3");
    require(std::isfinite(K) && K > 0.0, "field K must be > 0");
    require(std::isfinite(T) && T > 0.0, "field T must be > 0");
    require(n_time_knots >= 2, "field needs at least 2 time knots");
    require(theta.size() == modes.size() * static_cast<std::size_t>(n_time_knots),
            "theta size must equal modes * time knots");
    for (const auto& m : modes) {
      require(std::isfinite(m.sigma) && m.sigma > 0.0, "mode sigma must be > 0");
      require(all_finite(m.k) && all_finite(m.direction) && std::isfinite(m.phase), "mode entries must be finite");
      require(m.direction.squaredNorm() > 0.0, "mode direction must be nonzero");
    }
    for (double c : theta) require(std::isfinite(c), "theta entries must be finite");
  }

  bool same_structure(const FieldParams& o) const {
    return n_time_knots == o.n_time_knots && modes == o.modes && T == o.T;
  }

  /// Coefficients c_j(t), piecewise linear between uniform knots.
  void coefficients(double t, std::span<double> out) const {
    const double tol = 1e-12 * T;
    if (!(t >= -tol && t <= T + tol))
      throw InvalidArgument("field time " + std::to_string(t) + " outside [0, T]");
    t = std::clamp(t, 0.0, T);
    const int panels = n_time_knots - 1;
    const double u = t / T * panels;
    int m = std::min(static_cast<int>(std::floor(u)), panels - 1);
    const double w = u - m;
    for (std::size_t j = 0; j < modes.size(); ++j) {
      const double* c = theta.data() + j * n_time_knots;
      out[j] = (1.0 - w) * c[m] + w * c[m + 1];
    }
  }

  static FieldParams zero_like(const FieldParams& p) {
    FieldParams z = p;
    std::fill(z.theta.begin(), z.theta.end(), 0.0);
    return z;
  }
};

inline FieldParams scaled(FieldParams p, double c) {
  for (auto& t : p.theta) t *= c;
  return p;
}

/// B - H as a single parametrized field (modes concatenated when the two
/// structures differ).
inline FieldParams field_difference(const FieldParams& b, const FieldParams& h) {
  require(b.n_time_knots == h.n_time_knots && b.T == h.T, "field difference needs equal time knots and T");
  FieldParams d = b;
  if (b.same_structure(h)) {
    for (std::size_t i = 0; i < d.theta.size(); ++i) d.theta[i] = b.theta[i] - h.theta[i];
    return d;
  }
  d.modes.insert(d.modes.end(), h.modes.begin(), h.modes.end());
  for (double c : h.theta) d.theta.push_back(-c);
  return d;
}

namespace detail {

// Scalar shape g(x) tau(x) and its derivatives up to second order.
struct ModeShape {
  double value;
  Vec3 grad;
  Mat3 hess;
};

inline ModeShape mode_shape(const FieldMode& m, const Vec3& x, int order) {
  const double inv_s2 = 1.0 / (m.sigma * m.sigma);
  const double g = std::exp(-0.5 * x.squaredNorm() * inv_s2);
  const double arg = m.k.dot(x) + m.phase;
  const double c = std::cos(arg);
  ModeShape s;
  s.value = g * c;
  if (order < 1) return s;
  const double sn = std::sin(arg);
  const Vec3 dg = -inv_s2 * g * x;
  const Vec3 dtau = -sn * m.k;
  s.grad = dg * c + g * dtau;
  if (order < 2) return s;
  const Mat3 d2g = g * (inv_s2 * inv_s2 * x * x.transpose() - inv_s2 * Mat3::Identity());
  const Mat3 d2tau = -c * m.k * m.k.transpose();
  s.hess = d2g * c + dg * dtau.transpose() + dtau * dg.transpose() + g * d2tau;
  return s;
}

}  // namespace detail

inline Vec3 eval_field(const FieldParams& p, double t, const Vec3& x) {
  Vec3 b = Vec3::Zero();
  if (p.modes.empty()) return b;
  std::array<double, 16> small{};
  std::vector<double> big;
  std::span<double> c;
  if (p.modes.size() <= small.size()) {
    c = std::span<double>(small.data(), p.modes.size());
  } else {
    big.resize(p.modes.size());
    c = big;
  }
  p.coefficients(t, c);
  for (std::size_t j = 0; j < p.modes.size(); ++j) {
    if (c[j] == 0.0) continue;
    b += (c[j] * detail::mode_shape(p.modes[j], x, 0).value) * p.modes[j].direction;
  }
  return b;
}

struct FieldDerivatives {
  Mat3 jacobian = Mat3::Zero();                // jacobian(i, a) = d_a B_i
  std::array<Mat3, 3> hessian{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};  // hessian[i](a, b) = d_a d_b B_i
};

inline FieldDerivatives eval_field_jacobian(const FieldParams& p, double t, const Vec3& x) {
  FieldDerivatives d;
  std::vector<double> c(p.modes.size());
  p.coefficients(t, c);
  for (std::size_t j = 0; j < p.modes.size(); ++j) {
    if (c[j] == 0.0) continue;
    const auto s = detail::mode_shape(p.modes[j], x, 2);
    const Vec3 e = c[j] * p.modes[j].direction;
    d.jacobian += e * s.grad.transpose();
    for (int i = 0; i < 3; ++i) d.hessian[i] += e[i] * s.hess;
  }
  return d;
}

struct QuadratureSpec {
  int n = 48;                       // points per spatial axis
  double half_width_sigmas = 6.0;   // box [-w sigma_max, w sigma_max]^3
  int gauss_points = 3;             // Gauss-Legendre nodes per time panel (1..3)
};

struct NormReport {
  double w_norm = 0.0;  // L^2(0,T; W^{2,beta})
  double h_norm = 0.0;  // L^2(0,T; H^1)
  double v_norm = 0.0;  // w_norm + h_norm
};

namespace detail {

inline double pow_half(double r2, double beta) {
  // |y|^beta from |y|^2; exact repeated products for even integer beta
  const double half = 0.5 * beta;
  if (half == std::floor(half) && half <= 8.0) {
    double out = 1.0;
    for (int i = 0; i < static_cast<int>(half); ++i) out *= r2;
    return out;
  }
  return std::pow(r2, half);
}

inline std::vector<std::pair<double, double>> gauss_legendre(int n) {
  switch (n) {
    case 1: return {{0.0, 2.0}};
    case 2: return {{-1.0 / std::sqrt(3.0), 1.0}, {1.0 / std::sqrt(3.0), 1.0}};
    case 3: return {{-std::sqrt(0.6), 5.0 / 9.0}, {0.0, 8.0 / 9.0}, {std::sqrt(0.6), 5.0 / 9.0}};
    default: throw InvalidArgument("gauss_points must be 1, 2 or 3");
  }
}

}  // namespace detail

/// Mode shapes and their derivatives tabulated on the spatial quadrature
/// grid. The table depends only on the modes, so one instance serves every
/// theta of a given field structure.
class NormQuadrature {
public:
  static constexpr int kDerivs = 10;  // value, 3 first, 6 second derivatives

  NormQuadrature(std::vector<FieldMode> modes, QuadratureSpec spec) : modes_(std::move(modes)), spec_(spec) {
    require(spec_.n >= 4, "quadrature needs at least 4 points per axis");
    require(spec_.half_width_sigmas > 0.0, "quadrature half width must be > 0");
    detail::gauss_legendre(spec_.gauss_points);
    double sigma_max = 0.0, k_max = 0.0;
    for (const auto& m : modes_) {
      sigma_max = std::max(sigma_max, m.sigma);
      k_max = std::max(k_max, m.k.norm());
    }
    half_width_ = spec_.half_width_sigmas * std::max(sigma_max, 1e-300);
    step_ = 2.0 * half_width_ / spec_.n;
    if (k_max > 0.0 && step_ > kPi / k_max)
      throw InvalidArgument("quadrature grid coarser than 2 points per shortest mode wavelength");
    cell_ = step_ * step_ * step_;

    const std::size_t npts = static_cast<std::size_t>(spec_.n) * spec_.n * spec_.n;
    const std::size_t nm = modes_.size();
    shapes_.assign(nm * kDerivs * npts, 0.0);
    dir_dot_.assign(nm * nm, 0.0);
    for (std::size_t j = 0; j < nm; ++j)
      for (std::size_t l = 0; l < nm; ++l) dir_dot_[j * nm + l] = modes_[j].direction.dot(modes_[l].direction);

    std::size_t idx = 0;
    for (int a = 0; a < spec_.n; ++a)
      for (int b = 0; b < spec_.n; ++b)
        for (int c = 0; c < spec_.n; ++c, ++idx) {
          const Vec3 x = point(a, b, c);
          for (std::size_t j = 0; j < nm; ++j) {
            const auto s = detail::mode_shape(modes_[j], x, 2);
            double* row = &shapes_[(j * kDerivs) * npts];
            row[0 * npts + idx] = s.value;
            for (int q = 0; q < 3; ++q) row[(1 + q) * npts + idx] = s.grad[q];
            row[4 * npts + idx] = s.hess(0, 0);
            row[5 * npts + idx] = s.hess(1, 1);
            row[6 * npts + idx] = s.hess(2, 2);
            row[7 * npts + idx] = s.hess(0, 1);
            row[8 * npts + idx] = s.hess(0, 2);
            row[9 * npts + idx] = s.hess(1, 2);
          }
        }

    // Gram matrices for the quadratic (beta = 2) integrands.
    gram_value_.assign(nm * nm, 0.0);
    gram_grad_.assign(nm * nm, 0.0);
    for (std::size_t j = 0; j < nm; ++j)
      for (std::size_t l = j; l < nm; ++l) {
        double gv = 0.0, gg = 0.0;
        const double* sj = &shapes_[(j * kDerivs) * npts];
        const double* sl = &shapes_[(l * kDerivs) * npts];
        for (std::size_t i = 0; i < npts; ++i) gv += sj[i] * sl[i];
        for (int q = 1; q <= 3; ++q)
          for (std::size_t i = 0; i < npts; ++i) gg += sj[q * npts + i] * sl[q * npts + i];
        const double dd = dir_dot_[j * nm + l];
        gram_value_[j * nm + l] = gram_value_[l * nm + j] = gv * cell_ * dd;
        gram_grad_[j * nm + l] = gram_grad_[l * nm + j] = gg * cell_ * dd;
      }
  }

  const std::vector<FieldMode>& modes() const { return modes_; }
  const QuadratureSpec& spec() const { return spec_; }
  double step() const { return step_; }
  double half_width() const { return half_width_; }

  Vec3 point(int a, int b, int c) const {
    return Vec3(-half_width_ + (a + 0.5) * step_, -half_width_ + (b + 0.5) * step_,
                -half_width_ + (c + 0.5) * step_);
  }

  /// sum_{|alpha|<=2} int |D^alpha B|^beta dx for spatial coefficients c.
  double w_integral(std::span<const double> c, double beta) const {
    const std::size_t npts = static_cast<std::size_t>(spec_.n) * spec_.n * spec_.n;
    const std::size_t nm = modes_.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < npts; ++i) {
      double local = 0.0;
      for (int q = 0; q < kDerivs; ++q) {
        Vec3 d = Vec3::Zero();
        for (std::size_t j = 0; j < nm; ++j)
          d += (c[j] * shapes_[(j * kDerivs + q) * npts + i]) * modes_[j].direction;
        local += detail::pow_half(d.squaredNorm(), beta);
      }
      acc += local;
    }
    return acc * cell_;
  }

  /// int |B|^2 dx and int |D_x B|_F^2 dx for spatial coefficients c.
  std::pair<double, double> quadratic_integrals(std::span<const double> c) const {
    const std::size_t nm = modes_.size();
    double v = 0.0, g = 0.0;
    for (std::size_t j = 0; j < nm; ++j)
      for (std::size_t l = 0; l < nm; ++l) {
        v += c[j] * c[l] * gram_value_[j * nm + l];
        g += c[j] * c[l] * gram_grad_[j * nm + l];
      }
    return {v, g};
  }

  /// First-order part of the W^{1,beta} integral: int |B|^beta + sum_a |d_a B|^beta.
  double w1_integral(std::span<const double> c, double beta) const {
    const std::size_t npts = static_cast<std::size_t>(spec_.n) * spec_.n * spec_.n;
    double acc = 0.0;
    for (std::size_t i = 0; i < npts; ++i)
      for (int q = 0; q < 4; ++q) {
        Vec3 d = Vec3::Zero();
        for (std::size_t j = 0; j < modes_.size(); ++j)
          d += (c[j] * shapes_[(j * kDerivs + q) * npts + i]) * modes_[j].direction;
        acc += detail::pow_half(d.squaredNorm(), beta);
      }
    return acc * cell_;
  }

  /// Field values on the quadrature grid at spatial coefficients c.
  std::vector<Vec3> values(std::span<const double> c) const {
    const std::size_t npts = static_cast<std::size_t>(spec_.n) * spec_.n * spec_.n;
    std::vector<Vec3> out(npts, Vec3::Zero());
    for (std::size_t j = 0; j < modes_.size(); ++j)
      for (std::size_t i = 0; i < npts; ++i)
        out[i] += (c[j] * shapes_[(j * kDerivs) * npts + i]) * modes_[j].direction;
    return out;
  }

  /// Time quadrature nodes and weights over [0, T] for knots of p.
  static std::vector<std::pair<double, double>> time_nodes(const FieldParams& p, int gauss_points) {
    std::vector<std::pair<double, double>> out;
    const auto gl = detail::gauss_legendre(gauss_points);
    const int panels = p.n_time_knots - 1;
    const double len = p.T / panels;
    for (int m = 0; m < panels; ++m) {
      const double mid = (m + 0.5) * len;
      for (auto [xi, w] : gl) out.emplace_back(mid + 0.5 * len * xi, 0.5 * len * w);
    }
    return out;
  }

  void check_compatible(const FieldParams& p) const {
    require(p.modes == modes_, "field modes do not match the quadrature table");
  }

private:
  std::vector<FieldMode> modes_;
  QuadratureSpec spec_;
  double half_width_ = 0.0;
  double step_ = 0.0;
  double cell_ = 0.0;
  std::vector<double> shapes_;
  std::vector<double> dir_dot_;
  std::vector<double> gram_value_;
  std::vector<double> gram_grad_;
};

inline NormReport vnorm(const FieldParams& p, const NormQuadrature& quad) {
  p.validate();
  quad.check_compatible(p);
  NormReport r;
  if (p.modes.empty()) return r;
  std::vector<double> c(p.modes.size());
  double w2 = 0.0, h2 = 0.0;
  for (auto [t, wt] : NormQuadrature::time_nodes(p, quad.spec().gauss_points)) {
    p.coefficients(t, c);
    if (std::all_of(c.begin(), c.end(), [](double v) { return v == 0.0; })) continue;
    const double wi = quad.w_integral(c, p.beta);
    const auto [val, grad] = quad.quadratic_integrals(c);
    w2 += wt * std::pow(wi, 2.0 / p.beta);
    h2 += wt * (val + grad);
  }
  r.w_norm = std::sqrt(w2);
  r.h_norm = std::sqrt(h2);
  r.v_norm = r.w_norm + r.h_norm;
  return r;
}

inline NormReport vnorm(const FieldParams& p, const QuadratureSpec& spec = {}) {
  return vnorm(p, NormQuadrature(p.modes, spec));
}

/// int_0^T int |D_x B|_F^2 dx dt.
inline double dx_b_l2_sq(const FieldParams& p, const NormQuadrature& quad) {
  p.validate();
  quad.check_compatible(p);
  std::vector<double> c(p.modes.size());
  double acc = 0.0;
  for (auto [t, wt] : NormQuadrature::time_nodes(p, quad.spec().gauss_points)) {
    p.coefficients(t, c);
    acc += wt * quad.quadratic_integrals(c).second;
  }
  return acc;
}

inline double dx_b_l2_sq(const FieldParams& p, const QuadratureSpec& spec = {}) {
  return dx_b_l2_sq(p, NormQuadrature(p.modes, spec));
}

/// theta * min(1, K / ||B_theta||_V).
inline FieldParams project_to_ball(const FieldParams& p, const NormQuadrature& quad) {
  const double v = vnorm(p, quad).v_norm;
  if (v <= p.K) return p;
  return scaled(p, p.K / v);
}

inline FieldParams project_to_ball(const FieldParams& p, const QuadratureSpec& spec = {}) {
  return project_to_ball(p, NormQuadrature(p.modes, spec));
}

struct RandomFieldSpec {
  int modes = 3;
  int n_time_knots = 3;
  double k_max = 0.5;      // per wave-vector component
  double sigma = 2.0;
  double norm_low = 0.2;   // target ||B||_V as a fraction of K
  double norm_high = 0.9;
  double T = 1.0;
  double beta = 6.0;
  double K = 5.0;
};

/// Seeded random field with ||B||_V drawn uniformly in [norm_low, norm_high] K.
inline FieldParams random_admissible_field(const RandomFieldSpec& spec, std::uint64_t seed,
                                           const QuadratureSpec& quad = {}) {
  require(spec.modes >= 1, "random field needs at least one mode");
  require(spec.norm_low > 0.0 && spec.norm_low <= spec.norm_high && spec.norm_high <= 1.0,
          "random field norm fractions must satisfy 0 < low <= high <= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  FieldParams p;
  p.n_time_knots = spec.n_time_knots;
  p.T = spec.T;
  p.beta = spec.beta;
  p.K = spec.K;
  for (int j = 0; j < spec.modes; ++j) {
    FieldMode m;
    m.k = spec.k_max * Vec3(unit(rng), unit(rng), unit(rng));
    Vec3 dir(unit(rng), unit(rng), unit(rng));
    while (dir.squaredNorm() < 1e-4) dir = Vec3(unit(rng), unit(rng), unit(rng));
    m.direction = dir.normalized();
    m.sigma = spec.sigma;
    m.phase = kPi * unit(rng);
    p.modes.push_back(m);
  }
  for (int i = 0; i < spec.modes * spec.n_time_knots; ++i) p.theta.push_back(unit(rng));
  const double target = spec.K * (spec.norm_low + (spec.norm_high - spec.norm_low) * 0.5 * (1.0 + unit(rng)));
  p.validate();
  return scaled(p, target / vnorm(p, quad).v_norm);
}

/// ||B - H||_W.
inline double w_distance(const FieldParams& b, const FieldParams& h, const QuadratureSpec& spec = {}) {
  const auto d = field_difference(b, h);
  return vnorm(d, spec).w_norm;
}

/// Empirical surrogate of the embedding constant W^{1,beta} -> C^{0,gamma},
/// gamma = 1 - 3/beta: max over time nodes of ||B(t)||_{C^{0,gamma}} /
/// ||B(t)||_{W^{1,beta}}. The Hoelder seminorm is sampled over grid pairs
/// separated by powers of two along the axes and the main diagonal.
inline double embedding_ratio(const FieldParams& p, const NormQuadrature& quad) {
  p.validate();
  quad.check_compatible(p);
  const double gamma = 1.0 - 3.0 / p.beta;
  const int n = quad.spec().n;
  const double step = quad.step();
  auto at = [n](int a, int b, int c) { return (static_cast<std::size_t>(a) * n + b) * n + c; };
  std::vector<double> c(p.modes.size());
  double ratio = 0.0;
  for (auto [t, wt] : NormQuadrature::time_nodes(p, quad.spec().gauss_points)) {
    (void)wt;
    p.coefficients(t, c);
    const double w1 = quad.w1_integral(c, p.beta);
    if (!(w1 > 0.0)) continue;
    const auto vals = quad.values(c);
    double sup = 0.0;
    for (const auto& b : vals) sup = std::max(sup, b.norm());
    double holder = 0.0;
    const std::array<std::array<int, 3>, 4> dirs{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}}};
    for (int d = 1; d < n; d *= 2)
      for (const auto& e : dirs) {
        const double dist = d * step * std::sqrt(static_cast<double>(e[0] + e[1] + e[2]));
        const double scale = std::pow(dist, gamma);
        for (int a = 0; a + d * e[0] < n; ++a)
          for (int b = 0; b + d * e[1] < n; ++b)
            for (int q = 0; q + d * e[2] < n; ++q) {
              const auto& u = vals[at(a, b, q)];
              const auto& w = vals[at(a + d * e[0], b + d * e[1], q + d * e[2])];
              holder = std::max(holder, (u - w).norm() / scale);
            }
      }
    ratio = std::max(ratio, std::max(sup, holder) / std::pow(w1, 1.0 / p.beta));
  }
  return ratio;
}

// ---------------------------------------------------------------------------
// Field description files (JSON text).

inline nlohmann::json field_to_json(const FieldParams& p) {
  nlohmann::json j;
  j["beta"] = p.beta;
  j["K"] = p.K;
  j["T"] = p.T;
  const double sigma = p.modes.empty() ? 2.0 : p.modes.front().sigma;
  j["sigma"] = sigma;
  j["time_knots"] = p.n_time_knots;
  j["modes"] = nlohmann::json::array();
  for (std::size_t m = 0; m < p.modes.size(); ++m) {
    const auto& mode = p.modes[m];
    nlohmann::json jm;
    jm["k"] = {mode.k[0], mode.k[1], mode.k[2]};
    jm["direction"] = {mode.direction[0], mode.direction[1], mode.direction[2]};
    if (mode.phase != 0.0) jm["phase"] = mode.phase;
    if (mode.sigma != sigma) jm["sigma"] = mode.sigma;
    std::vector<double> coeffs(p.theta.begin() + m * p.n_time_knots, p.theta.begin() + (m + 1) * p.n_time_knots);
    jm["coefficients"] = coeffs;
    j["modes"].push_back(jm);
  }
  return j;
}

inline FieldParams field_from_json(const nlohmann::json& j) {
  FieldParams p;
  try {
    p.beta = j.at("beta").get<double>();
    p.K = j.at("K").get<double>();
    p.T = j.at("T").get<double>();
    const double sigma = j.value("sigma", 2.0);
    p.n_time_knots = j.at("time_knots").get<int>();
    for (const auto& jm : j.at("modes")) {
      FieldMode mode;
      const auto k = jm.at("k").get<std::vector<double>>();
      const auto d = jm.at("direction").get<std::vector<double>>();
      require(k.size() == 3 && d.size() == 3, "mode k and direction must have 3 entries");
      mode.k = Vec3(k[0], k[1], k[2]);
      mode.direction = Vec3(d[0], d[1], d[2]);
      mode.phase = jm.value("phase", 0.0);
      mode.sigma = jm.value("sigma", sigma);
      const auto coeffs = jm.at("coefficients").get<std::vector<double>>();
      require(static_cast<int>(coeffs.size()) == p.n_time_knots, "mode needs one coefficient per time knot");
      p.modes.push_back(mode);
      p.theta.insert(p.theta.end(), coeffs.begin(), coeffs.end());
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed field description: ") + e.what());
  }
  p.validate();
  return p;
}

inline void write_field_file(const std::string& path, const FieldParams& p) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write field file " + path);
  out << field_to_json(p).dump(2) << '\n';
}

inline FieldParams read_field_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config-reference", "cannot open field file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("field file " + path + " is not valid JSON: " + e.what());
  }
  return field_from_json(j);
}

}  // namespace vpc
