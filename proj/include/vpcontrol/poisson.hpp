#pragma once

// Charge deposition, the free-space Newtonian potential
//   psi(x) = int rho(y) / |x - y| dy
// on a uniform node grid, the self-consistent field E = -grad psi, and
// trilinear interpolation.

#include "vpcontrol/core.hpp"
#include "vpcontrol/phase_space.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vpc {

/// Mean of 1/|r| over the unit cube centred at the origin,
///   3 ln((sqrt3 + 1)/(sqrt3 - 1)) - pi/2.
inline constexpr double kCubeInverseDistanceMean = 2.3800773639795535;

struct GridSpec {
  Vec3 center = Vec3::Zero();
  double half_extent = 1.0;
  int n = 32;

  void validate() const {
    require(n >= 8, "grid needs at least 8 points per axis");
    require(std::isfinite(half_extent) && half_extent > 0.0, "grid half extent must be > 0");
    require(all_finite(center), "grid center must be finite");
  }

  double spacing() const { return 2.0 * half_extent / (n - 1); }
  double cell_volume() const {
    const double h = spacing();
    return h * h * h;
  }
  std::size_t size() const { return static_cast<std::size_t>(n) * n * n; }
  std::size_t index(int i, int j, int k) const { return (static_cast<std::size_t>(i) * n + j) * n + k; }
  Vec3 lower() const { return center - Vec3::Constant(half_extent); }
  Vec3 node(int i, int j, int k) const { return lower() + spacing() * Vec3(i, j, k); }

  bool contains(const Vec3& x) const {
    const Vec3 d = x - center;
    return std::abs(d[0]) <= half_extent && std::abs(d[1]) <= half_extent && std::abs(d[2]) <= half_extent;
  }

  bool operator==(const GridSpec& o) const {
    return center == o.center && half_extent == o.half_extent && n == o.n;
  }
};

template <class T>
struct GridField {
  GridSpec spec;
  std::vector<T> data;

  GridField() = default;
  explicit GridField(const GridSpec& s, const T& fill) : spec(s), data(s.size(), fill) {}

  T& operator()(int i, int j, int k) { return data[spec.index(i, j, k)]; }
  const T& operator()(int i, int j, int k) const { return data[spec.index(i, j, k)]; }
};

using ScalarGrid = GridField<double>;
using VectorGrid = GridField<Vec3>;

inline ScalarGrid zero_scalar_grid(const GridSpec& s) { return ScalarGrid(s, 0.0); }
inline VectorGrid zero_vector_grid(const GridSpec& s) { return VectorGrid(s, Vec3::Zero()); }

namespace detail {

struct CellLocation {
  int i, j, k;
  double fx, fy, fz;
};

inline bool locate(const GridSpec& spec, const Vec3& x, CellLocation& loc) {
  const double inv_h = 1.0 / spec.spacing();
  const Vec3 u = (x - spec.lower()) * inv_h;
  const double top = spec.n - 1;
  if (!(u[0] >= 0.0 && u[0] <= top && u[1] >= 0.0 && u[1] <= top && u[2] >= 0.0 && u[2] <= top)) return false;
  int idx[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    idx[a] = std::min(static_cast<int>(u[a]), spec.n - 2);
    frac[a] = u[a] - idx[a];
  }
  loc = {idx[0], idx[1], idx[2], frac[0], frac[1], frac[2]};
  return true;
}

inline std::string describe(const Vec3& x) {
  return "(" + std::to_string(x[0]) + ", " + std::to_string(x[1]) + ", " + std::to_string(x[2]) + ")";
}

}  // namespace detail

/// Cloud-in-cell deposition of values[i] * weight divided by the cell
/// volume.
inline ScalarGrid deposit_charge(std::span<const PhasePoint> points, std::span<const double> values, double weight,
                                 const GridSpec& spec) {
  spec.validate();
  ScalarGrid rho = zero_scalar_grid(spec);
  const double scale = weight / spec.cell_volume();
  for (std::size_t p = 0; p < points.size(); ++p) {
    detail::CellLocation c;
    if (!detail::locate(spec, points[p].x, c))
      throw DomainError("particle " + std::to_string(p) + " at x = " + detail::describe(points[p].x) +
                        " outside the grid box of half extent " + std::to_string(spec.half_extent));
    const double q = values[p] * scale;
    if (q == 0.0) continue;
    const double wx[2] = {1.0 - c.fx, c.fx};
    const double wy[2] = {1.0 - c.fy, c.fy};
    const double wz[2] = {1.0 - c.fz, c.fz};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int d = 0; d < 2; ++d) rho(c.i + a, c.j + b, c.k + d) += q * wx[a] * wy[b] * wz[d];
  }
  return rho;
}

inline ScalarGrid deposit_charge(const ParticleEnsemble& ens, const GridSpec& spec) {
  return deposit_charge(std::span<const PhasePoint>(ens.points), std::span<const double>(ens.values), ens.weight,
                        spec);
}

/// sum rho * cell volume.
inline double total_charge(const ScalarGrid& rho) {
  double acc = 0.0;
  for (double r : rho.data) acc += r;
  return acc * rho.spec.cell_volume();
}

enum class PoissonMethod { Direct, Fourier };

/// Reference path: direct summation over all nonzero source nodes,
/// O(n^3 * nnz).
inline ScalarGrid solve_potential_direct(const ScalarGrid& rho) {
  const auto& s = rho.spec;
  s.validate();
  const int n = s.n;
  const double h = s.spacing();
  std::vector<double> kernel(s.size());
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        kernel[s.index(a, b, c)] =
            (a == 0 && b == 0 && c == 0) ? kCubeInverseDistanceMean / h
                                         : 1.0 / (h * std::sqrt(static_cast<double>(a * a + b * b + c * c)));
  struct Source {
    int i, j, k;
    double q;
  };
  std::vector<Source> sources;
  const double cell = s.cell_volume();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        if (rho(i, j, k) != 0.0) sources.push_back({i, j, k, rho(i, j, k) * cell});

  ScalarGrid psi = zero_scalar_grid(s);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double acc = 0.0;
        for (const auto& src : sources)
          acc += src.q * kernel[s.index(std::abs(i - src.i), std::abs(j - src.j), std::abs(k - src.k))];
        psi(i, j, k) = acc;
      }
  return psi;
}

/// Zero-padded (Hockney) Fourier convolution with the same kernel as the
/// direct path. Plans and the kernel transform are built once per grid.
class PoissonSolver {
public:
  explicit PoissonSolver(const GridSpec& spec) : spec_(spec) {
    spec_.validate();
    const int n = spec_.n;
    m_ = 2 * n;
    const std::size_t real_size = static_cast<std::size_t>(m_) * m_ * m_;
    const std::size_t complex_size = static_cast<std::size_t>(m_) * m_ * (m_ / 2 + 1);
    real_.reset(fftw_alloc_real(real_size));
    spectrum_.reset(fftw_alloc_complex(complex_size));
    kernel_hat_.resize(complex_size);
    // FFTW_ESTIMATE keeps plan selection, hence round-off, identical
    // between runs.
    forward_ = fftw_plan_dft_r2c_3d(m_, m_, m_, real_.get(), spectrum_.get(), FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_3d(m_, m_, m_, spectrum_.get(), real_.get(), FFTW_ESTIMATE);
    if (!forward_ || !backward_) throw Error("fftw", "FFTW plan creation failed");

    const double h = spec_.spacing();
    for (int a = 0; a < m_; ++a)
      for (int b = 0; b < m_; ++b)
        for (int c = 0; c < m_; ++c) {
          const int da = std::min(a, m_ - a), db = std::min(b, m_ - b), dc = std::min(c, m_ - c);
          const double r2 = static_cast<double>(da * da + db * db + dc * dc);
          real_.get()[padded(a, b, c)] = r2 == 0.0 ? kCubeInverseDistanceMean / h : 1.0 / (h * std::sqrt(r2));
        }
    fftw_execute(forward_);
    const double norm = spec_.cell_volume() / static_cast<double>(real_size);
    for (std::size_t i = 0; i < complex_size; ++i)
      kernel_hat_[i] = std::complex<double>(spectrum_.get()[i][0], spectrum_.get()[i][1]) * norm;
  }

  PoissonSolver(const PoissonSolver&) = delete;
  PoissonSolver& operator=(const PoissonSolver&) = delete;

  ~PoissonSolver() {
    if (forward_) fftw_destroy_plan(forward_);
    if (backward_) fftw_destroy_plan(backward_);
  }

  const GridSpec& spec() const { return spec_; }

  ScalarGrid solve(const ScalarGrid& rho) {
    require(rho.spec == spec_, "density grid does not match the solver grid");
    const int n = spec_.n;
    double* r = real_.get();
    std::fill(r, r + static_cast<std::size_t>(m_) * m_ * m_, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) r[padded(i, j, k)] = rho(i, j, k);
    fftw_execute(forward_);
    auto* s = spectrum_.get();
    for (std::size_t i = 0; i < kernel_hat_.size(); ++i) {
      const std::complex<double> v = std::complex<double>(s[i][0], s[i][1]) * kernel_hat_[i];
      s[i][0] = v.real();
      s[i][1] = v.imag();
    }
    fftw_execute(backward_);
    ScalarGrid psi = zero_scalar_grid(spec_);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) psi(i, j, k) = r[padded(i, j, k)];
    return psi;
  }

private:
  struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
  };

  std::size_t padded(int a, int b, int c) const { return (static_cast<std::size_t>(a) * m_ + b) * m_ + c; }

  GridSpec spec_;
  int m_ = 0;
  std::unique_ptr<double, FftwFree> real_;
  std::unique_ptr<fftw_complex, FftwFree> spectrum_;
  std::vector<std::complex<double>> kernel_hat_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

inline ScalarGrid solve_potential(const ScalarGrid& rho, PoissonMethod method = PoissonMethod::Direct) {
  for (double r : rho.data)
    if (!std::isfinite(r)) throw NumericError("density contains non-finite values");
  if (method == PoissonMethod::Direct) return solve_potential_direct(rho);
  PoissonSolver solver(rho.spec);
  return solver.solve(rho);
}

/// E = -grad psi: central differences inside, second-order one-sided
/// differences on the faces.
inline VectorGrid electric_field(const ScalarGrid& psi) {
  const auto& s = psi.spec;
  const int n = s.n;
  const double inv2h = 0.5 / s.spacing();
  VectorGrid e = zero_vector_grid(s);
  auto diff = [&](int i, int j, int k, int axis) {
    int idx[3] = {i, j, k};
    auto at = [&](int offset) {
      int p[3] = {idx[0], idx[1], idx[2]};
      p[axis] += offset;
      return psi(p[0], p[1], p[2]);
    };
    const int c = idx[axis];
    if (c == 0) return (-3.0 * at(0) + 4.0 * at(1) - at(2)) * inv2h;
    if (c == n - 1) return (3.0 * at(0) - 4.0 * at(-1) + at(-2)) * inv2h;
    return (at(1) - at(-1)) * inv2h;
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) e(i, j, k) = -Vec3(diff(i, j, k, 0), diff(i, j, k, 1), diff(i, j, k, 2));
  return e;
}

template <class T>
T interpolate_field(const GridField<T>& grid, const Vec3& x) {
  detail::CellLocation c;
  if (!detail::locate(grid.spec, x, c))
    throw DomainError("interpolation point " + detail::describe(x) + " outside the grid box");
  const double wx[2] = {1.0 - c.fx, c.fx};
  const double wy[2] = {1.0 - c.fy, c.fy};
  const double wz[2] = {1.0 - c.fz, c.fz};
  T out = grid(c.i, c.j, c.k) * (wx[0] * wy[0] * wz[0]);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int d = 0; d < 2; ++d) {
        if (a == 0 && b == 0 && d == 0) continue;
        out += grid(c.i + a, c.j + b, c.k + d) * (wx[a] * wy[b] * wz[d]);
      }
  return out;
}

/// Trapezoidal quadrature of |E|^2 / (8 pi) over the grid box.
inline double field_energy(const VectorGrid& e) {
  const auto& s = e.spec;
  const int n = s.n;
  auto w = [n](int i) { return (i == 0 || i == n - 1) ? 0.5 : 1.0; };
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) acc += w(i) * w(j) * w(k) * e(i, j, k).squaredNorm();
  return acc * s.cell_volume() / (8.0 * kPi);
}

/// Electrostatic energy 1/2 sum rho psi h^3. For the free-space potential
/// this equals int |E|^2 / (8 pi) over all of R^3, including the far field
/// outside the box.
inline double potential_energy(const ScalarGrid& rho, const ScalarGrid& psi) {
  require(rho.spec == psi.spec, "potential energy needs matching grids");
  double acc = 0.0;
  for (std::size_t i = 0; i < rho.data.size(); ++i) acc += rho.data[i] * psi.data[i];
  return 0.5 * acc * rho.spec.cell_volume();
}

inline double max_magnitude(const VectorGrid& e) {
  double m = 0.0;
  for (const auto& v : e.data) m = std::max(m, v.norm());
  return m;
}

/// Relative L^2 residual of the 7-point form of -Lap psi = 4 pi rho on nodes
/// at least `margin` nodes away from the faces.
inline double laplacian_residual(const ScalarGrid& psi, const ScalarGrid& rho, int margin = 1) {
  require(psi.spec == rho.spec, "laplacian residual needs matching grids");
  require(margin >= 1, "margin must be >= 1");
  const int n = psi.spec.n;
  const double inv_h2 = 1.0 / (psi.spec.spacing() * psi.spec.spacing());
  double num = 0.0, den = 0.0;
  for (int i = margin; i < n - margin; ++i)
    for (int j = margin; j < n - margin; ++j)
      for (int k = margin; k < n - margin; ++k) {
        const double lap = (psi(i + 1, j, k) + psi(i - 1, j, k) + psi(i, j + 1, k) + psi(i, j - 1, k) +
                            psi(i, j, k + 1) + psi(i, j, k - 1) - 6.0 * psi(i, j, k)) *
                           inv_h2;
        const double src = 4.0 * kPi * rho(i, j, k);
        num += (-lap - src) * (-lap - src);
        den += src * src;
      }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace vpc
