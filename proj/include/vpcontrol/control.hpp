#pragma once

// Tracking-type cost
//   J(B) = 1/2 ||f_B(T) - f_d||^2_{L^2} + lambda/2 ||D_x B||^2_{L^2}
// and projected descent over the admissible ball ||B||_V <= K.

#include "vpcontrol/core.hpp"
#include "vpcontrol/fields.hpp"
#include "vpcontrol/vlasov.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace vpc {

/// Desired terminal state f_d as marker data: positions y_i at T carrying
/// f_d(y_i) = f0(z_i).
struct Target {
  ParticleEnsemble state;
  double T = 1.0;
};

inline Target make_target(const FieldParams& b_star, const InitialDatum& datum, const Numerics& numerics) {
  Numerics num = numerics;
  num.keep_positions = false;
  num.energy = false;
  auto rec = simulate(datum, b_star, num);
  return {std::move(rec.final_state), b_star.T};
}

struct CostReport {
  double tracking = 0.0;
  double regularization = 0.0;
  double total = 0.0;
  double lambda = 0.0;
};

inline void check_same_lattice(const ParticleEnsemble& a, const ParticleEnsemble& b) {
  bool same = a.size() == b.size() && a.weight == b.weight && a.spacing == b.spacing;
  for (std::size_t i = 0; same && i < a.size(); ++i)
    same = a.origins[i].x == b.origins[i].x && a.origins[i].v == b.origins[i].v && a.values[i] == b.values[i];
  if (!same) throw InvalidArgument("target lattice does not match the simulation lattice");
}

/// 1/2 sum_i (f_B(T, y_i) - f_d(y_i))^2 w over the target markers y_i.
inline double tracking_term(const SolutionRecord& rec, const Target& target) {
  check_same_lattice(rec.final_state, target.state);
  const auto& st = target.state;
  double acc = 0.0;
  for (std::size_t i = 0; i < st.size(); ++i) {
    const double d = eval_f(rec, target.T, st.points[i]).value - st.values[i];
    acc += d * d;
  }
  return 0.5 * acc * st.weight;
}

/// Evaluates J for fields sharing one mode structure.
class CostFunctional {
public:
  CostFunctional(Target target, double lambda, InitialDatum datum, Numerics numerics,
                 std::shared_ptr<const NormQuadrature> quad)
      : target_(std::move(target)), lambda_(lambda), datum_(datum), numerics_(std::move(numerics)),
        quad_(std::move(quad)) {
    require(std::isfinite(lambda_) && lambda_ >= 0.0, "lambda must be >= 0");
    numerics_.keep_positions = false;
    numerics_.energy = false;
  }

  CostReport operator()(const FieldParams& b) const {
    require(b.T == target_.T, "field final time differs from the target time");
    const auto rec = simulate(datum_, b, numerics_);
    CostReport r;
    r.lambda = lambda_;
    r.tracking = tracking_term(rec, target_);
    if (lambda_ > 0.0) r.regularization = 0.5 * lambda_ * dx_b_l2_sq(b, *quad_);
    r.total = r.tracking + r.regularization;
    if (!std::isfinite(r.total)) throw NumericError("cost evaluation produced a non-finite value");
    return r;
  }

  const Target& target() const { return target_; }
  double lambda() const { return lambda_; }
  const NormQuadrature& quadrature() const { return *quad_; }

private:
  Target target_;
  double lambda_;
  InitialDatum datum_;
  Numerics numerics_;
  std::shared_ptr<const NormQuadrature> quad_;
};

inline CostReport cost(const FieldParams& b, const Target& target, double lambda, const InitialDatum& datum,
                       const Numerics& numerics, const QuadratureSpec& quad = {}) {
  return CostFunctional(target, lambda, datum, numerics, std::make_shared<NormQuadrature>(b.modes, quad))(b);
}

// ---------------------------------------------------------------------------
// Gradient estimates

enum class GradScheme { Central, Simultaneous };

struct GradOptions {
  GradScheme scheme = GradScheme::Central;
  double step = 1e-4;
  int directions = 64;  // simultaneous perturbation only
  std::uint64_t seed = 1;
};

namespace detail {

/// +-1 perturbation directions. When `count` is a power of two larger than
/// the dimension, columns of a Sylvester-Hadamard matrix with random signs
/// are used, so the direction average of Delta Delta^T is exactly the
/// identity; otherwise independent Rademacher draws.
inline std::vector<std::vector<double>> perturbation_directions(std::size_t dim, int count, std::uint64_t seed) {
  require(count >= 1, "need at least one perturbation direction");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> dirs(count, std::vector<double>(dim));
  const auto n = static_cast<std::size_t>(count);
  const bool pow2 = (n & (n - 1)) == 0;
  if (pow2 && n > dim) {
    std::vector<std::size_t> cols(n - 1);
    std::iota(cols.begin(), cols.end(), 1);
    std::shuffle(cols.begin(), cols.end(), rng);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t j = 0; j < dim; ++j) {
      const double sign = coin(rng) ? 1.0 : -1.0;
      for (std::size_t k = 0; k < n; ++k) {
        // Sylvester entry H[k][c] = (-1)^popcount(k & c)
        const int parity = __builtin_popcountll(k & cols[j]) & 1;
        dirs[k][j] = sign * (parity ? -1.0 : 1.0);
      }
    }
    return dirs;
  }
  std::bernoulli_distribution coin(0.5);
  for (auto& d : dirs)
    for (auto& e : d) e = coin(rng) ? 1.0 : -1.0;
  return dirs;
}

}  // namespace detail

/// Finite-difference gradient of a scalar objective J(theta).
template <class Objective>
std::vector<double> grad_estimate(Objective&& objective, const std::vector<double>& theta, const GradOptions& opt,
                                  int* evaluations = nullptr) {
  require(opt.step > 0.0 && std::isfinite(opt.step), "gradient step must be > 0");
  const std::size_t d = theta.size();
  std::vector<double> g(d, 0.0);
  int evals = 0;
  auto call = [&](const std::vector<double>& th, const std::string& where) {
    const double v = objective(th);
    ++evals;
    if (!std::isfinite(v)) throw NumericError("non-finite objective while probing " + where);
    return v;
  };
  if (opt.scheme == GradScheme::Central) {
    std::vector<double> th = theta;
    for (std::size_t j = 0; j < d; ++j) {
      th[j] = theta[j] + opt.step;
      const double up = call(th, "coordinate " + std::to_string(j));
      th[j] = theta[j] - opt.step;
      const double down = call(th, "coordinate " + std::to_string(j));
      th[j] = theta[j];
      g[j] = (up - down) / (2.0 * opt.step);
    }
  } else {
    const auto dirs = detail::perturbation_directions(d, opt.directions, opt.seed);
    std::vector<double> plus(d), minus(d);
    for (std::size_t k = 0; k < dirs.size(); ++k) {
      for (std::size_t j = 0; j < d; ++j) {
        plus[j] = theta[j] + opt.step * dirs[k][j];
        minus[j] = theta[j] - opt.step * dirs[k][j];
      }
      const double slope = (call(plus, "direction " + std::to_string(k)) -
                            call(minus, "direction " + std::to_string(k))) /
                           (2.0 * opt.step);
      for (std::size_t j = 0; j < d; ++j) g[j] += slope * dirs[k][j];
    }
    for (auto& e : g) e /= static_cast<double>(dirs.size());
  }
  if (evaluations) *evaluations += evals;
  return g;
}

// ---------------------------------------------------------------------------
// Projected descent

struct OptOptions {
  int budget = 200;          // cost evaluations, including gradient probes
  double alpha0 = 1.0;
  double shrink = 0.5;
  double expand = 2.0;       // applied after a first-trial acceptance
  double sufficient_decrease = 1e-4;
  double alpha_min = 1e-12;
  double gtol = 1e-8;        // absolute gradient-norm threshold
  double gtol_rel = 1e-3;    // relative to the first gradient norm
  GradOptions grad{};
};

struct OptIterate {
  int iter = 0;
  std::vector<double> theta;
  CostReport cost;
  double alpha = 0.0;
  double v_norm = 0.0;
  bool accepted = false;
};

struct OptTrace {
  std::vector<OptIterate> iterates;
  std::vector<double> gradient_norms;
  int evaluations = 0;
  std::string status;  // converged | budget | step-underflow | stalled
  OptOptions options;
  FieldParams best;
  CostReport best_cost;

  std::vector<double> accepted_costs() const {
    std::vector<double> out;
    for (const auto& it : iterates)
      if (it.accepted) out.push_back(it.cost.total);
    return out;
  }
};

/// theta <- P(theta - alpha g) with backtracking Armijo search on the
/// projection arc. `cost` maps FieldParams to CostReport.
template <class CostFn>
OptTrace optimize(const FieldParams& theta0, CostFn&& cost_fn, const NormQuadrature& quad, const OptOptions& opt) {
  require(opt.budget >= 0, "budget must be >= 0");
  require(opt.shrink > 0.0 && opt.shrink < 1.0, "shrink factor must lie in (0, 1)");
  require(opt.alpha0 > 0.0, "initial step must be > 0");
  OptTrace trace;
  trace.options = opt;

  FieldParams current = project_to_ball(theta0, quad);
  CostReport current_cost = cost_fn(current);
  trace.evaluations = 1;
  trace.iterates.push_back({0, current.theta, current_cost, 0.0, vnorm(current, quad).v_norm, true});
  trace.best = current;
  trace.best_cost = current_cost;

  auto objective = [&](const std::vector<double>& th) {
    FieldParams p = current;
    p.theta = th;
    return cost_fn(p).total;
  };

  const std::size_t d = current.dim();
  const int probe_cost = opt.grad.scheme == GradScheme::Central ? static_cast<int>(2 * d) : 2 * opt.grad.directions;
  double alpha = opt.alpha0;
  double gtol = opt.gtol;
  int accepted_steps = 0;
  int iter = 0;
  trace.status = "budget";

  while (true) {
    if (d == 0) {
      trace.status = "converged";
      break;
    }
    if (trace.evaluations + probe_cost + 1 > opt.budget) {
      trace.status = "budget";
      break;
    }
    const auto g = grad_estimate(objective, current.theta, opt.grad, &trace.evaluations);
    double gnorm = 0.0;
    for (double e : g) gnorm += e * e;
    gnorm = std::sqrt(gnorm);
    trace.gradient_norms.push_back(gnorm);
    if (trace.gradient_norms.size() == 1) gtol = std::max(opt.gtol, opt.gtol_rel * gnorm);
    if (gnorm <= gtol) {
      trace.status = "converged";
      break;
    }

    bool accepted = false, first_trial = true, stop = false;
    ++iter;
    while (!accepted) {
      if (alpha < opt.alpha_min) {
        trace.status = "step-underflow";
        stop = true;
        break;
      }
      if (trace.evaluations >= opt.budget) {
        trace.status = "budget";
        stop = true;
        break;
      }
      FieldParams trial = current;
      for (std::size_t j = 0; j < d; ++j) trial.theta[j] -= alpha * g[j];
      trial = project_to_ball(trial, quad);
      double slope = 0.0;
      for (std::size_t j = 0; j < d; ++j) slope += g[j] * (trial.theta[j] - current.theta[j]);
      if (trial.theta == current.theta) {
        trace.status = "converged";
        stop = true;
        break;
      }
      const CostReport tc = cost_fn(trial);
      ++trace.evaluations;
      const double vn = vnorm(trial, quad).v_norm;
      if (tc.total <= current_cost.total + opt.sufficient_decrease * slope && tc.total <= current_cost.total) {
        accepted = true;
        trace.iterates.push_back({iter, trial.theta, tc, alpha, vn, true});
        current = trial;
        current_cost = tc;
        ++accepted_steps;
        if (first_trial) alpha *= opt.expand;
      } else {
        trace.iterates.push_back({iter, trial.theta, tc, alpha, vn, false});
        alpha *= opt.shrink;
        first_trial = false;
      }
    }
    if (stop) break;
  }
  if (accepted_steps == 0 && trace.status != "converged") trace.status = "stalled";
  trace.best = current;
  trace.best_cost = current_cost;
  return trace;
}

/// Optimizer against a manufactured or loaded target.
inline OptTrace optimize(const FieldParams& theta0, const Target& target, double lambda, const InitialDatum& datum,
                         const Numerics& numerics, const OptOptions& opt, const QuadratureSpec& qspec = {}) {
  auto quad = std::make_shared<NormQuadrature>(theta0.modes, qspec);
  CostFunctional j(target, lambda, datum, numerics, quad);
  return optimize(theta0, j, *quad, opt);
}

}  // namespace vpc
