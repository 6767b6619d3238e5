#pragma once

// Exact divergence computation on finite discrete distributions. Every
// comparison scheme's objective is a positively weighted sum of terms
// f(a_t . C) with affine score arguments, so it is concave in the critic
// table C and a single ascent routine (damped Newton steps with Armijo
// backtracking, monotone in the objective) maximizes all of them to global
// optimality. Total term weight is 2 for every scheme, hence the hard
// ceiling 2M; hitting 2M - eps_sup is accepted as convergence because some
// suprema (log-sigmoid on separated supports) are approached only in the
// limit of infinite critic gaps.
//
// The hinge loss is piecewise linear, and kink-stopping makes plain ascent
// both slow and inaccurate, so it is maximized through a sequence of smooth
// concave surrogates f_b(z) = 1 - softplus(b(1-z))/b with b growing to
// ~1.7e7. Since f_b <= f <= f_b + log(2)/b and weights sum to 2, the exact
// hinge objective evaluated at the final surrogate optimum is within
// 2log(2)/b < 1e-7 of the true supremum; the reported value is always that
// exact evaluation, hence a certified lower bound.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "relfdiv/discrete.hpp"
#include "relfdiv/losses.hpp"
#include "relfdiv/util.hpp"
#include "relfdiv/variant.hpp"

namespace relfdiv {

inline constexpr std::size_t kMaxSupport = 64;

struct SolveOptions {
  double tol = 1e-6;       // gradient-norm convergence threshold
  int max_iters = 100000;  // total accepted ascent steps
  double eps_sup = 1e-4;   // accepted slack below the 2M ceiling
};

struct OracleResult {
  double value = 0.0;
  CriticTable critic;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
};

namespace detail {

struct AffineTerm {
  double weight;
  Eigen::VectorXd coeff;  // term argument is coeff . c
};

inline std::vector<AffineTerm> variant_terms(const std::vector<double>& p,
                                             const std::vector<double>& q,
                                             Variant v) {
  const Eigen::Index n = static_cast<Eigen::Index>(p.size());
  const Eigen::VectorXd pv = Eigen::Map<const Eigen::VectorXd>(p.data(), n);
  const Eigen::VectorXd qv = Eigen::Map<const Eigen::VectorXd>(q.data(), n);
  const Eigen::VectorXd mv = 0.5 * (pv + qv);
  auto unit = [n](Eigen::Index i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[i] = 1.0;
    return e;
  };
  std::vector<AffineTerm> terms;
  switch (v) {
    case Variant::Sy:
      for (Eigen::Index i = 0; i < n; ++i) {
        if (pv[i] > 0) terms.push_back({pv[i], unit(i)});
      }
      for (Eigen::Index j = 0; j < n; ++j) {
        if (qv[j] > 0) terms.push_back({qv[j], -unit(j)});
      }
      break;
    case Variant::Rp:
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          const double w = 2.0 * pv[i] * qv[j];
          if (w > 0 && i != j) terms.push_back({w, unit(i) - unit(j)});
        }
      }
      break;
    case Variant::Ra:
      for (Eigen::Index i = 0; i < n; ++i) {
        if (pv[i] > 0) terms.push_back({pv[i], unit(i) - qv});
      }
      for (Eigen::Index j = 0; j < n; ++j) {
        if (qv[j] > 0) terms.push_back({qv[j], pv - unit(j)});
      }
      break;
    case Variant::Ralf:
      for (Eigen::Index i = 0; i < n; ++i) {
        if (pv[i] > 0) terms.push_back({2.0 * pv[i], unit(i) - qv});
      }
      break;
    case Variant::Rc:
      for (Eigen::Index i = 0; i < n; ++i) {
        if (pv[i] > 0) terms.push_back({pv[i], unit(i) - mv});
      }
      for (Eigen::Index j = 0; j < n; ++j) {
        if (qv[j] > 0) terms.push_back({qv[j], mv - unit(j)});
      }
      break;
  }
  return terms;
}

// Hinge surrogate family: beta <= 0 selects the exact loss.
inline double surrogate_eval(const ConcaveLoss& loss, double beta, double z) {
  if (loss.kind == LossKind::Hinge && beta > 0) {
    return 1.0 - softplus(beta * (1.0 - z)) / beta;
  }
  return f_eval(loss, z);
}

inline double surrogate_grad(const ConcaveLoss& loss, double beta, double z) {
  if (loss.kind == LossKind::Hinge && beta > 0) {
    return sigmoid(beta * (1.0 - z));
  }
  return f_grad(loss, z);
}

inline double surrogate_curv(const ConcaveLoss& loss, double beta, double z) {
  if (loss.kind == LossKind::Hinge && beta > 0) {
    const double s = sigmoid(beta * (1.0 - z));
    return -beta * s * (1.0 - s);
  }
  return f_curv(loss, z);
}

inline double terms_value(const std::vector<AffineTerm>& terms, const ConcaveLoss& loss,
                          double beta, const Eigen::VectorXd& c) {
  NeumaierSum s;
  for (const auto& t : terms) s.add(t.weight * surrogate_eval(loss, beta, t.coeff.dot(c)));
  return s.value();
}

struct AscentOutcome {
  bool converged = false;
  bool saturated = false;
  int iters = 0;
  double grad_norm = 0.0;
  double exact_value = 0.0;
};

// Damped-Newton ascent with Armijo backtracking on the (possibly smoothed)
// objective. The exact-loss value is monitored every iteration so that
// saturation at the 2M ceiling exits early even while optimizing a
// surrogate. `free` lists the coordinates being optimized; the rest stay
// fixed (gauge pinning for the shift-invariant schemes).
//
// Two safeguards matter on the flat stretches of highly smoothed hinges,
// where the Hessian vanishes: the step norm is capped (an uncapped
// near-singular solve yields astronomically long steps whose backtracked
// remnants advance by ~1e-9 per iteration), and the damping grows whenever a
// full step is rejected, so the model is distrusted exactly when it is bad.
inline constexpr double kStepCap = 16.0;

// At a numerical stall the value can no longer be improved in floating
// point; by concavity the iterate then sits at the numerical maximum. The
// quadratic-model residual g'(-H)^{-1}g / 2 bounds the remaining gap for a
// locally quadratic model, so certify convergence when that residual is
// negligible and refuse when the curvature cannot vouch for the gradient
// (flat directions with a real gradient are never certified).
inline bool stall_certified(const Eigen::VectorXd& g, const Eigen::MatrixXd& h) {
  if (!(g.norm() <= 1e-4)) return false;
  Eigen::MatrixXd sys = -h;
  sys.diagonal().array() += 1e-12;
  const Eigen::VectorXd d = Eigen::LDLT<Eigen::MatrixXd>(sys).solve(g);
  const double gap = 0.5 * d.dot(g);
  return std::isfinite(gap) && gap <= 1e-9;
}

inline AscentOutcome ascend(const std::vector<AffineTerm>& terms, const ConcaveLoss& loss,
                            double beta, const std::vector<int>& free, double sup_total,
                            const SolveOptions& opts, int iter_budget, Eigen::VectorXd& c) {
  AscentOutcome out;
  const int m = static_cast<int>(free.size());
  out.exact_value = terms_value(terms, loss, 0.0, c);
  if (m == 0) {
    out.converged = true;
    return out;
  }
  double lambda = 1e-10;
  int tiny_streak = 0;
  while (out.iters < iter_budget) {
    if (out.exact_value >= sup_total - opts.eps_sup) {
      out.converged = true;
      out.saturated = true;
      return out;
    }
    const double value = terms_value(terms, loss, beta, c);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(c.size());
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(c.size(), c.size());
    for (const auto& t : terms) {
      const double z = t.coeff.dot(c);
      grad.noalias() += (t.weight * surrogate_grad(loss, beta, z)) * t.coeff;
      hess.noalias() += (t.weight * surrogate_curv(loss, beta, z)) * (t.coeff * t.coeff.transpose());
    }
    Eigen::VectorXd g(m);
    Eigen::MatrixXd h(m, m);
    for (int a = 0; a < m; ++a) {
      g[a] = grad[free[a]];
      for (int b = 0; b < m; ++b) h(a, b) = hess(free[a], free[b]);
    }
    out.grad_norm = g.norm();
    if (out.grad_norm <= opts.tol) {
      out.converged = true;
      return out;
    }
    // -h is positive semidefinite (concavity); lambda keeps the system
    // definite, shrinking toward a pure Newton step while steps succeed.
    bool stepped = false;
    double accepted_t = 1.0;
    double new_value = value;
    while (!stepped) {
      Eigen::MatrixXd sys = -h;
      sys.diagonal().array() += lambda;
      Eigen::VectorXd d = Eigen::LDLT<Eigen::MatrixXd>(sys).solve(g);
      const double dn = d.norm();
      if (std::isfinite(dn) && dn > kStepCap) d *= kStepCap / dn;
      const double slope = d.dot(g);
      if (std::isfinite(slope) && slope > 0) {
        Eigen::VectorXd dir = Eigen::VectorXd::Zero(c.size());
        for (int a = 0; a < m; ++a) dir[free[a]] = d[a];
        double t = 1.0;
        for (int half = 0; half < 60; ++half) {
          const double trial = terms_value(terms, loss, beta, c + t * dir);
          if (trial >= value + 1e-4 * t * slope) {
            c += t * dir;
            stepped = true;
            accepted_t = t;
            new_value = trial;
            break;
          }
          t *= 0.5;
        }
      }
      if (!stepped) {
        lambda = std::max(lambda, 1e-12) * 100.0;
        if (lambda > 1e14) {  // no improving step exists numerically
          out.converged = stall_certified(g, h);
          out.exact_value = terms_value(terms, loss, 0.0, c);
          return out;
        }
      }
    }
    lambda = accepted_t == 1.0 ? std::max(lambda * 0.25, 1e-12) : std::min(lambda * 4.0, 1e14);
    tiny_streak = new_value - value <= 1e-15 * (1.0 + std::abs(value)) ? tiny_streak + 1 : 0;
    ++out.iters;
    out.exact_value = terms_value(terms, loss, 0.0, c);
    if (tiny_streak >= 30) {  // numerically stalled
      out.converged = stall_certified(g, h);
      return out;
    }
  }
  return out;
}

inline void check_common(const DiscreteDist& p, const DiscreteDist& q) {
  validate_dist(p, "first distribution");
  validate_dist(q, "second distribution");
}

}  // namespace detail

// Objective value of a scheme at a fixed critic. The critic must be tabulated
// on the union support of the two distributions.
inline double objective(const DiscreteDist& p, const DiscreteDist& q, const CriticTable& critic,
                        const ConcaveLoss& loss, Variant v) {
  detail::check_common(p, q);
  auto [pa, qa] = align(p, q);
  validate_critic(critic, pa.points);
  const auto terms = detail::variant_terms(pa.probs, qa.probs, v);
  const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(
      critic.values.data(), static_cast<Eigen::Index>(critic.values.size()));
  return detail::terms_value(terms, loss, 0.0, c);
}

// Analytic gradient of the objective with respect to the critic values (at
// the hinge kink the flat-side subgradient is used).
inline std::vector<double> objective_gradient(const DiscreteDist& p, const DiscreteDist& q,
                                              const CriticTable& critic,
                                              const ConcaveLoss& loss, Variant v) {
  detail::check_common(p, q);
  auto [pa, qa] = align(p, q);
  validate_critic(critic, pa.points);
  const auto terms = detail::variant_terms(pa.probs, qa.probs, v);
  const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(
      critic.values.data(), static_cast<Eigen::Index>(critic.values.size()));
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(c.size());
  for (const auto& t : terms) {
    grad.noalias() += (t.weight * f_grad(loss, t.coeff.dot(c))) * t.coeff;
  }
  return std::vector<double>(grad.data(), grad.data() + grad.size());
}

inline OracleResult solve_divergence(const DiscreteDist& p, const DiscreteDist& q,
                                     const ConcaveLoss& loss, Variant v,
                                     const SolveOptions& opts = {}) {
  detail::check_common(p, q);
  auto [pa, qa] = align(p, q);
  const std::size_t n = pa.points.size();
  if (n > kMaxSupport) {
    throw std::invalid_argument("union support exceeds " + std::to_string(kMaxSupport) +
                                " points");
  }
  if (!(opts.tol > 0) || !(opts.eps_sup > 0) || opts.max_iters < 1) {
    throw std::invalid_argument("invalid solve options");
  }
  const auto terms = detail::variant_terms(pa.probs, qa.probs, v);
  const double sup_total = 2.0 * loss.sup_value;

  // All schemes except Sy are invariant to adding a constant to the critic;
  // pinning C at the first support point removes that flat direction.
  std::vector<int> free;
  for (std::size_t i = (v == Variant::Sy ? 0u : 1u); i < n; ++i) {
    free.push_back(static_cast<int>(i));
  }

  Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  detail::AscentOutcome out;
  if (loss.kind != LossKind::Hinge) {
    out = detail::ascend(terms, loss, 0.0, free, sup_total, opts, opts.max_iters, c);
  } else {
    int used = 0;
    for (double beta = 4.0; beta <= 1.7e7; beta *= 4.0) {
      const int budget = opts.max_iters - used;
      if (budget <= 0) break;
      const auto stage = detail::ascend(terms, loss, beta, free, sup_total, opts, budget, c);
      used += stage.iters;
      out.iters = used;
      out.converged = stage.converged;
      out.saturated = stage.saturated;
      out.grad_norm = stage.grad_norm;
      out.exact_value = stage.exact_value;
      if (stage.saturated) break;
    }
  }

  OracleResult res;
  res.value = out.exact_value;
  res.critic.points = pa.points;
  res.critic.values.assign(c.data(), c.data() + c.size());
  res.iterations = out.iters;
  res.grad_norm = out.grad_norm;
  res.converged = out.converged;
  return res;
}

// 1-D optimal transport distance between the discrete laws: the integral of
// |F_p - F_q| over the union support grid.
inline double wasserstein_1d(const DiscreteDist& p, const DiscreteDist& q) {
  detail::check_common(p, q);
  auto [pa, qa] = align(p, q);
  NeumaierSum total;
  double fp = 0.0, fq = 0.0;
  for (std::size_t i = 0; i + 1 < pa.points.size(); ++i) {
    fp += pa.probs[i];
    fq += qa.probs[i];
    total.add(std::abs(fp - fq) * (pa.points[i + 1] - pa.points[i]));
  }
  return total.value();
}

// Constructive positivity certificate: the step critic that is `height` on
// the set T = {x : p(x) > q(x)} and 0 elsewhere, with the height chosen along
// (0, min(argsup, 32)] to maximize the objective. Whenever P != Q the
// returned objective value is strictly positive and lower-bounds the
// divergence.
struct WitnessResult {
  CriticTable critic;
  double height = 0.0;
  double value = 0.0;
};

inline WitnessResult witness_critic(const DiscreteDist& p, const DiscreteDist& q,
                                    const ConcaveLoss& loss, Variant v) {
  detail::check_common(p, q);
  auto [pa, qa] = align(p, q);
  std::vector<double> mask(pa.points.size(), 0.0);
  bool any = false;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (pa.probs[i] > qa.probs[i]) {
      mask[i] = 1.0;
      any = true;
    }
  }
  if (!any) {
    throw std::invalid_argument("witness critic requires P != Q");
  }
  const auto eval = [&](double h) {
    CriticTable ct{pa.points, mask};
    for (double& x : ct.values) x *= h;
    return objective(pa, qa, ct, loss, v);
  };
  // Golden-section maximization; the objective is concave in the height.
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 0.0;
  double hi = std::min(loss.argsup, 32.0);
  double x1 = hi - golden * (hi - lo);
  double x2 = lo + golden * (hi - lo);
  double f1 = eval(x1);
  double f2 = eval(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + golden * (hi - lo);
      f2 = eval(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - golden * (hi - lo);
      f1 = eval(x1);
    }
  }
  WitnessResult w;
  w.height = 0.5 * (lo + hi);
  w.value = eval(w.height);
  w.critic = CriticTable{pa.points, mask};
  for (double& x : w.critic.values) x *= w.height;
  return w;
}

}  // namespace relfdiv
