#pragma once

// Desk-scale training dynamics: a categorical generator Q = softmax(theta)
// on a fixed finite support plays against a tabular critic, both updated by
// full-batch exact gradients (no sampling noise). The generator ascends the
// non-saturating objective in which the fake side takes the favored role.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "relfdiv/discrete.hpp"
#include "relfdiv/losses.hpp"
#include "relfdiv/oracle.hpp"
#include "relfdiv/util.hpp"
#include "relfdiv/variant.hpp"

namespace relfdiv {

struct GameConfig {
  ConcaveLoss loss = make_loss(LossKind::LeastSquares);
  Variant variant = Variant::Rp;
  double lr_critic = 0.05;
  double lr_gen = 0.05;
  int critic_steps = 5;  // critic updates per generator update
};

struct GameState {
  std::vector<double> points;  // shared support
  std::vector<double> target;  // data probabilities P
  std::vector<double> theta;   // generator logits, Q = softmax(theta)
  std::vector<double> critic;  // critic values on the support
};

inline std::vector<double> softmax(const std::vector<double>& theta) {
  require_nonempty(theta, "logits");
  require_finite(theta, "logits");
  double mx = theta[0];
  for (double t : theta) mx = std::max(mx, t);
  std::vector<double> q(theta.size());
  double total = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    q[i] = std::exp(theta[i] - mx);
    total += q[i];
  }
  for (double& x : q) x /= total;
  return q;
}

// Logits reproducing the given strictly positive probability vector.
inline std::vector<double> logits_for(const std::vector<double>& probs) {
  std::vector<double> theta(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] > 0.0)) {
      throw std::invalid_argument("logits require strictly positive probabilities");
    }
    theta[i] = std::log(probs[i]);
  }
  return theta;
}

inline GameState make_game(const DiscreteDist& target, std::vector<double> theta0 = {}) {
  validate_dist(target, "target distribution");
  GameState s;
  s.points = target.points;
  s.target = target.probs;
  if (theta0.empty()) {
    s.theta.assign(target.points.size(), 0.0);  // uniform generator
  } else {
    if (theta0.size() != target.points.size()) {
      throw std::invalid_argument("initial logits do not match the support size");
    }
    require_finite(theta0, "initial logits");
    s.theta = std::move(theta0);
  }
  s.critic.assign(target.points.size(), 0.0);
  return s;
}

inline DiscreteDist target_dist(const GameState& s) {
  return DiscreteDist{s.points, s.target};
}

inline DiscreteDist generator_dist(const GameState& s) {
  return DiscreteDist{s.points, softmax(s.theta)};
}

inline double critic_objective(const GameState& s, const ConcaveLoss& loss, Variant v) {
  return objective(target_dist(s), generator_dist(s), CriticTable{s.points, s.critic}, loss, v);
}

// One critic ascent update: exact gradient, with the step halved until the
// objective does not decrease, so critic training is monotone by
// construction. If no improving step is found in 40 halvings the critic is
// already at a (numerical) maximizer and is left unchanged.
inline void critic_step(GameState& s, const ConcaveLoss& loss, Variant v, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  const DiscreteDist p = target_dist(s);
  const DiscreteDist q = generator_dist(s);
  const CriticTable at{s.points, s.critic};
  const double before = objective(p, q, at, loss, v);
  const auto grad = objective_gradient(p, q, at, loss, v);
  double step = lr;
  for (int half = 0; half < 40; ++half) {
    CriticTable trial{s.points, s.critic};
    for (std::size_t i = 0; i < trial.values.size(); ++i) trial.values[i] += step * grad[i];
    if (objective(p, q, trial, loss, v) >= before) {
      s.critic = std::move(trial.values);
      return;
    }
    step *= 0.5;
  }
}

// Generator objective with the roles swapped (the non-saturating form): the
// generator pushes its samples to score like — and eventually above — the
// data on the current critic.
inline double generator_objective(const GameState& s, const ConcaveLoss& loss, Variant v) {
  const std::vector<double>& p = s.target;
  const std::vector<double> q = softmax(s.theta);
  const std::vector<double>& c = s.critic;
  const std::size_t n = p.size();
  NeumaierSum mu_p_s, mu_q_s;
  for (std::size_t i = 0; i < n; ++i) {
    mu_p_s.add(p[i] * c[i]);
    mu_q_s.add(q[i] * c[i]);
  }
  const double mu_p = mu_p_s.value();
  const double mu_q = mu_q_s.value();
  const double mu_m = 0.5 * (mu_p + mu_q);
  NeumaierSum g;
  switch (v) {
    case Variant::Sy:
      for (std::size_t j = 0; j < n; ++j) g.add(q[j] * f_eval(loss, c[j]));
      return g.value();
    case Variant::Rp:
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          g.add(2.0 * p[i] * q[j] * f_eval(loss, c[j] - c[i]));
        }
      }
      return g.value();
    case Variant::Ra:
      for (std::size_t j = 0; j < n; ++j) g.add(q[j] * f_eval(loss, c[j] - mu_p));
      for (std::size_t i = 0; i < n; ++i) g.add(p[i] * f_eval(loss, mu_q - c[i]));
      return g.value();
    case Variant::Ralf:
      for (std::size_t j = 0; j < n; ++j) g.add(2.0 * q[j] * f_eval(loss, c[j] - mu_p));
      return g.value();
    case Variant::Rc:
      for (std::size_t j = 0; j < n; ++j) g.add(q[j] * f_eval(loss, c[j] - mu_m));
      for (std::size_t i = 0; i < n; ++i) g.add(p[i] * f_eval(loss, mu_m - c[i]));
      return g.value();
  }
  throw std::invalid_argument("unknown variant");
}

// d(generator objective)/d(theta): the per-outcome sensitivities v_j =
// dG/dq_j are pushed through the softmax Jacobian dq_j/dtheta_l =
// q_j(delta_jl - q_l), i.e. grad_l = q_l (v_l - sum_j q_j v_j). The
// mean-referencing schemes pick up an extra v_j contribution because the
// generator mean (or pooled mean) moves with q.
inline std::vector<double> generator_gradient(const GameState& s, const ConcaveLoss& loss,
                                              Variant v) {
  const std::vector<double>& p = s.target;
  const std::vector<double> q = softmax(s.theta);
  const std::vector<double>& c = s.critic;
  const std::size_t n = p.size();
  NeumaierSum mu_p_s, mu_q_s;
  for (std::size_t i = 0; i < n; ++i) {
    mu_p_s.add(p[i] * c[i]);
    mu_q_s.add(q[i] * c[i]);
  }
  const double mu_p = mu_p_s.value();
  const double mu_q = mu_q_s.value();
  const double mu_m = 0.5 * (mu_p + mu_q);

  std::vector<double> vj(n, 0.0);
  switch (v) {
    case Variant::Sy:
      for (std::size_t j = 0; j < n; ++j) vj[j] = f_eval(loss, c[j]);
      break;
    case Variant::Rp:
      for (std::size_t j = 0; j < n; ++j) {
        NeumaierSum t;
        for (std::size_t i = 0; i < n; ++i) t.add(p[i] * f_eval(loss, c[j] - c[i]));
        vj[j] = 2.0 * t.value();
      }
      break;
    case Variant::Ra: {
      NeumaierSum slope;  // d/dmu_q of the data-side term
      for (std::size_t i = 0; i < n; ++i) slope.add(p[i] * f_grad(loss, mu_q - c[i]));
      for (std::size_t j = 0; j < n; ++j) {
        vj[j] = f_eval(loss, c[j] - mu_p) + c[j] * slope.value();
      }
      break;
    }
    case Variant::Ralf:
      for (std::size_t j = 0; j < n; ++j) vj[j] = 2.0 * f_eval(loss, c[j] - mu_p);
      break;
    case Variant::Rc: {
      NeumaierSum slope;  // d/dmu_m of both terms; dmu_m/dq_j = c_j / 2
      for (std::size_t i = 0; i < n; ++i) slope.add(p[i] * f_grad(loss, mu_m - c[i]));
      for (std::size_t j = 0; j < n; ++j) slope.add(-q[j] * f_grad(loss, c[j] - mu_m));
      for (std::size_t j = 0; j < n; ++j) {
        vj[j] = f_eval(loss, c[j] - mu_m) + 0.5 * c[j] * slope.value();
      }
      break;
    }
  }
  NeumaierSum avg;
  for (std::size_t j = 0; j < n; ++j) avg.add(q[j] * vj[j]);
  std::vector<double> grad(n);
  for (std::size_t l = 0; l < n; ++l) grad[l] = q[l] * (vj[l] - avg.value());
  return grad;
}

// One exact-gradient ascent step on the logits; they are recentered
// afterwards (softmax is shift-invariant) to keep them bounded.
inline void generator_step(GameState& s, const ConcaveLoss& loss, Variant v, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  const auto grad = generator_gradient(s, loss, v);
  for (std::size_t l = 0; l < s.theta.size(); ++l) s.theta[l] += lr * grad[l];
  const double m = mean_of(s.theta);
  for (double& t : s.theta) t -= m;
  require_finite(s.theta, "generator logits");
}

struct TrajectoryRow {
  int step = 0;        // completed generator updates
  double divergence = 0.0;  // solved divergence between data and generator
  double objective = 0.0;   // critic objective at the current critic
  double tv = 0.0;          // total variation between data and generator
};

// Alternating optimization: critic_steps critic updates, then one generator
// update, for `iters` generator updates; the trajectory is logged every
// log_every updates (and at steps 0 and iters). Aborts if any quantity goes
// non-finite.
inline std::vector<TrajectoryRow> run_game(GameState& s, const GameConfig& cfg, int iters,
                                           int log_every, const SolveOptions& oracle_opts = {}) {
  if (iters < 0) throw std::invalid_argument("iteration count must be nonnegative");
  if (log_every < 1) throw std::invalid_argument("log_every must be >= 1");
  std::vector<TrajectoryRow> rows;
  auto log_row = [&](int step) {
    const DiscreteDist p = target_dist(s);
    const DiscreteDist q = generator_dist(s);
    TrajectoryRow row;
    row.step = step;
    row.divergence = solve_divergence(p, q, cfg.loss, cfg.variant, oracle_opts).value;
    row.objective = critic_objective(s, cfg.loss, cfg.variant);
    row.tv = total_variation(p, q);
    if (!std::isfinite(row.divergence) || !std::isfinite(row.objective) ||
        !std::isfinite(row.tv)) {
      throw std::runtime_error("dynamics produced a non-finite trajectory value");
    }
    rows.push_back(row);
  };
  log_row(0);
  for (int it = 1; it <= iters; ++it) {
    for (int cs = 0; cs < cfg.critic_steps; ++cs) {
      critic_step(s, cfg.loss, cfg.variant, cfg.lr_critic);
    }
    generator_step(s, cfg.loss, cfg.variant, cfg.lr_gen);
    if (it % log_every == 0 || it == iters) log_row(it);
  }
  return rows;
}

}  // namespace relfdiv
