#pragma once

// Concave losses applied to critic score gaps. Every member f of the family
// satisfies f(0) = 0, f'(0) != 0, and approaches a positive supremum M at a
// positive argument, which is what makes each induced divergence
// nonnegative, zero at equality, and bounded by 2M.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "relfdiv/rng.hpp"
#include "relfdiv/util.hpp"

namespace relfdiv {

inline constexpr double kLog2 = 0.69314718055994530942;

enum class LossKind { LogSigmoid, LeastSquares, Hinge };

struct ConcaveLoss {
  LossKind kind = LossKind::LeastSquares;
  double sup_value = 1.0;  // M = sup_z f(z)
  double argsup = 1.0;     // smallest z attaining or approaching M; +inf for LogSigmoid
};

inline ConcaveLoss make_loss(LossKind kind) {
  switch (kind) {
    case LossKind::LogSigmoid:
      return {kind, kLog2, std::numeric_limits<double>::infinity()};
    case LossKind::LeastSquares:
      return {kind, 1.0, 1.0};
    case LossKind::Hinge:
      return {kind, 1.0, 1.0};
  }
  throw std::invalid_argument("unknown loss kind");
}

inline std::string_view loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::LogSigmoid: return "sgan";
    case LossKind::LeastSquares: return "lsgan";
    case LossKind::Hinge: return "hinge";
  }
  throw std::invalid_argument("unknown loss kind");
}

inline ConcaveLoss parse_loss(std::string_view name) {
  if (name == "sgan") return make_loss(LossKind::LogSigmoid);
  if (name == "lsgan") return make_loss(LossKind::LeastSquares);
  if (name == "hinge") return make_loss(LossKind::Hinge);
  throw std::invalid_argument("unknown loss name '" + std::string(name) +
                              "' (expected sgan|lsgan|hinge)");
}

namespace detail {

// log(1 + exp(u)), overflow-free for the whole double range.
inline double softplus(double u) {
  if (u > 0) return u + std::log1p(std::exp(-u));
  return std::log1p(std::exp(u));
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

inline double f_eval(const ConcaveLoss& loss, double z) {
  require_finite(z, "loss argument");
  switch (loss.kind) {
    case LossKind::LogSigmoid:
      return kLog2 - detail::softplus(-z);  // log(2 * sigmoid(z))
    case LossKind::LeastSquares:
      return 1.0 - (z - 1.0) * (z - 1.0);
    case LossKind::Hinge:
      return 1.0 - std::max(0.0, 1.0 - z);
  }
  throw std::invalid_argument("unknown loss kind");
}

// Slope of f. At the hinge kink z = 1 the flat-side subgradient 0 is chosen,
// so ascent never walks past the plateau edge because of the kink itself.
inline double f_grad(const ConcaveLoss& loss, double z) {
  require_finite(z, "loss argument");
  switch (loss.kind) {
    case LossKind::LogSigmoid:
      return detail::sigmoid(-z);  // 1 - sigmoid(z)
    case LossKind::LeastSquares:
      return -2.0 * (z - 1.0);
    case LossKind::Hinge:
      return z < 1.0 ? 1.0 : 0.0;
  }
  throw std::invalid_argument("unknown loss kind");
}

// Curvature of f where it is twice differentiable (used by the smooth
// maximizer; the hinge is handled there through a smoothed surrogate).
inline double f_curv(const ConcaveLoss& loss, double z) {
  require_finite(z, "loss argument");
  switch (loss.kind) {
    case LossKind::LogSigmoid: {
      const double s = detail::sigmoid(z);
      return -s * (1.0 - s);
    }
    case LossKind::LeastSquares:
      return -2.0;
    case LossKind::Hinge:
      return 0.0;
  }
  throw std::invalid_argument("unknown loss kind");
}

struct LossPropsReport {
  bool ok = true;
  std::vector<std::string> failures;
};

// Randomized self-check of the structural facts the divergence machinery
// relies on: f(0) = 0 with nonzero slope, concavity along chords, the sign
// bound f(z) + f(-z) <= 0, the decreasing secant-slope inequality
// f(s*b)/b <= f(s*a)/a for 0 < a <= b, boundedness by M, and agreement of
// f_grad(0) with a central difference.
inline LossPropsReport f_props_check(const ConcaveLoss& loss, int samples = 256,
                                     std::uint64_t seed = 0x5eedf00dull) {
  LossPropsReport report;
  auto fail = [&](const std::string& msg) {
    report.ok = false;
    report.failures.push_back(msg);
  };

  if (f_eval(loss, 0.0) != 0.0) fail("f(0) != 0");
  if (f_grad(loss, 0.0) == 0.0) fail("f'(0) == 0");
  if (!(loss.sup_value > 0.0)) fail("sup f <= 0");
  if (!(loss.argsup > 0.0)) fail("argsup <= 0");

  const double h = 1e-6;
  const double fd = (f_eval(loss, h) - f_eval(loss, -h)) / (2.0 * h);
  if (std::abs(fd - f_grad(loss, 0.0)) > 1e-6) {
    fail("central difference at 0 disagrees with f_grad");
  }

  auto g = make_stream(seed);
  for (int i = 0; i < samples; ++i) {
    const double a = uniform(g, -40.0, 40.0);
    const double b = uniform(g, -40.0, 40.0);
    const double alpha = unit_uniform(g);
    const double chord = alpha * f_eval(loss, a) + (1.0 - alpha) * f_eval(loss, b);
    if (f_eval(loss, alpha * a + (1.0 - alpha) * b) < chord - 1e-9) {
      fail("concavity violated on a chord");
      break;
    }
  }
  for (int i = 0; i < samples; ++i) {
    const double z = uniform(g, -40.0, 40.0);
    if (f_eval(loss, z) > loss.sup_value + 1e-12) {
      fail("f exceeds its supremum");
      break;
    }
    if (f_eval(loss, z) + f_eval(loss, -z) > 1e-12) {
      fail("f(z) + f(-z) > 0");
      break;
    }
  }
  for (int i = 0; i < samples; ++i) {
    double lo = uniform(g, 1e-3, 5.0);
    double hi = uniform(g, 1e-3, 5.0);
    if (lo > hi) std::swap(lo, hi);
    double slope = uniform(g, -8.0, 8.0);
    if (std::abs(slope) < 1e-3) slope = 1e-3;
    if (f_eval(loss, slope * hi) / hi > f_eval(loss, slope * lo) / lo + 1e-9) {
      fail("secant-slope inequality violated");
      break;
    }
  }
  return report;
}

}  // namespace relfdiv
