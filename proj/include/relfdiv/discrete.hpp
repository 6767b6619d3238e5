#pragma once

// Finite discrete distributions on the real line and critic lookup tables,
// plus the support-alignment helpers every distribution-level computation
// starts from.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "relfdiv/rng.hpp"
#include "relfdiv/util.hpp"

namespace relfdiv {

inline constexpr double kProbSumTol = 1e-12;

struct DiscreteDist {
  std::vector<double> points;  // strictly increasing
  std::vector<double> probs;   // nonnegative, sums to 1 within kProbSumTol
};

inline void validate_dist(const DiscreteDist& d, const char* what = "distribution") {
  require_nonempty(d.points, what);
  if (d.points.size() != d.probs.size()) {
    throw std::invalid_argument(std::string(what) + ": points and probs differ in length");
  }
  require_finite(d.points, what);
  require_finite(d.probs, what);
  for (std::size_t i = 1; i < d.points.size(); ++i) {
    if (!(d.points[i - 1] < d.points[i])) {
      throw std::invalid_argument(std::string(what) + ": points must be strictly increasing");
    }
  }
  NeumaierSum s;
  for (double p : d.probs) {
    if (p < 0.0) throw std::invalid_argument(std::string(what) + ": negative probability");
    s.add(p);
  }
  if (std::abs(s.value() - 1.0) > kProbSumTol) {
    throw std::invalid_argument(std::string(what) + ": probabilities sum to " +
                                std::to_string(s.value()) + ", expected 1");
  }
}

inline DiscreteDist make_dist(std::vector<double> points, std::vector<double> probs,
                              const char* what = "distribution") {
  DiscreteDist d{std::move(points), std::move(probs)};
  validate_dist(d, what);
  return d;
}

inline DiscreteDist dirac(double x) { return make_dist({x}, {1.0}); }

inline std::vector<double> union_points(const DiscreteDist& a, const DiscreteDist& b) {
  std::vector<double> pts;
  pts.reserve(a.points.size() + b.points.size());
  std::merge(a.points.begin(), a.points.end(), b.points.begin(), b.points.end(),
             std::back_inserter(pts));
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

// Re-express d on a superset of its support (missing points get mass 0).
inline DiscreteDist align_to(const DiscreteDist& d, const std::vector<double>& pts) {
  DiscreteDist out;
  out.points = pts;
  out.probs.assign(pts.size(), 0.0);
  std::size_t j = 0;
  for (std::size_t i = 0; i < d.points.size(); ++i) {
    while (j < pts.size() && pts[j] < d.points[i]) ++j;
    if (j == pts.size() || pts[j] != d.points[i]) {
      throw std::invalid_argument("alignment target does not contain all support points");
    }
    out.probs[j] = d.probs[i];
  }
  return out;
}

inline std::pair<DiscreteDist, DiscreteDist> align(const DiscreteDist& a,
                                                   const DiscreteDist& b) {
  const auto pts = union_points(a, b);
  return {align_to(a, pts), align_to(b, pts)};
}

// Equal-weight mixture on the union support.
inline DiscreteDist mixture_half(const DiscreteDist& a, const DiscreteDist& b) {
  auto [pa, pb] = align(a, b);
  DiscreteDist m;
  m.points = pa.points;
  m.probs.resize(pa.probs.size());
  for (std::size_t i = 0; i < m.probs.size(); ++i) {
    m.probs[i] = 0.5 * (pa.probs[i] + pb.probs[i]);
  }
  return m;
}

inline double total_variation(const DiscreteDist& a, const DiscreteDist& b) {
  auto [pa, pb] = align(a, b);
  NeumaierSum s;
  for (std::size_t i = 0; i < pa.probs.size(); ++i) {
    s.add(std::abs(pa.probs[i] - pb.probs[i]));
  }
  return 0.5 * s.value();
}

// A critic is a table of values C(x) over the (aligned) support points.
struct CriticTable {
  std::vector<double> points;
  std::vector<double> values;
};

inline void validate_critic(const CriticTable& c, const std::vector<double>& pts) {
  if (c.points != pts) {
    throw std::invalid_argument("critic support does not match the aligned support");
  }
  if (c.values.size() != pts.size()) {
    throw std::invalid_argument("critic values and support differ in length");
  }
  require_finite(c.values, "critic values");
}

inline CriticTable zero_critic(const std::vector<double>& pts) {
  return {pts, std::vector<double>(pts.size(), 0.0)};
}

// Random test instances: shared support of 2..6 sorted points uniform in
// [-1, 1], with two independent flat-Dirichlet probability vectors.
struct InstancePair {
  DiscreteDist p;
  DiscreteDist q;
};

inline std::vector<double> random_dirichlet(std::mt19937_64& g, std::size_t n) {
  std::vector<double> w(n);
  double total = 0.0;
  for (double& x : w) {
    x = exponential(g);
    total += x;
  }
  for (double& x : w) x /= total;
  return w;
}

inline InstancePair random_instance(std::mt19937_64& g) {
  const std::size_t n = 2 + static_cast<std::size_t>(unit_uniform(g) * 5.0);
  std::vector<double> pts(n);
  for (;;) {
    for (double& x : pts) x = uniform(g, -1.0, 1.0);
    std::sort(pts.begin(), pts.end());
    if (std::adjacent_find(pts.begin(), pts.end()) == pts.end()) break;
  }
  InstancePair inst;
  inst.p = make_dist(pts, random_dirichlet(g, n));
  inst.q = make_dist(pts, random_dirichlet(g, n));
  return inst;
}

}  // namespace relfdiv
