#pragma once

// Small shared helpers: input validation and compensated summation.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace relfdiv {

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be finite");
  }
}

inline void require_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) require_finite(x, what);
}

inline void require_nonempty(const std::vector<double>& v, const char* what) {
  if (v.empty()) {
    throw std::invalid_argument(std::string(what) + " must be nonempty");
  }
}

// Neumaier variant of Kahan summation: keeps long accumulations (enumeration
// over 1e7 batches, 1e5 Monte Carlo replicates) accurate to a few ulps
// regardless of summand ordering.
class NeumaierSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double mean_of(const std::vector<double>& v) {
  NeumaierSum s;
  for (double x : v) s.add(x);
  return s.value() / static_cast<double>(v.size());
}

// Unbiased sample variance (1/(k-1) normalization); requires k >= 2.
inline double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) {
    throw std::invalid_argument("sample variance needs at least two values");
  }
  const double m = mean_of(v);
  NeumaierSum s;
  for (double x : v) s.add((x - m) * (x - m));
  return s.value() / static_cast<double>(v.size() - 1);
}

}  // namespace relfdiv
