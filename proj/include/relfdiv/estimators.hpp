#pragma once

// Batch estimators of the divergences for a fixed critic: the score batches
// hold critic outputs C(x_i), C(y_j). Includes the pairing-free two-sample
// average for the pairwise scheme (a complete U-statistic, hence minimum
// variance among unbiased estimators of it), and the least-squares
// bias-corrected forms whose 1/(k-1) sample variances cancel the finite-batch
// mean-estimation bias exactly.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "relfdiv/losses.hpp"
#include "relfdiv/util.hpp"
#include "relfdiv/variant.hpp"

namespace relfdiv {

struct ScoreBatch {
  std::vector<double> real;  // C(x_1..k)
  std::vector<double> fake;  // C(y_1..k)
};

inline void validate_batch(const ScoreBatch& b) {
  require_nonempty(b.real, "real scores");
  require_nonempty(b.fake, "fake scores");
  if (b.real.size() != b.fake.size()) {
    throw std::invalid_argument("score batches must have equal length");
  }
  require_finite(b.real, "real scores");
  require_finite(b.fake, "fake scores");
}

inline double est_sy(const ScoreBatch& b, const ConcaveLoss& loss) {
  validate_batch(b);
  const double k = static_cast<double>(b.real.size());
  NeumaierSum s;
  for (double x : b.real) s.add(f_eval(loss, x));
  for (double y : b.fake) s.add(f_eval(loss, -y));
  return s.value() / k;
}

// Diagonal pairing: one loss evaluation per (x_i, y_i) pair.
inline double est_rp_naive(const ScoreBatch& b, const ConcaveLoss& loss) {
  validate_batch(b);
  const std::size_t k = b.real.size();
  NeumaierSum s;
  for (std::size_t i = 0; i < k; ++i) s.add(f_eval(loss, b.real[i] - b.fake[i]));
  return 2.0 * s.value() / static_cast<double>(k);
}

// All-pairs average: same expectation as the diagonal pairing, never higher
// variance, at k^2 instead of k loss evaluations.
inline double est_rp_mvue(const ScoreBatch& b, const ConcaveLoss& loss) {
  validate_batch(b);
  const std::size_t k = b.real.size();
  NeumaierSum s;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      s.add(f_eval(loss, b.real[i] - b.fake[j]));
    }
  }
  return 2.0 * s.value() / (static_cast<double>(k) * static_cast<double>(k));
}

inline double est_ra_term1(const ScoreBatch& b, const ConcaveLoss& loss) {
  validate_batch(b);
  const double mu_fake = mean_of(b.fake);
  NeumaierSum s;
  for (double x : b.real) s.add(f_eval(loss, x - mu_fake));
  return s.value() / static_cast<double>(b.real.size());
}

inline double est_ra_term2(const ScoreBatch& b, const ConcaveLoss& loss) {
  validate_batch(b);
  const double mu_real = mean_of(b.real);
  NeumaierSum s;
  for (double y : b.fake) s.add(f_eval(loss, mu_real - y));
  return s.value() / static_cast<double>(b.fake.size());
}

inline double est_ra(const ScoreBatch& b, const ConcaveLoss& loss) {
  return est_ra_term1(b, loss) + est_ra_term2(b, loss);
}

inline double est_ralf(const ScoreBatch& b, const ConcaveLoss& loss) {
  return 2.0 * est_ra_term1(b, loss);
}

// Pooled mean over all 2k scores.
inline double pooled_mean(const ScoreBatch& b) {
  NeumaierSum s;
  for (double x : b.real) s.add(x);
  for (double y : b.fake) s.add(y);
  return s.value() / static_cast<double>(b.real.size() + b.fake.size());
}

inline double est_rc_term1(const ScoreBatch& b, const ConcaveLoss& loss) {
  validate_batch(b);
  const double mu_pool = pooled_mean(b);
  NeumaierSum s;
  for (double x : b.real) s.add(f_eval(loss, x - mu_pool));
  return s.value() / static_cast<double>(b.real.size());
}

inline double est_rc_term2(const ScoreBatch& b, const ConcaveLoss& loss) {
  validate_batch(b);
  const double mu_pool = pooled_mean(b);
  NeumaierSum s;
  for (double y : b.fake) s.add(f_eval(loss, mu_pool - y));
  return s.value() / static_cast<double>(b.fake.size());
}

inline double est_rc(const ScoreBatch& b, const ConcaveLoss& loss) {
  return est_rc_term1(b, loss) + est_rc_term2(b, loss);
}

enum class UnbiasedVariant { Ra, Ralf, Rc };

// Least-squares estimators with the finite-batch bias removed. For the
// quadratic loss the bias of each plug-in term is an exact multiple of the
// sampled batch-mean variance, so adding the matching multiple of the
// unbiased sample variance cancels it:
//   Ra:   bias -(var_x + var_y)/k      ->  + (s2_x + s2_y)/k
//   Ralf: bias -2 var_y / k            ->  + 2 s2_y / k
//   Rc:   bias +(var_x + var_y)/(2k)   ->  - (s2_x + s2_y)/(2k)
inline double est_ls_unbiased(const ScoreBatch& b, UnbiasedVariant variant) {
  validate_batch(b);
  if (b.real.size() < 2) {
    throw std::invalid_argument("bias-corrected estimators need batch size k >= 2");
  }
  const ConcaveLoss ls = make_loss(LossKind::LeastSquares);
  const double k = static_cast<double>(b.real.size());
  switch (variant) {
    case UnbiasedVariant::Ra:
      return est_ra(b, ls) + (sample_variance(b.real) + sample_variance(b.fake)) / k;
    case UnbiasedVariant::Ralf:
      return est_ralf(b, ls) + 2.0 * sample_variance(b.fake) / k;
    case UnbiasedVariant::Rc:
      return est_rc(b, ls) - (sample_variance(b.real) + sample_variance(b.fake)) / (2.0 * k);
  }
  throw std::invalid_argument("unknown unbiased variant");
}

enum class EstimatorKind {
  Sy,
  RpNaive,
  RpMvue,
  Ra,
  RaTerm1,
  RaTerm2,
  Ralf,
  Rc,
  RcTerm1,
  RcTerm2,
  RaLsUnbiased,
  RalfLsUnbiased,
  RcLsUnbiased,
};

inline std::string_view estimator_name(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::Sy: return "sy";
    case EstimatorKind::RpNaive: return "rp";
    case EstimatorKind::RpMvue: return "rp_mvue";
    case EstimatorKind::Ra: return "ra";
    case EstimatorKind::RaTerm1: return "ra_term1";
    case EstimatorKind::RaTerm2: return "ra_term2";
    case EstimatorKind::Ralf: return "ralf";
    case EstimatorKind::Rc: return "rc";
    case EstimatorKind::RcTerm1: return "rc_term1";
    case EstimatorKind::RcTerm2: return "rc_term2";
    case EstimatorKind::RaLsUnbiased: return "ra_ls_unbiased";
    case EstimatorKind::RalfLsUnbiased: return "ralf_ls_unbiased";
    case EstimatorKind::RcLsUnbiased: return "rc_ls_unbiased";
  }
  throw std::invalid_argument("unknown estimator kind");
}

inline EstimatorKind parse_estimator(std::string_view name) {
  if (name == "sy") return EstimatorKind::Sy;
  if (name == "rp") return EstimatorKind::RpNaive;
  if (name == "rp_mvue") return EstimatorKind::RpMvue;
  if (name == "ra") return EstimatorKind::Ra;
  if (name == "ra_term1") return EstimatorKind::RaTerm1;
  if (name == "ra_term2") return EstimatorKind::RaTerm2;
  if (name == "ralf") return EstimatorKind::Ralf;
  if (name == "rc") return EstimatorKind::Rc;
  if (name == "rc_term1") return EstimatorKind::RcTerm1;
  if (name == "rc_term2") return EstimatorKind::RcTerm2;
  if (name == "ra_ls_unbiased") return EstimatorKind::RaLsUnbiased;
  if (name == "ralf_ls_unbiased") return EstimatorKind::RalfLsUnbiased;
  if (name == "rc_ls_unbiased") return EstimatorKind::RcLsUnbiased;
  throw std::invalid_argument("unknown estimator name '" + std::string(name) + "'");
}

// The bias-corrected kinds are least-squares by construction; requesting them
// under another loss is a contradiction and is rejected.
inline double evaluate_estimator(EstimatorKind kind, const ScoreBatch& b,
                                 const ConcaveLoss& loss) {
  switch (kind) {
    case EstimatorKind::Sy: return est_sy(b, loss);
    case EstimatorKind::RpNaive: return est_rp_naive(b, loss);
    case EstimatorKind::RpMvue: return est_rp_mvue(b, loss);
    case EstimatorKind::Ra: return est_ra(b, loss);
    case EstimatorKind::RaTerm1: return est_ra_term1(b, loss);
    case EstimatorKind::RaTerm2: return est_ra_term2(b, loss);
    case EstimatorKind::Ralf: return est_ralf(b, loss);
    case EstimatorKind::Rc: return est_rc(b, loss);
    case EstimatorKind::RcTerm1: return est_rc_term1(b, loss);
    case EstimatorKind::RcTerm2: return est_rc_term2(b, loss);
    case EstimatorKind::RaLsUnbiased:
    case EstimatorKind::RalfLsUnbiased:
    case EstimatorKind::RcLsUnbiased: {
      if (loss.kind != LossKind::LeastSquares) {
        throw std::invalid_argument("bias-corrected estimators are defined for lsgan only");
      }
      const UnbiasedVariant v = kind == EstimatorKind::RaLsUnbiased  ? UnbiasedVariant::Ra
                                : kind == EstimatorKind::RalfLsUnbiased ? UnbiasedVariant::Ralf
                                                                        : UnbiasedVariant::Rc;
      return est_ls_unbiased(b, v);
    }
  }
  throw std::invalid_argument("unknown estimator kind");
}

// Non-saturating generator objective: the fake batch plays the "real" role.
inline double generator_loss(const ScoreBatch& b, const ConcaveLoss& loss, Variant v) {
  validate_batch(b);
  const double k = static_cast<double>(b.real.size());
  NeumaierSum s;
  switch (v) {
    case Variant::Sy:
      for (double y : b.fake) s.add(f_eval(loss, y));
      return s.value() / k;
    case Variant::Rp:
      for (std::size_t i = 0; i < b.real.size(); ++i) {
        s.add(f_eval(loss, b.fake[i] - b.real[i]));
      }
      return 2.0 * s.value() / k;
    case Variant::Ra: {
      const double mu_real = mean_of(b.real);
      const double mu_fake = mean_of(b.fake);
      for (double y : b.fake) s.add(f_eval(loss, y - mu_real));
      for (double x : b.real) s.add(f_eval(loss, mu_fake - x));
      return s.value() / k;
    }
    case Variant::Ralf: {
      const double mu_real = mean_of(b.real);
      for (double y : b.fake) s.add(f_eval(loss, y - mu_real));
      return 2.0 * s.value() / k;
    }
    case Variant::Rc: {
      const double mu_pool = pooled_mean(b);
      for (double y : b.fake) s.add(f_eval(loss, y - mu_pool));
      for (double x : b.real) s.add(f_eval(loss, mu_pool - x));
      return s.value() / k;
    }
  }
  throw std::invalid_argument("unknown variant");
}

// Closed forms for the least-squares divergences at a fixed critic, given
// only the first two moments of the score laws. With d = mean_real -
// mean_fake, every term is 1 - (shift - 1)^2 - (variance of the argument):
//   term1 (real vs fake mean):    1 - var_real - (d - 1)^2
//   term2 (real mean vs fake):    1 - var_fake - (d - 1)^2
//   pooled-mean terms use d/2 in place of d.
// With k >= 1 the same expressions give the expectation of the plug-in
// batch estimator; estimating the reference means from k samples shifts each
// term by an exact multiple of the score variances.
struct MomentSpec {
  double mean_real = 0.0;
  double var_real = 0.0;
  double mean_fake = 0.0;
  double var_fake = 0.0;
};

enum class ClosedLsVariant { RaTerm1, RaTerm2, Ra, Ralf, Rc, RcTerm1, RcTerm2 };

inline double closed_div_ls(const MomentSpec& m, ClosedLsVariant v, int k = 0) {
  require_finite(m.mean_real, "mean_real");
  require_finite(m.mean_fake, "mean_fake");
  if (!(m.var_real >= 0.0) || !(m.var_fake >= 0.0)) {
    throw std::invalid_argument("variances must be nonnegative");
  }
  if (k < 0) throw std::invalid_argument("batch size must be >= 1 (0 selects population)");
  const double d = m.mean_real - m.mean_fake;
  const double term1 = 1.0 - m.var_real - (d - 1.0) * (d - 1.0);
  const double term2 = 1.0 - m.var_fake - (d - 1.0) * (d - 1.0);
  const double half1 = 1.0 - m.var_real - (0.5 * d - 1.0) * (0.5 * d - 1.0);
  const double half2 = 1.0 - m.var_fake - (0.5 * d - 1.0) * (0.5 * d - 1.0);
  const double kk = static_cast<double>(k);
  switch (v) {
    case ClosedLsVariant::RaTerm1:
      return k == 0 ? term1 : term1 - m.var_fake / kk;
    case ClosedLsVariant::RaTerm2:
      return k == 0 ? term2 : term2 - m.var_real / kk;
    case ClosedLsVariant::Ra:
      return k == 0 ? term1 + term2
                    : term1 + term2 - (m.var_real + m.var_fake) / kk;
    case ClosedLsVariant::Ralf:
      return k == 0 ? 2.0 * term1 : 2.0 * (term1 - m.var_fake / kk);
    case ClosedLsVariant::RcTerm1:
      return k == 0 ? half1 : half1 + (0.75 * m.var_real - 0.25 * m.var_fake) / kk;
    case ClosedLsVariant::RcTerm2:
      return k == 0 ? half2 : half2 + (0.75 * m.var_fake - 0.25 * m.var_real) / kk;
    case ClosedLsVariant::Rc:
      return k == 0 ? half1 + half2
                    : half1 + half2 + 0.5 * (m.var_real + m.var_fake) / kk;
  }
  throw std::invalid_argument("unknown closed-form variant");
}

}  // namespace relfdiv
