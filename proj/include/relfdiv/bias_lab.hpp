#pragma once

// Finite-batch bias laboratory. Batches of size k drawn i.i.d. from small
// discrete score laws can be enumerated exhaustively (all ordered tuples with
// their product probabilities), which turns statements like "the plug-in
// estimator's bias is exactly -var/k" into finite sums checkable to 1e-10.
// Monte Carlo sweeps extend the same measurements to losses and batch sizes
// where enumeration is unaffordable or no closed form exists.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "relfdiv/estimators.hpp"
#include "relfdiv/losses.hpp"
#include "relfdiv/rng.hpp"
#include "relfdiv/util.hpp"

namespace relfdiv {

inline constexpr double kEnumBudget = 1e7;       // max ordered batch pairs
inline constexpr double kRelBiasFloor = 1e-8;    // |reference| below which a ratio is undefined
inline constexpr long long kMinBiasReplicates = 1000;

struct ScoreDist {
  std::vector<double> values;
  std::vector<double> probs;
};

inline void validate_score_dist(const ScoreDist& d, const char* what = "score distribution") {
  require_nonempty(d.values, what);
  if (d.values.size() != d.probs.size()) {
    throw std::invalid_argument(std::string(what) + ": values and probs differ in length");
  }
  require_finite(d.values, what);
  require_finite(d.probs, what);
  NeumaierSum s;
  for (double p : d.probs) {
    if (p < 0.0) throw std::invalid_argument(std::string(what) + ": negative probability");
    s.add(p);
  }
  if (std::abs(s.value() - 1.0) > 1e-12) {
    throw std::invalid_argument(std::string(what) + ": probabilities sum to " +
                                std::to_string(s.value()) + ", expected 1");
  }
}

inline double score_mean(const ScoreDist& d) {
  NeumaierSum s;
  for (std::size_t i = 0; i < d.values.size(); ++i) s.add(d.probs[i] * d.values[i]);
  return s.value();
}

inline double score_variance(const ScoreDist& d) {
  const double m = score_mean(d);
  NeumaierSum s;
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    s.add(d.probs[i] * (d.values[i] - m) * (d.values[i] - m));
  }
  return s.value();
}

inline MomentSpec score_moments(const ScoreDist& real, const ScoreDist& fake) {
  return {score_mean(real), score_variance(real), score_mean(fake), score_variance(fake)};
}

// Population value targeted by each estimator at a fixed critic, i.e. the
// infinite-batch limit: batch means become the exact means and every average
// becomes an expectation over the score law.
inline double population_value(const ScoreDist& real, const ScoreDist& fake,
                               EstimatorKind kind, const ConcaveLoss& loss) {
  validate_score_dist(real, "real score distribution");
  validate_score_dist(fake, "fake score distribution");
  const double mu_real = score_mean(real);
  const double mu_fake = score_mean(fake);
  const double mu_pool = 0.5 * (mu_real + mu_fake);
  NeumaierSum s;
  auto real_term = [&](double center) {
    NeumaierSum t;
    for (std::size_t i = 0; i < real.values.size(); ++i) {
      t.add(real.probs[i] * f_eval(loss, real.values[i] - center));
    }
    return t.value();
  };
  auto fake_term = [&](double center) {
    NeumaierSum t;
    for (std::size_t j = 0; j < fake.values.size(); ++j) {
      t.add(fake.probs[j] * f_eval(loss, center - fake.values[j]));
    }
    return t.value();
  };
  switch (kind) {
    case EstimatorKind::Sy: {
      for (std::size_t i = 0; i < real.values.size(); ++i) {
        s.add(real.probs[i] * f_eval(loss, real.values[i]));
      }
      for (std::size_t j = 0; j < fake.values.size(); ++j) {
        s.add(fake.probs[j] * f_eval(loss, -fake.values[j]));
      }
      return s.value();
    }
    case EstimatorKind::RpNaive:
    case EstimatorKind::RpMvue: {
      for (std::size_t i = 0; i < real.values.size(); ++i) {
        for (std::size_t j = 0; j < fake.values.size(); ++j) {
          s.add(2.0 * real.probs[i] * fake.probs[j] *
                f_eval(loss, real.values[i] - fake.values[j]));
        }
      }
      return s.value();
    }
    case EstimatorKind::RaTerm1: return real_term(mu_fake);
    case EstimatorKind::RaTerm2: return fake_term(mu_real);
    case EstimatorKind::Ra: return real_term(mu_fake) + fake_term(mu_real);
    case EstimatorKind::Ralf: return 2.0 * real_term(mu_fake);
    case EstimatorKind::RcTerm1: return real_term(mu_pool);
    case EstimatorKind::RcTerm2: return fake_term(mu_pool);
    case EstimatorKind::Rc: return real_term(mu_pool) + fake_term(mu_pool);
    case EstimatorKind::RaLsUnbiased: return real_term(mu_fake) + fake_term(mu_real);
    case EstimatorKind::RalfLsUnbiased: return 2.0 * real_term(mu_fake);
    case EstimatorKind::RcLsUnbiased: return real_term(mu_pool) + fake_term(mu_pool);
  }
  throw std::invalid_argument("unknown estimator kind");
}

namespace detail {

inline void check_enum_budget(const ScoreDist& real, const ScoreDist& fake, int k) {
  if (k < 1) throw std::invalid_argument("batch size must be >= 1");
  const double count = std::pow(static_cast<double>(real.values.size()), k) *
                       std::pow(static_cast<double>(fake.values.size()), k);
  if (!(count <= kEnumBudget)) {
    throw std::invalid_argument(
        "enumeration over ordered batches needs " + std::to_string(count) +
        " evaluations, above the budget of " + std::to_string(kEnumBudget));
  }
}

// Calls fn(probability, batch) for every ordered (real, fake) batch pair.
template <typename Fn>
inline void for_each_batch(const ScoreDist& real, const ScoreDist& fake, int k, Fn&& fn) {
  const std::size_t mr = real.values.size();
  const std::size_t mf = fake.values.size();
  std::vector<std::size_t> ri(static_cast<std::size_t>(k), 0);
  std::vector<std::size_t> fi(static_cast<std::size_t>(k), 0);
  ScoreBatch batch;
  batch.real.resize(static_cast<std::size_t>(k));
  batch.fake.resize(static_cast<std::size_t>(k));
  auto advance = [](std::vector<std::size_t>& idx, std::size_t m) {
    for (std::size_t pos = idx.size(); pos-- > 0;) {
      if (++idx[pos] < m) return true;
      idx[pos] = 0;
    }
    return false;
  };
  for (;;) {
    double p_real = 1.0;
    for (int t = 0; t < k; ++t) {
      batch.real[static_cast<std::size_t>(t)] = real.values[ri[static_cast<std::size_t>(t)]];
      p_real *= real.probs[ri[static_cast<std::size_t>(t)]];
    }
    if (p_real > 0.0) {
      std::fill(fi.begin(), fi.end(), 0);
      for (;;) {
        double prob = p_real;
        for (int t = 0; t < k; ++t) {
          batch.fake[static_cast<std::size_t>(t)] = fake.values[fi[static_cast<std::size_t>(t)]];
          prob *= fake.probs[fi[static_cast<std::size_t>(t)]];
        }
        if (prob > 0.0) fn(prob, batch);
        if (!advance(fi, mf)) break;
      }
    }
    if (!advance(ri, mr)) break;
  }
}

}  // namespace detail

// Exact E[estimator] over all ordered batches of size k.
inline double exact_expectation(const ScoreDist& real, const ScoreDist& fake, int k,
                                EstimatorKind kind, const ConcaveLoss& loss) {
  validate_score_dist(real, "real score distribution");
  validate_score_dist(fake, "fake score distribution");
  detail::check_enum_budget(real, fake, k);
  NeumaierSum s;
  detail::for_each_batch(real, fake, k, [&](double prob, const ScoreBatch& b) {
    s.add(prob * evaluate_estimator(kind, b, loss));
  });
  return s.value();
}

// Exact Var[estimator]; a second full pass around the exact mean avoids the
// cancellation of the E[X^2] - E[X]^2 form.
inline double exact_variance(const ScoreDist& real, const ScoreDist& fake, int k,
                             EstimatorKind kind, const ConcaveLoss& loss) {
  const double mean = exact_expectation(real, fake, k, kind, loss);
  NeumaierSum s;
  detail::for_each_batch(real, fake, k, [&](double prob, const ScoreBatch& b) {
    const double d = evaluate_estimator(kind, b, loss) - mean;
    s.add(prob * d * d);
  });
  return s.value();
}

// ----- closed-form bias verification (least-squares loss) -----

enum class BiasVariant { RaTerm1, RaTerm2, Ralf, Rc };

struct BiasCandidate {
  std::string formula;
  double predicted = 0.0;
  bool match = false;
};

struct BiasFormulaReport {
  double exact_mean = 0.0;
  double population = 0.0;
  double exact_bias = 0.0;
  std::vector<BiasCandidate> candidates;
};

// Enumerates the exact finite-k bias of a least-squares plug-in term and
// grades the plausible closed-form candidates against it. Two candidate
// families are tested per variant because the reference-mean terms
// (-var/k type) and the pooled-mean terms ((3 var - var)/4k type) are easy
// to mistake for one another.
inline BiasFormulaReport verify_bias_formula(const ScoreDist& real, const ScoreDist& fake,
                                             int k, BiasVariant variant,
                                             double match_tol = 1e-10) {
  const ConcaveLoss ls = make_loss(LossKind::LeastSquares);
  const double vx = score_variance(real);
  const double vy = score_variance(fake);
  const double kk = static_cast<double>(k);
  EstimatorKind kind{};
  std::vector<BiasCandidate> cands;
  switch (variant) {
    case BiasVariant::RaTerm1:
      kind = EstimatorKind::RaTerm1;
      cands.push_back({"-var_fake/k", -vy / kk});
      cands.push_back({"(3*var_real - var_fake)/(4k)", (3.0 * vx - vy) / (4.0 * kk)});
      break;
    case BiasVariant::RaTerm2:
      kind = EstimatorKind::RaTerm2;
      cands.push_back({"-var_real/k", -vx / kk});
      cands.push_back({"(3*var_fake - var_real)/(4k)", (3.0 * vy - vx) / (4.0 * kk)});
      break;
    case BiasVariant::Ralf:
      kind = EstimatorKind::Ralf;
      cands.push_back({"-2*var_fake/k", -2.0 * vy / kk});
      cands.push_back({"-(var_real + var_fake)/k", -(vx + vy) / kk});
      break;
    case BiasVariant::Rc:
      kind = EstimatorKind::Rc;
      cands.push_back({"(var_real + var_fake)/(2k)", 0.5 * (vx + vy) / kk});
      cands.push_back({"-(var_real + var_fake)/k", -(vx + vy) / kk});
      break;
  }
  BiasFormulaReport rep;
  rep.exact_mean = exact_expectation(real, fake, k, kind, ls);
  rep.population = population_value(real, fake, kind, ls);
  rep.exact_bias = rep.exact_mean - rep.population;
  for (auto& c : cands) {
    c.match = std::abs(c.predicted - rep.exact_bias) <= match_tol;
    rep.candidates.push_back(c);
  }
  return rep;
}

// ----- sweeps -----

struct SweepRow {
  int k = 0;
  EstimatorKind estimator = EstimatorKind::Ra;
  LossKind loss = LossKind::LeastSquares;
  double mean = 0.0;
  double variance = 0.0;
  double bias = 0.0;
  double relative_bias = 0.0;  // NaN when the reference is within kRelBiasFloor of 0
  long long replicates = 0;    // 0 marks exact enumeration
};

namespace detail {

inline std::vector<double> cdf_of(const ScoreDist& d) {
  std::vector<double> cdf(d.probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < d.probs.size(); ++i) {
    acc += d.probs[i];
    cdf[i] = acc;
  }
  cdf.back() = 1.0;
  return cdf;
}

inline double sample_score(const ScoreDist& d, const std::vector<double>& cdf,
                           std::mt19937_64& g) {
  const double u = unit_uniform(g);
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  const std::size_t i = std::min(static_cast<std::size_t>(it - cdf.begin()),
                                 d.values.size() - 1);
  return d.values[i];
}

inline SweepRow finish_row(int k, EstimatorKind kind, LossKind loss,
                           const std::vector<double>& values, double reference,
                           long long replicates) {
  SweepRow row;
  row.k = k;
  row.estimator = kind;
  row.loss = loss;
  row.mean = mean_of(values);
  row.variance = values.size() >= 2 ? sample_variance(values) : 0.0;
  row.bias = row.mean - reference;
  row.relative_bias = std::abs(reference) > kRelBiasFloor
                          ? row.mean / reference
                          : std::numeric_limits<double>::quiet_NaN();
  row.replicates = replicates;
  return row;
}

}  // namespace detail

// Monte Carlo bias sweep. For each batch size k, `replicates` independent
// batches are drawn on per-replicate streams (seed, k-index, replicate), the
// estimator is evaluated, and the bias is measured against the exact
// population value of the score laws.
//
// With resampled_reference = true the reference is instead the same-replicate
// estimator recomputed with batch means replaced by means of 10k fresh
// samples (a nearly unbiased stand-in usable when no closed form exists);
// this mode is defined for the mean-referencing estimators only.
inline std::vector<SweepRow> mc_sweep(const ScoreDist& real, const ScoreDist& fake,
                                      const std::vector<int>& ks, EstimatorKind kind,
                                      const ConcaveLoss& loss, long long replicates,
                                      std::uint64_t seed, bool resampled_reference = false) {
  validate_score_dist(real, "real score distribution");
  validate_score_dist(fake, "fake score distribution");
  if (replicates < kMinBiasReplicates) {
    throw std::invalid_argument("bias sweeps need at least 1000 replicates");
  }
  const bool mean_referencing =
      kind == EstimatorKind::Ra || kind == EstimatorKind::RaTerm1 ||
      kind == EstimatorKind::RaTerm2 || kind == EstimatorKind::Ralf ||
      kind == EstimatorKind::Rc || kind == EstimatorKind::RcTerm1 ||
      kind == EstimatorKind::RcTerm2;
  if (resampled_reference && !mean_referencing) {
    throw std::invalid_argument(
        "resampled reference mode is defined for mean-referencing estimators only");
  }
  const auto real_cdf = detail::cdf_of(real);
  const auto fake_cdf = detail::cdf_of(fake);
  std::vector<SweepRow> rows;
  for (std::size_t ki = 0; ki < ks.size(); ++ki) {
    const int k = ks[ki];
    if (k < 1) throw std::invalid_argument("batch size must be >= 1");
    std::vector<double> values;
    std::vector<double> references;
    values.reserve(static_cast<std::size_t>(replicates));
    ScoreBatch batch;
    batch.real.resize(static_cast<std::size_t>(k));
    batch.fake.resize(static_cast<std::size_t>(k));
    for (long long r = 0; r < replicates; ++r) {
      auto g = make_stream(seed, (static_cast<std::uint64_t>(ki) << 40) |
                                     static_cast<std::uint64_t>(r));
      for (auto& x : batch.real) x = detail::sample_score(real, real_cdf, g);
      for (auto& y : batch.fake) y = detail::sample_score(fake, fake_cdf, g);
      values.push_back(evaluate_estimator(kind, batch, loss));
      if (resampled_reference) {
        const int big = 10 * k;
        NeumaierSum sx, sy;
        for (int t = 0; t < big; ++t) sx.add(detail::sample_score(real, real_cdf, g));
        for (int t = 0; t < big; ++t) sy.add(detail::sample_score(fake, fake_cdf, g));
        const double mu_real = sx.value() / big;
        const double mu_fake = sy.value() / big;
        const double mu_pool = 0.5 * (mu_real + mu_fake);
        NeumaierSum ref;
        auto add_real_term = [&](double center) {
          NeumaierSum t;
          for (double x : batch.real) t.add(f_eval(loss, x - center));
          return t.value() / k;
        };
        auto add_fake_term = [&](double center) {
          NeumaierSum t;
          for (double y : batch.fake) t.add(f_eval(loss, center - y));
          return t.value() / k;
        };
        switch (kind) {
          case EstimatorKind::RaTerm1: ref.add(add_real_term(mu_fake)); break;
          case EstimatorKind::RaTerm2: ref.add(add_fake_term(mu_real)); break;
          case EstimatorKind::Ra:
            ref.add(add_real_term(mu_fake));
            ref.add(add_fake_term(mu_real));
            break;
          case EstimatorKind::Ralf: ref.add(2.0 * add_real_term(mu_fake)); break;
          case EstimatorKind::RcTerm1: ref.add(add_real_term(mu_pool)); break;
          case EstimatorKind::RcTerm2: ref.add(add_fake_term(mu_pool)); break;
          case EstimatorKind::Rc:
            ref.add(add_real_term(mu_pool));
            ref.add(add_fake_term(mu_pool));
            break;
          default: break;
        }
        references.push_back(ref.value());
      }
    }
    const double reference = resampled_reference ? mean_of(references)
                                                 : population_value(real, fake, kind, loss);
    rows.push_back(detail::finish_row(k, kind, loss.kind, values, reference, replicates));
  }
  return rows;
}

// Exact-enumeration sweep: same row shape with replicates = 0.
inline std::vector<SweepRow> exact_sweep(const ScoreDist& real, const ScoreDist& fake,
                                         const std::vector<int>& ks, EstimatorKind kind,
                                         const ConcaveLoss& loss) {
  std::vector<SweepRow> rows;
  for (int k : ks) {
    SweepRow row;
    row.k = k;
    row.estimator = kind;
    row.loss = loss.kind;
    row.mean = exact_expectation(real, fake, k, kind, loss);
    row.variance = exact_variance(real, fake, k, kind, loss);
    const double reference = population_value(real, fake, kind, loss);
    row.bias = row.mean - reference;
    row.relative_bias = std::abs(reference) > kRelBiasFloor
                            ? row.mean / reference
                            : std::numeric_limits<double>::quiet_NaN();
    row.replicates = 0;
    rows.push_back(row);
  }
  return rows;
}

// Paired comparison of the diagonal and all-pairs estimators on common
// random batches, with wall-clock cost per evaluation (the all-pairs form
// pays k^2 loss evaluations for its variance reduction).
struct MvueComparison {
  SweepRow naive;
  SweepRow mvue;
  double naive_ns_per_eval = 0.0;
  double mvue_ns_per_eval = 0.0;
};

inline std::vector<MvueComparison> mvue_compare(const ScoreDist& real, const ScoreDist& fake,
                                                const std::vector<int>& ks,
                                                const ConcaveLoss& loss, long long replicates,
                                                std::uint64_t seed) {
  validate_score_dist(real, "real score distribution");
  validate_score_dist(fake, "fake score distribution");
  if (replicates < kMinBiasReplicates) {
    throw std::invalid_argument("bias sweeps need at least 1000 replicates");
  }
  const auto real_cdf = detail::cdf_of(real);
  const auto fake_cdf = detail::cdf_of(fake);
  const double reference = population_value(real, fake, EstimatorKind::RpNaive, loss);
  std::vector<MvueComparison> out;
  for (std::size_t ki = 0; ki < ks.size(); ++ki) {
    const int k = ks[ki];
    if (k < 1) throw std::invalid_argument("batch size must be >= 1");
    std::vector<double> naive_values, mvue_values;
    naive_values.reserve(static_cast<std::size_t>(replicates));
    mvue_values.reserve(static_cast<std::size_t>(replicates));
    ScoreBatch batch;
    batch.real.resize(static_cast<std::size_t>(k));
    batch.fake.resize(static_cast<std::size_t>(k));
    std::chrono::nanoseconds naive_time{0}, mvue_time{0};
    for (long long r = 0; r < replicates; ++r) {
      auto g = make_stream(seed, (static_cast<std::uint64_t>(ki) << 40) |
                                     static_cast<std::uint64_t>(r));
      for (auto& x : batch.real) x = detail::sample_score(real, real_cdf, g);
      for (auto& y : batch.fake) y = detail::sample_score(fake, fake_cdf, g);
      const auto t0 = std::chrono::steady_clock::now();
      const double vn = est_rp_naive(batch, loss);
      const auto t1 = std::chrono::steady_clock::now();
      const double vm = est_rp_mvue(batch, loss);
      const auto t2 = std::chrono::steady_clock::now();
      naive_time += t1 - t0;
      mvue_time += t2 - t1;
      naive_values.push_back(vn);
      mvue_values.push_back(vm);
    }
    MvueComparison cmp;
    cmp.naive = detail::finish_row(k, EstimatorKind::RpNaive, loss.kind, naive_values,
                                   reference, replicates);
    cmp.mvue = detail::finish_row(k, EstimatorKind::RpMvue, loss.kind, mvue_values,
                                  reference, replicates);
    cmp.naive_ns_per_eval = static_cast<double>(naive_time.count()) / replicates;
    cmp.mvue_ns_per_eval = static_cast<double>(mvue_time.count()) / replicates;
    out.push_back(cmp);
  }
  return out;
}

}  // namespace relfdiv
