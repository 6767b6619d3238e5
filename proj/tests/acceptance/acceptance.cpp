// Release gate: one verdict line per release-blocking claim, exit 1 if any
// fails. Each section is self-contained and states its own tolerances; the
// sampled sections pin their seeds so a red line is reproducible.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "relfdiv/bias_lab.hpp"
#include "relfdiv/checks.hpp"
#include "relfdiv/discrete.hpp"
#include "relfdiv/dynamics.hpp"
#include "relfdiv/estimators.hpp"
#include "relfdiv/io.hpp"
#include "relfdiv/losses.hpp"
#include "relfdiv/oracle.hpp"
#include "relfdiv/rng.hpp"

using namespace relfdiv;
namespace fs = std::filesystem;

namespace {

const ConcaveLoss kSgan = make_loss(LossKind::LogSigmoid);
const ConcaveLoss kLs = make_loss(LossKind::LeastSquares);
const ConcaveLoss kHinge = make_loss(LossKind::Hinge);
const std::vector<ConcaveLoss> kLosses{kSgan, kLs, kHinge};
const std::vector<Variant> kDivergenceVariants{Variant::Rp, Variant::Ra, Variant::Ralf,
                                               Variant::Rc};
const std::vector<Variant> kAllVariants{Variant::Sy, Variant::Rp, Variant::Ra, Variant::Ralf,
                                        Variant::Rc};

constexpr std::uint64_t kInstanceSeed = 42;
constexpr int kInstanceCount = 200;

int g_failures = 0;

void verdict(int index, bool ok, const std::string& what, const std::string& detail) {
  std::printf("[%s] %d/9 %s\n", ok ? "PASS" : "FAIL", index, what.c_str());
  if (!ok) {
    ++g_failures;
    std::fprintf(stderr, "  detail: %s\n", detail.c_str());
  }
}

std::vector<InstancePair> instance_set() {
  std::vector<InstancePair> set;
  set.reserve(kInstanceCount);
  for (int i = 0; i < kInstanceCount; ++i) {
    auto g = make_stream(kInstanceSeed, static_cast<std::uint64_t>(i));
    set.push_back(random_instance(g));
  }
  return set;
}

// ---- 1: divergence axioms --------------------------------------------------

void criterion_axioms(const std::vector<InstancePair>& set) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (const auto& loss : kLosses) {
    for (Variant v : kDivergenceVariants) {
      for (std::size_t i = 0; i < set.size() && ok; ++i) {
        const auto& inst = set[i];
        const auto res = solve_divergence(inst.p, inst.q, loss, v);
        const auto eq = solve_divergence(inst.p, inst.p, loss, v);
        const double tv = total_variation(inst.p, inst.q);
        auto where = [&] {
          return std::string(loss_name(loss.kind)) + "/" + std::string(variant_name(v)) +
                 " instance " + std::to_string(i);
        };
        if (!(res.value >= -1e-6)) {
          ok = false;
          detail = "negative value " + fmt_double(res.value) + " at " + where();
        } else if (!(eq.value <= 1e-6)) {
          ok = false;
          detail = "nonzero value " + fmt_double(eq.value) + " at equality, " + where();
        } else if (tv >= 0.05) {
          const auto w = witness_critic(inst.p, inst.q, loss, v);
          if (!(res.value > 0.0) || !(w.value > 0.0)) {
            ok = false;
            detail = "positivity not certified at " + where();
          }
        }
      }
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (ok && secs > 300.0) {
    ok = false;
    detail = "runtime " + fmt_double(secs) + "s exceeds the 300s budget";
  }
  char what[160];
  std::snprintf(what, sizeof(what),
                "divergence axioms: nonnegativity, identity, certified positivity on %d "
                "instances x 12 loss/scheme combos (%.1fs)",
                kInstanceCount, secs);
  verdict(1, ok, what, detail);
}

// ---- 2: value ordering across schemes --------------------------------------

void criterion_ordering(const std::vector<InstancePair>& set) {
  bool ok = true;
  std::string detail;
  for (const auto& loss : kLosses) {
    for (std::size_t i = 0; i < set.size() && ok; ++i) {
      const auto rep = check_ordering(set[i].p, set[i].q, loss);
      if (!rep.ok) {
        ok = false;
        detail = "chain broken on " + std::string(loss_name(loss.kind)) + " instance " +
                 std::to_string(i) + ": sy=" + fmt_double(rep.sy) + " rp=" + fmt_double(rep.rp) +
                 " ralf=" + fmt_double(rep.ralf) + " ra=" + fmt_double(rep.ra);
      }
    }
  }
  if (ok) {
    const auto p = make_dist({0.0, 1.0}, {0.2, 0.8});
    const auto q = make_dist({0.0, 1.0}, {0.8, 0.2});
    const auto rep = check_ordering(p, q, kLs);
    if (std::abs(rep.sy - 0.72) > 1e-4 || std::abs(rep.rp - 1.05882) > 1e-4 ||
        std::abs(rep.ra - 1.38462) > 1e-4) {
      ok = false;
      detail = "worked pair values sy=" + fmt_double(rep.sy) + " rp=" + fmt_double(rep.rp) +
               " ra=" + fmt_double(rep.ra) + " off the documented 0.72/1.05882/1.38462";
    }
  }
  verdict(2, ok,
          "value ordering sy <= rp <= ralf and rp <= ra within 1e-6 on the instance set, "
          "plus the worked two-point pair within 1e-4",
          detail);
}

// ---- 3: transport vanishes while the divergences stay pinned ---------------

void criterion_weakness() {
  bool ok = true;
  std::string detail;
  const auto rows = weakness_sequence(100, kLs);
  for (const auto& r : rows) {
    if (std::abs(r.w1 * r.n - 1.0) > 1e-9 || std::abs(r.d_sy - 2.0) > 1e-3 ||
        std::abs(r.d_rp - 2.0) > 1e-3 || std::abs(r.d_ra - 2.0) > 1e-3) {
      ok = false;
      detail = "row n=" + std::to_string(r.n) + ": w1=" + fmt_double(r.w1) +
               " d_sy=" + fmt_double(r.d_sy) + " d_rp=" + fmt_double(r.d_rp) +
               " d_ra=" + fmt_double(r.d_ra);
      break;
    }
  }
  verdict(3, ok,
          "shrinking offsets n = 1..100: transport distance 1/n while the three "
          "divergences hold 2.0 +/- 1e-3",
          detail);
}

// ---- shared enumeration catalog (supports of size 1..3) ---------------------

const std::vector<ScoreDist>& catalog() {
  static const std::vector<ScoreDist> c{
      {{0.7}, {1.0}},
      {{0.0, 1.0}, {0.5, 0.5}},
      {{0.0, 1.0}, {0.4, 0.6}},
      {{-1.0, 0.4}, {0.35, 0.65}},
      {{-0.5, 0.2, 1.1}, {0.3, 0.5, 0.2}},
  };
  return c;
}

// ---- 4: the all-pairs estimator is unbiased and never worse ----------------

void criterion_mvue() {
  bool ok = true;
  std::string detail;
  double coin_gap = 0.0;
  for (const auto& loss : kLosses) {
    for (const auto& real : catalog()) {
      for (const auto& fake : catalog()) {
        for (int k = 1; k <= 3 && ok; ++k) {
          const double mean_naive =
              exact_expectation(real, fake, k, EstimatorKind::RpNaive, loss);
          const double mean_mvue =
              exact_expectation(real, fake, k, EstimatorKind::RpMvue, loss);
          if (std::abs(mean_naive - mean_mvue) > 1e-10) {
            ok = false;
            detail = "means differ by " + fmt_double(mean_naive - mean_mvue) + " at k=" +
                     std::to_string(k) + " under " + std::string(loss_name(loss.kind));
            break;
          }
          const double var_naive =
              exact_variance(real, fake, k, EstimatorKind::RpNaive, loss);
          const double var_mvue = exact_variance(real, fake, k, EstimatorKind::RpMvue, loss);
          if (var_mvue > var_naive + 1e-12) {
            ok = false;
            detail = "all-pairs variance " + fmt_double(var_mvue) + " above diagonal " +
                     fmt_double(var_naive);
            break;
          }
        }
      }
    }
  }
  if (ok) {
    // Documented strict instance: fair coins on {0,1}, k = 2, quadratic loss.
    const ScoreDist coin{{0.0, 1.0}, {0.5, 0.5}};
    coin_gap = exact_variance(coin, coin, 2, EstimatorKind::RpNaive, kLs) -
               exact_variance(coin, coin, 2, EstimatorKind::RpMvue, kLs);
    if (!(coin_gap > 1e-6)) {
      ok = false;
      detail = "no strict variance reduction on the documented coin instance (gap " +
               fmt_double(coin_gap) + ")";
    }
  }
  verdict(4, ok,
          "all-pairs estimator: equal expectation to 1e-10 and dominated variance on every "
          "catalog instance (k <= 3), strictly better on the coin pair (gap " +
              fmt_double(coin_gap) + ")",
          detail);
}

// ---- 5: exact quadratic-loss bias laws --------------------------------------

void criterion_bias_laws() {
  bool ok = true;
  std::string detail;
  for (const auto& real : catalog()) {
    for (const auto& fake : catalog()) {
      const double vy = score_variance(fake);
      for (int k = 1; k <= 3 && ok; ++k) {
        const double bias = exact_expectation(real, fake, k, EstimatorKind::RaTerm1, kLs) -
                            population_value(real, fake, EstimatorKind::RaTerm1, kLs);
        if (std::abs(bias - (-vy / k)) > 1e-10) {
          ok = false;
          detail = "term-1 bias " + fmt_double(bias) + " != -var_fake/k = " +
                   fmt_double(-vy / k) + " at k=" + std::to_string(k);
        }
      }
      for (int k = 2; k <= 3 && ok; ++k) {
        for (EstimatorKind kind : {EstimatorKind::RaLsUnbiased, EstimatorKind::RalfLsUnbiased,
                                   EstimatorKind::RcLsUnbiased}) {
          const double bias = exact_expectation(real, fake, k, kind, kLs) -
                              population_value(real, fake, kind, kLs);
          if (std::abs(bias) > 1e-10) {
            ok = false;
            detail = std::string(estimator_name(kind)) + " residual bias " + fmt_double(bias) +
                     " at k=" + std::to_string(k);
          }
        }
      }
    }
  }
  if (ok) {
    const ScoreDist real{{0.0, 1.0}, {0.4, 0.6}};
    const ScoreDist fake{{-0.3, 0.9}, {0.55, 0.45}};
    const double pop = population_value(real, fake, EstimatorKind::Ra, kLs);
    double prev = exact_expectation(real, fake, 1, EstimatorKind::Ra, kLs) - pop;
    for (int k = 2; k <= 8; k *= 2) {
      const double cur = exact_expectation(real, fake, k, EstimatorKind::Ra, kLs) - pop;
      const double ratio = prev / cur;
      if (!(ratio >= 1.999 && ratio <= 2.001)) {
        ok = false;
        detail = "bias ratio " + fmt_double(ratio) + " outside [1.999, 2.001] at k=" +
                 std::to_string(k);
      }
      prev = cur;
    }
  }
  verdict(5, ok,
          "quadratic-loss bias laws: term-1 bias = -var_fake/k to 1e-10, corrected "
          "estimators unbiased to 1e-10, doubling k halves the bias",
          detail);
}

// ---- 6: sampled bias trend for the non-quadratic losses ---------------------

ScoreDist gauss_scores(double mu, double sigma, int m, double span) {
  ScoreDist d;
  d.values.resize(static_cast<std::size_t>(m));
  d.probs.resize(static_cast<std::size_t>(m));
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    const double x = mu - span * sigma + 2.0 * span * sigma * i / (m - 1);
    d.values[static_cast<std::size_t>(i)] = x;
    const double w = std::exp(-0.5 * (x - mu) * (x - mu) / (sigma * sigma));
    d.probs[static_cast<std::size_t>(i)] = w;
    total += w;
  }
  for (auto& p : d.probs) p /= total;
  return d;
}

void criterion_mc_bias_trend() {
  constexpr long long kReplicates = 100000;
  constexpr std::uint64_t kSeed = 20260815;
  const std::vector<int> ks{2, 4, 8, 16, 32};
  bool ok = true;
  std::string detail;
  std::string ratios;
  struct Setup {
    const ConcaveLoss& loss;
    ScoreDist real;
    ScoreDist fake;
  };
  const std::vector<Setup> setups{
      {kSgan, gauss_scores(1.5, 0.3, 33, 3.0), gauss_scores(0.0, 1.5, 65, 3.0)},
      {kHinge, gauss_scores(1.0, 0.3, 33, 3.0), gauss_scores(0.0, 1.2, 65, 3.0)},
  };
  for (const auto& s : setups) {
    const auto rows =
        mc_sweep(s.real, s.fake, ks, EstimatorKind::Ralf, s.loss, kReplicates, kSeed);
    for (std::size_t i = 0; i + 1 < rows.size() && ok; ++i) {
      if (!(std::abs(rows[i].bias) > std::abs(rows[i + 1].bias))) {
        ok = false;
        detail = std::string(loss_name(s.loss.kind)) + ": |bias| not decreasing at k=" +
                 std::to_string(rows[i].k) + " -> " + std::to_string(rows[i + 1].k) + " (" +
                 fmt_double(rows[i].bias) + " -> " + fmt_double(rows[i + 1].bias) + ")";
      }
    }
    for (std::size_t i = rows.size() - 3; i + 1 < rows.size() && ok; ++i) {
      const double ratio = std::abs(rows[i].bias) / std::abs(rows[i + 1].bias);
      ratios += (ratios.empty() ? "" : ", ") + std::string(loss_name(s.loss.kind)) + " " +
                std::to_string(rows[i].k) + "->" + std::to_string(rows[i + 1].k) + ": " +
                fmt_double(ratio);
      if (!(ratio >= 1.6 && ratio <= 2.4)) {
        ok = false;
        detail = std::string(loss_name(s.loss.kind)) + ": halving ratio " + fmt_double(ratio) +
                 " outside [1.6, 2.4]";
      }
    }
  }
  verdict(6, ok,
          "sampled bias trend (1e5 replicates, one-way average scheme): |bias| decreasing "
          "over k = 2..32 with halving ratios in [1.6, 2.4] (" + ratios + ")",
          detail);
}

// ---- 7: oracle internals: gradients and concavity ---------------------------

InstancePair deterministic_instance(std::uint64_t index) {
  auto g = make_stream(71, index);
  return random_instance(g);
}

void criterion_oracle_correctness() {
  bool ok = true;
  std::string detail;
  const double h = 1e-5;
  std::uint64_t combo = 0;
  for (const auto& loss : kLosses) {
    for (Variant v : kAllVariants) {
      const auto inst = deterministic_instance(combo);
      auto g = make_stream(72, combo);
      ++combo;
      const std::size_t n = inst.p.points.size();
      const double span = loss.kind == LossKind::Hinge ? 0.4 : 2.0;
      for (int rep = 0; rep < 10 && ok; ++rep) {
        CriticTable c{inst.p.points, std::vector<double>(n)};
        for (auto& x : c.values) x = uniform(g, -span, span);
        const auto grad = objective_gradient(inst.p, inst.q, c, loss, v);
        for (std::size_t i = 0; i < n && ok; ++i) {
          CriticTable up = c;
          CriticTable dn = c;
          up.values[i] += h;
          dn.values[i] -= h;
          const double fd = (objective(inst.p, inst.q, up, loss, v) -
                             objective(inst.p, inst.q, dn, loss, v)) /
                            (2.0 * h);
          if (std::abs(grad[i] - fd) > 1e-5 * std::max({1.0, std::abs(fd), std::abs(grad[i])})) {
            ok = false;
            detail = "gradient mismatch " + fmt_double(grad[i]) + " vs " + fmt_double(fd) +
                     " at " + std::string(loss_name(loss.kind)) + "/" +
                     std::string(variant_name(v));
          }
        }
      }
    }
  }
  if (ok) {
    std::uint64_t chord_stream = 0;
    for (const auto& loss : kLosses) {
      for (Variant v : kAllVariants) {
        auto g = make_stream(73, chord_stream++);
        for (int rep = 0; rep < 1000 && ok; ++rep) {
          const auto inst = random_instance(g);
          const std::size_t n = inst.p.points.size();
          CriticTable c1{inst.p.points, std::vector<double>(n)};
          CriticTable c2{inst.p.points, std::vector<double>(n)};
          CriticTable mix{inst.p.points, std::vector<double>(n)};
          for (auto& x : c1.values) x = uniform(g, -3.0, 3.0);
          for (auto& x : c2.values) x = uniform(g, -3.0, 3.0);
          const double a = unit_uniform(g);
          for (std::size_t i = 0; i < n; ++i) {
            mix.values[i] = a * c1.values[i] + (1.0 - a) * c2.values[i];
          }
          const double lhs = objective(inst.p, inst.q, mix, loss, v);
          const double rhs = a * objective(inst.p, inst.q, c1, loss, v) +
                             (1.0 - a) * objective(inst.p, inst.q, c2, loss, v);
          if (lhs < rhs - 1e-9) {
            ok = false;
            detail = "concavity violated by " + fmt_double(rhs - lhs) + " under " +
                     std::string(loss_name(loss.kind)) + "/" + std::string(variant_name(v));
          }
        }
      }
    }
  }
  verdict(7, ok,
          "oracle internals: analytic gradients within 1e-5 of central differences at 10 "
          "critics per loss/scheme; 1000 random chords per combo concave within 1e-9",
          detail);
}

// ---- 8: training dynamics reach the target and respect the fixed point ------

void criterion_dynamics() {
  bool ok = true;
  std::string detail;
  const auto target = make_dist({0.0, 1.0}, {0.8, 0.2});
  std::string finals;
  for (Variant v : {Variant::Rp, Variant::Ra}) {
    GameConfig cfg;
    cfg.loss = kLs;
    cfg.variant = v;
    cfg.critic_steps = 5;
    GameState s = make_game(target);
    const auto rows = run_game(s, cfg, 5000, 100);
    const double initial = rows.front().divergence;
    const double final_div = rows.back().divergence;
    finals += (finals.empty() ? "" : ", ") + std::string(variant_name(v)) + ": " +
              fmt_double(initial) + " -> " + fmt_double(final_div);
    if (!(initial > 0.0) || !(final_div < 0.25 * initial)) {
      ok = false;
      detail = std::string(variant_name(v)) + " run failed to cut the divergence to 25%: " +
               fmt_double(initial) + " -> " + fmt_double(final_div);
    }
    GameState fixed = make_game(target, logits_for(target.probs));
    const auto frows = run_game(fixed, cfg, 1000, 100);
    for (const auto& r : frows) {
      if (!(r.tv <= 1e-6)) {
        ok = false;
        detail = std::string(variant_name(v)) + " matched-start run drifted to tv=" +
                 fmt_double(r.tv) + " at step " + std::to_string(r.step);
      }
    }
  }
  verdict(8, ok,
          "two-point dynamics (5 critic steps/update, 5000 updates): divergence below 25% "
          "of start for both paired and average schemes (" + finals +
              "); matched start stays within tv 1e-6",
          detail);
}

// ---- 9: CLI byte reproducibility --------------------------------------------

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() / ("relfdiv_accept_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

void criterion_cli_determinism() {
  bool ok = true;
  std::string detail;
  Scratch s;
  spit(s.dir / "p.json", R"({"points": [0.0, 1.0], "probs": [0.2, 0.8]})");
  spit(s.dir / "q.json", R"({"points": [0.0, 1.0], "probs": [0.8, 0.2]})");
  spit(s.dir / "batch.json", R"({"real_scores": [1.0, 0.2], "fake_scores": [0.0, 0.7]})");
  spit(s.dir / "real.json", R"({"values": [0.0, 1.0], "probs": [0.4, 0.6]})");
  spit(s.dir / "fake.json", R"({"values": [-0.3, 0.9], "probs": [0.55, 0.45]})");

  const std::vector<std::pair<std::string, std::string>> runs{
      {"oracle", "oracle --p p.json --q q.json --loss lsgan --variant ra --out out.csv"},
      {"estimate", "estimate --scores batch.json --estimator rp --loss hinge --out out.csv"},
      {"axioms", "axioms --loss lsgan --variant rp --count 3 --seed 5 --out out.csv"},
      {"ordering", "ordering --loss sgan --count 3 --seed 5 --out out.csv"},
      {"weakness", "weakness --loss lsgan --steps 5 --out out.csv"},
      {"bias-sweep",
       "bias-sweep --real real.json --fake fake.json --estimator ralf --loss lsgan "
       "--ks 2,4 --mode mc --replicates 1000 --seed 9 --out out.csv"},
      {"mvue-compare",
       "mvue-compare --real real.json --fake fake.json --loss lsgan --ks 2 "
       "--replicates 1000 --seed 9 --out out.csv"},
      {"verify-bias",
       "verify-bias --real real.json --fake fake.json --k 2 --variant ralf --out out.csv"},
      {"dynamics",
       "dynamics --target p.json --loss lsgan --variant ra --iters 10 --log-every 5 "
       "--out out.csv"},
  };
  for (const auto& [name, args] : runs) {
    std::string bytes_first, stdout_first;
    for (int pass = 0; pass < 2 && ok; ++pass) {
      fs::remove(s.dir / "out.csv");
      const std::string cmd = "cd '" + s.dir.string() + "' && '" + RELFDIV_CLI_PATH + "' " +
                              args + " > stdout.txt 2> stderr.txt";
      const int raw = std::system(cmd.c_str());
      const int code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
      if (code != 0) {
        ok = false;
        detail = name + " exited with " + std::to_string(code) + ": " +
                 slurp(s.dir / "stderr.txt");
        break;
      }
      const std::string bytes = slurp(s.dir / "out.csv");
      const std::string out = slurp(s.dir / "stdout.txt");
      if (pass == 0) {
        bytes_first = bytes;
        stdout_first = out;
        if (bytes.empty()) {
          ok = false;
          detail = name + " produced no output file";
        }
      } else if (bytes != bytes_first || out != stdout_first) {
        ok = false;
        detail = name + " is not byte-reproducible across identical invocations";
      }
    }
    if (!ok) break;
  }
  verdict(9, ok,
          "command-line determinism: all nine subcommands byte-identical (CSV and stdout) "
          "across repeated seeded invocations",
          detail);
}

}  // namespace

int main() {
  const auto set = instance_set();
  criterion_axioms(set);
  criterion_ordering(set);
  criterion_weakness();
  criterion_mvue();
  criterion_bias_laws();
  criterion_mc_bias_trend();
  criterion_oracle_correctness();
  criterion_dynamics();
  criterion_cli_determinism();
  if (g_failures > 0) {
    std::printf("%d of 9 release criteria failed\n", g_failures);
    return 1;
  }
  std::printf("all 9 release criteria passed\n");
  return 0;
}
