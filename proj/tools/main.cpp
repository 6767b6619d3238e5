// relfdiv: reproducible experiment runner for the divergence laboratory.
//
// One subcommand per experiment family; every run reads flags (optionally
// seeded from a JSON config file, flags taking precedence), writes CSV
// output atomically, and is byte-reproducible given the same configuration
// and seed. Exit codes: 0 success, 1 a check failed, 2 usage/config error.
// Wall-clock timings (mvue-compare) go to stderr only, so the reproducible
// streams stay timing-free.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <memory>
#include <stdexcept>
#include <string>
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
#include "relfdiv/version.hpp"

namespace {

using namespace relfdiv;

// Thrown by subcommand bodies when the run completed but a checked
// property failed; mapped to exit code 1 (usage errors map to 2).
struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Config merging happens before CLI11 sees the arguments: when the
// invocation names a subcommand and passes --config FILE, the file must hold
// a flat JSON object {"flag-name": value, ...}. Each field becomes an
// appended "--flag-name value" pair unless that flag was given explicitly,
// so command-line flags always override config values. Unknown fields then
// surface through the ordinary unrecognized-argument error, which names
// them; required flags missing from both places fail as usual.
std::string config_scalar(const std::string& key, const nlohmann::json& v) {
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_float()) return fmt_double(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  throw std::invalid_argument("config field '" + key + "' has an unsupported value type");
}

std::vector<std::string> with_config_defaults(std::vector<std::string> args) {
  if (args.empty() || args.front().empty() || args.front().front() == '-') return args;
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
  }
  if (path.empty()) return args;
  nlohmann::json j;
  try {
    j = load_json_file(path);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  if (!j.is_object()) {
    throw std::invalid_argument("config root must be a JSON object of flag values");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string flag = "--" + it.key();
    bool given = false;
    for (std::size_t i = 1; i < args.size() && !given; ++i) {
      given = args[i] == flag || args[i].rfind(flag + "=", 0) == 0;
    }
    if (given) continue;
    const auto& v = it.value();
    if (v.is_boolean()) {
      if (v.get<bool>()) args.push_back(flag);
    } else if (v.is_array()) {
      std::string joined;
      for (const auto& e : v) {
        if (!joined.empty()) joined += ',';
        joined += config_scalar(it.key(), e);
      }
      args.push_back(flag);
      args.push_back(joined);
    } else {
      args.push_back(flag);
      args.push_back(config_scalar(it.key(), v));
    }
  }
  return args;
}

const std::vector<std::string> kLossNames{"sgan", "lsgan", "hinge"};
const std::vector<std::string> kVariantNames{"sy", "rp", "ra", "ralf", "rc"};

BiasVariant parse_bias_variant(const std::string& name) {
  if (name == "ra_term1") return BiasVariant::RaTerm1;
  if (name == "ra_term2") return BiasVariant::RaTerm2;
  if (name == "ralf") return BiasVariant::Ralf;
  if (name == "rc") return BiasVariant::Rc;
  throw std::invalid_argument("unknown bias variant '" + name + "'");
}

std::string bool_cell(bool b) { return b ? "1" : "0"; }

void write_out(const std::string& path, const CsvBuilder& csv) {
  atomic_write_text(path, csv.str());
}

// Prepares a subcommand with the shared conventions: JSON config support
// and strict rejection of unknown config keys.
CLI::App* add_sub(CLI::App& app, const std::string& name, const std::string& desc) {
  CLI::App* sub = app.add_subcommand(name, desc);
  sub->add_option("--config", "JSON config file with flag defaults; explicit flags override");
  return sub;
}

void require_seed(const CLI::Option* seed_opt) {
  if (seed_opt->count() == 0) {
    throw CLI::RequiredError("--seed (stochastic run)");
  }
}

// ---------------------------------------------------------------- oracle --

void register_oracle(CLI::App& app) {
  struct OracleArgs {
    std::string p_path, q_path, loss, variant, out;
    double tol = 1e-6;
    int max_iters = 100000;
    double eps_sup = 1e-4;
  };
  auto o = std::make_shared<OracleArgs>();
  CLI::App* sub = add_sub(app, "oracle", "solve one divergence value exactly");
  sub->add_option("--p", o->p_path, "JSON file for the first distribution")->required();
  sub->add_option("--q", o->q_path, "JSON file for the second distribution")->required();
  sub->add_option("--loss", o->loss, "loss kind")->required()->check(CLI::IsMember(kLossNames));
  sub->add_option("--variant", o->variant, "objective variant")
      ->required()
      ->check(CLI::IsMember(kVariantNames));
  sub->add_option("--tol", o->tol, "gradient-norm tolerance");
  sub->add_option("--max-iters", o->max_iters, "iteration budget");
  sub->add_option("--eps-sup", o->eps_sup, "saturation margin below the 2M ceiling");
  sub->add_option("--out", o->out, "optional CSV output path");
  sub->callback([o] {
    const auto p = load_dist(o->p_path);
    const auto q = load_dist(o->q_path);
    const auto loss = parse_loss(o->loss);
    const auto variant = parse_variant(o->variant);
    SolveOptions opts;
    opts.tol = o->tol;
    opts.max_iters = o->max_iters;
    opts.eps_sup = o->eps_sup;
    const auto res = solve_divergence(p, q, loss, variant, opts);
    if (!o->out.empty()) {
      CsvBuilder csv({"instance", "loss", "variant", "value", "converged", "iters"});
      csv.add_row({"file", o->loss, o->variant, fmt_double(res.value), bool_cell(res.converged),
                   std::to_string(res.iterations)});
      write_out(o->out, csv);
    }
    std::cout << "value=" << fmt_double(res.value) << " converged=" << bool_cell(res.converged)
              << " iters=" << res.iterations << "\n";
    if (!res.converged) throw CheckFailed("solver did not converge");
    if (res.value < -1e-6) throw CheckFailed("divergence value is negative");
  });
}

// -------------------------------------------------------------- estimate --

void register_estimate(CLI::App& app) {
  struct EstimateArgs {
    std::string scores, estimator, loss, out;
  };
  auto o = std::make_shared<EstimateArgs>();
  CLI::App* sub = add_sub(app, "estimate", "evaluate one estimator on a score batch");
  sub->add_option("--scores", o->scores, "JSON file with real_scores and fake_scores")
      ->required();
  sub->add_option("--estimator", o->estimator, "estimator kind")->required();
  sub->add_option("--loss", o->loss, "loss kind")->required()->check(CLI::IsMember(kLossNames));
  sub->add_option("--out", o->out, "optional CSV output path");
  sub->callback([o] {
    const auto batch = load_score_batch(o->scores);
    const auto kind = parse_estimator(o->estimator);
    const auto loss = parse_loss(o->loss);
    const double value = evaluate_estimator(kind, batch, loss);
    if (!o->out.empty()) {
      CsvBuilder csv({"estimator", "loss", "k", "value"});
      csv.add_row({o->estimator, o->loss, std::to_string(batch.real.size()),
                   fmt_double(value)});
      write_out(o->out, csv);
    }
    std::cout << "value=" << fmt_double(value) << " k=" << batch.real.size() << "\n";
  });
}

// ---------------------------------------------------------------- axioms --

void register_axioms(CLI::App& app) {
  struct AxiomArgs {
    std::string loss, variant, out;
    int count = 100;
    std::uint64_t seed = 0;
    double tol = 1e-6;
  };
  auto o = std::make_shared<AxiomArgs>();
  CLI::App* sub = add_sub(app, "axioms", "divergence axioms on seeded random instances");
  sub->add_option("--loss", o->loss, "loss kind")->required()->check(CLI::IsMember(kLossNames));
  sub->add_option("--variant", o->variant, "objective variant")
      ->required()
      ->check(CLI::IsMember(kVariantNames));
  sub->add_option("--count", o->count, "number of random instances")
      ->check(CLI::PositiveNumber);
  sub->add_option("--seed", o->seed, "RNG seed")->required();
  sub->add_option("--tol", o->tol, "tolerance for the axiom checks");
  sub->add_option("--out", o->out, "CSV output path")->required();
  sub->callback([o] {
    const auto loss = parse_loss(o->loss);
    const auto variant = parse_variant(o->variant);
    CsvBuilder csv({"instance", "loss", "variant", "value", "tv", "witness_value", "pass"});
    int failures = 0;
    for (int i = 0; i < o->count; ++i) {
      auto g = make_stream(o->seed, static_cast<std::uint64_t>(i));
      const auto inst = random_instance(g);
      const auto rep = check_axioms(inst.p, inst.q, loss, variant, o->tol);
      csv.add_row({std::to_string(i), o->loss, o->variant, fmt_double(rep.value),
                   fmt_double(rep.tv),
                   rep.tv >= 0.05 ? fmt_double(rep.witness_value) : std::string("nan"),
                   bool_cell(rep.pass)});
      if (!rep.pass) {
        ++failures;
        std::cerr << "instance " << i << ": " << rep.message << "\n";
      }
    }
    write_out(o->out, csv);
    std::cout << "instances=" << o->count << " failures=" << failures << "\n";
    if (failures > 0) throw CheckFailed("axiom violations found");
  });
}

// -------------------------------------------------------------- ordering --

void register_ordering(CLI::App& app) {
  struct OrderingArgs {
    std::string loss, out, instances = "random", p_path, q_path;
    int count = 100;
    std::uint64_t seed = 0;
    double tol = 1e-6;
  };
  auto o = std::make_shared<OrderingArgs>();
  CLI::App* sub = add_sub(app, "ordering", "value ordering across objective variants");
  sub->add_option("--loss", o->loss, "loss kind")->required()->check(CLI::IsMember(kLossNames));
  sub->add_option("--instances", o->instances, "instance source")
      ->check(CLI::IsMember({"random"}));
  sub->add_option("--count", o->count, "number of random instances")
      ->check(CLI::PositiveNumber);
  auto* seed_opt = sub->add_option("--seed", o->seed, "RNG seed (random instances)");
  sub->add_option("--p", o->p_path, "JSON distribution file (file-instance mode)");
  sub->add_option("--q", o->q_path, "JSON distribution file (file-instance mode)");
  sub->add_option("--tol", o->tol, "ordering slack");
  sub->add_option("--out", o->out, "CSV output path")->required();
  sub->callback([o, seed_opt] {
    const auto loss = parse_loss(o->loss);
    CsvBuilder csv({"instance", "loss", "d_sy", "d_rp", "d_ralf", "d_ra", "ok"});
    int failures = 0;
    auto emit = [&](const std::string& label, const DiscreteDist& p, const DiscreteDist& q) {
      const auto rep = check_ordering(p, q, loss, o->tol);
      csv.add_row({label, o->loss, fmt_double(rep.sy), fmt_double(rep.rp), fmt_double(rep.ralf),
                   fmt_double(rep.ra), bool_cell(rep.ok)});
      if (!rep.ok) ++failures;
    };
    if (!o->p_path.empty() || !o->q_path.empty()) {
      if (o->p_path.empty() || o->q_path.empty()) {
        throw std::invalid_argument("file-instance mode needs both --p and --q");
      }
      emit("file", load_dist(o->p_path), load_dist(o->q_path));
    } else {
      require_seed(seed_opt);
      for (int i = 0; i < o->count; ++i) {
        auto g = make_stream(o->seed, static_cast<std::uint64_t>(i));
        const auto inst = random_instance(g);
        emit(std::to_string(i), inst.p, inst.q);
      }
    }
    write_out(o->out, csv);
    std::cout << "rows=" << (o->p_path.empty() ? o->count : 1) << " failures=" << failures
              << "\n";
    if (failures > 0) throw CheckFailed("ordering violations found");
  });
}

// -------------------------------------------------------------- weakness --

void register_weakness(CLI::App& app) {
  struct WeaknessArgs {
    std::string loss, out;
    int steps = 8;
  };
  auto o = std::make_shared<WeaknessArgs>();
  CLI::App* sub = add_sub(app, "weakness", "shrinking-offset point masses: transport vs f-based values");
  sub->add_option("--loss", o->loss, "loss kind")->required()->check(CLI::IsMember(kLossNames));
  sub->add_option("--steps", o->steps, "number of offsets 1/n, n = 1..steps")
      ->check(CLI::Range(2, 100000));
  sub->add_option("--out", o->out, "CSV output path")->required();
  sub->callback([o] {
    const auto loss = parse_loss(o->loss);
    const auto rows = weakness_sequence(o->steps, loss);
    CsvBuilder csv({"n", "w1", "d_sy", "d_rp", "d_ra"});
    for (const auto& r : rows) {
      csv.add_row({std::to_string(r.n), fmt_double(r.w1), fmt_double(r.d_sy), fmt_double(r.d_rp),
                   fmt_double(r.d_ra)});
    }
    write_out(o->out, csv);
    std::cout << "rows=" << rows.size() << "\n";
  });
}

// ------------------------------------------------------------ bias-sweep --

std::vector<std::string> sweep_cells(const SweepRow& r) {
  return {std::to_string(r.k),
          std::string(estimator_name(r.estimator)),
          std::string(loss_name(r.loss)),
          fmt_double(r.mean),
          fmt_double(r.variance),
          fmt_double(r.bias),
          fmt_double(r.relative_bias),
          r.replicates == 0 ? std::string("exact") : std::to_string(r.replicates)};
}

void register_bias_sweep(CLI::App& app) {
  struct BiasArgs {
    std::string real, fake, estimator, loss, mode = "mc", out;
    std::vector<int> ks{2, 4, 8, 16};
    long long replicates = 100000;
    std::uint64_t seed = 0;
    bool resampled_reference = false;
  };
  auto o = std::make_shared<BiasArgs>();
  CLI::App* sub = add_sub(app, "bias-sweep", "estimator bias/variance across batch sizes");
  sub->add_option("--real", o->real, "JSON score law for real scores")->required();
  sub->add_option("--fake", o->fake, "JSON score law for fake scores")->required();
  sub->add_option("--estimator", o->estimator, "estimator kind")->required();
  sub->add_option("--loss", o->loss, "loss kind")->required()->check(CLI::IsMember(kLossNames));
  sub->add_option("--ks", o->ks, "batch sizes")->delimiter(',');
  sub->add_option("--mode", o->mode, "mc (sampled) or exact (enumeration)")
      ->check(CLI::IsMember({"mc", "exact"}));
  sub->add_option("--replicates", o->replicates, "Monte Carlo replicates per batch size");
  auto* seed_opt = sub->add_option("--seed", o->seed, "RNG seed (mc mode)");
  sub->add_flag("--resampled-reference", o->resampled_reference,
                "reference means re-estimated from ten-fold larger samples");
  sub->add_option("--out", o->out, "CSV output path")->required();
  sub->callback([o, seed_opt] {
    const auto real = load_score_dist(o->real);
    const auto fake = load_score_dist(o->fake);
    const auto kind = parse_estimator(o->estimator);
    const auto loss = parse_loss(o->loss);
    std::vector<SweepRow> rows;
    if (o->mode == "exact") {
      rows = exact_sweep(real, fake, o->ks, kind, loss);
    } else {
      require_seed(seed_opt);
      rows = mc_sweep(real, fake, o->ks, kind, loss, o->replicates, o->seed,
                      o->resampled_reference);
    }
    CsvBuilder csv({"k", "estimator", "loss", "mean", "variance", "bias", "relative_bias",
                 "replicates"});
    for (const auto& r : rows) csv.add_row(sweep_cells(r));
    write_out(o->out, csv);
    std::cout << "rows=" << rows.size() << "\n";
  });
}

// ---------------------------------------------------------- mvue-compare --

void register_mvue_compare(CLI::App& app) {
  struct MvueArgs {
    std::string real, fake, loss, out;
    std::vector<int> ks{2, 4, 8, 16, 32, 64};
    long long replicates = 100000;
    std::uint64_t seed = 0;
  };
  auto o = std::make_shared<MvueArgs>();
  CLI::App* sub = add_sub(app, "mvue-compare", "paired-difference estimator vs its all-pairs refinement");
  sub->add_option("--real", o->real, "JSON score law for real scores")->required();
  sub->add_option("--fake", o->fake, "JSON score law for fake scores")->required();
  sub->add_option("--loss", o->loss, "loss kind")->required()->check(CLI::IsMember(kLossNames));
  sub->add_option("--ks", o->ks, "batch sizes")->delimiter(',');
  sub->add_option("--replicates", o->replicates, "Monte Carlo replicates per batch size");
  sub->add_option("--seed", o->seed, "RNG seed")->required();
  sub->add_option("--out", o->out, "CSV output path")->required();
  sub->callback([o] {
    const auto real = load_score_dist(o->real);
    const auto fake = load_score_dist(o->fake);
    const auto loss = parse_loss(o->loss);
    const auto comps = mvue_compare(real, fake, o->ks, loss, o->replicates, o->seed);
    CsvBuilder csv({"k", "estimator", "loss", "mean", "variance", "bias", "relative_bias",
                 "replicates"});
    int failures = 0;
    for (const auto& c : comps) {
      csv.add_row(sweep_cells(c.naive));
      csv.add_row(sweep_cells(c.mvue));
      // Timing is inherently non-reproducible; it goes to the diagnostic
      // stream so the CSV and stdout stay byte-stable.
      std::fprintf(stderr, "timing k=%d rp_ns_per_eval=%.0f rp_mvue_ns_per_eval=%.0f\n",
                   c.naive.k, c.naive_ns_per_eval, c.mvue_ns_per_eval);
      const double se = std::sqrt((c.naive.variance + c.mvue.variance) /
                                  static_cast<double>(c.naive.replicates));
      if (std::abs(c.naive.mean - c.mvue.mean) > 6.0 * se + 1e-12) ++failures;
      if (c.mvue.variance > c.naive.variance) ++failures;
    }
    write_out(o->out, csv);
    std::cout << "rows=" << 2 * comps.size() << " failures=" << failures << "\n";
    if (failures > 0) throw CheckFailed("mean agreement or variance dominance failed");
  });
}

// ----------------------------------------------------------- verify-bias --

void register_verify_bias(CLI::App& app) {
  struct VerifyArgs {
    std::string real, fake, variant, out;
    int k = 2;
  };
  auto o = std::make_shared<VerifyArgs>();
  CLI::App* sub = add_sub(app, "verify-bias",
                          "arbitrate closed-form bias candidates by exact enumeration");
  sub->add_option("--real", o->real, "JSON score law for real scores")->required();
  sub->add_option("--fake", o->fake, "JSON score law for fake scores")->required();
  sub->add_option("--k", o->k, "batch size")->required()->check(CLI::PositiveNumber);
  sub->add_option("--variant", o->variant, "bias target")
      ->required()
      ->check(CLI::IsMember({"ra_term1", "ra_term2", "ralf", "rc"}));
  sub->add_option("--out", o->out, "CSV output path")->required();
  sub->callback([o] {
    const auto real = load_score_dist(o->real);
    const auto fake = load_score_dist(o->fake);
    const auto rep = verify_bias_formula(real, fake, o->k, parse_bias_variant(o->variant));
    CsvBuilder csv({"variant", "k", "measured_bias", "formula", "predicted_bias", "match"});
    int matches = 0;
    for (const auto& c : rep.candidates) {
      csv.add_row({o->variant, std::to_string(o->k), fmt_double(rep.exact_bias), c.formula,
                   fmt_double(c.predicted), bool_cell(c.match)});
      matches += c.match ? 1 : 0;
    }
    write_out(o->out, csv);
    std::cout << "bias=" << fmt_double(rep.exact_bias) << " candidates=" << rep.candidates.size()
              << " matches=" << matches << "\n";
  });
}

// -------------------------------------------------------------- dynamics --

void register_dynamics(CLI::App& app) {
  struct DynamicsArgs {
    std::string target, loss, variant, q0 = "uniform", out;
    int iters = 5000;
    int log_every = 100;
    int critic_steps = 5;
    double lr_critic = 0.05;
    double lr_gen = 0.05;
  };
  auto o = std::make_shared<DynamicsArgs>();
  CLI::App* sub = add_sub(app, "dynamics", "alternating critic/generator game on a fixed support");
  sub->add_option("--target", o->target, "JSON distribution file for the data law")->required();
  sub->add_option("--loss", o->loss, "loss kind")->required()->check(CLI::IsMember(kLossNames));
  sub->add_option("--variant", o->variant, "objective variant")
      ->required()
      ->check(CLI::IsMember(kVariantNames));
  sub->add_option("--q0", o->q0, "generator start: uniform or target")
      ->check(CLI::IsMember({"uniform", "target"}));
  sub->add_option("--iters", o->iters, "generator updates")->check(CLI::PositiveNumber);
  sub->add_option("--log-every", o->log_every, "logging stride")->check(CLI::PositiveNumber);
  sub->add_option("--critic-steps", o->critic_steps, "critic updates per generator update")
      ->check(CLI::PositiveNumber);
  sub->add_option("--lr-critic", o->lr_critic, "critic step size")
      ->check(CLI::PositiveNumber);
  sub->add_option("--lr-gen", o->lr_gen, "generator step size")->check(CLI::PositiveNumber);
  sub->add_option("--out", o->out, "CSV output path")->required();
  sub->callback([o] {
    const auto target = load_dist(o->target);
    GameConfig cfg;
    cfg.loss = parse_loss(o->loss);
    cfg.variant = parse_variant(o->variant);
    cfg.lr_critic = o->lr_critic;
    cfg.lr_gen = o->lr_gen;
    cfg.critic_steps = o->critic_steps;
    auto state = o->q0 == "target" ? make_game(target, logits_for(target.probs))
                                   : make_game(target);
    const auto rows = run_game(state, cfg, o->iters, o->log_every);
    CsvBuilder csv({"step", "divergence", "objective", "tv"});
    for (const auto& r : rows) {
      csv.add_row({std::to_string(r.step), fmt_double(r.divergence), fmt_double(r.objective),
                   fmt_double(r.tv)});
    }
    write_out(o->out, csv);
    std::cout << "steps=" << o->iters << " final_divergence=" << fmt_double(rows.back().divergence)
              << " final_tv=" << fmt_double(rows.back().tv) << "\n";
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"laboratory for relativistic divergence objectives on discrete distributions"};
  app.set_version_flag("--version", std::string("relfdiv ") + std::string(kVersion));
  app.require_subcommand(1);
  register_oracle(app);
  register_estimate(app);
  register_axioms(app);
  register_ordering(app);
  register_weakness(app);
  register_bias_sweep(app);
  register_mvue_compare(app);
  register_verify_bias(app);
  register_dynamics(app);
  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = with_config_defaults(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const CheckFailed& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
