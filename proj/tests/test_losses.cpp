// Structural properties of the concave loss family and spot values used
// throughout the divergence machinery.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>

#include "relfdiv/losses.hpp"
#include "relfdiv/rng.hpp"

using namespace relfdiv;

namespace {
const ConcaveLoss kSgan = make_loss(LossKind::LogSigmoid);
const ConcaveLoss kLs = make_loss(LossKind::LeastSquares);
const ConcaveLoss kHinge = make_loss(LossKind::Hinge);
}  // namespace

TEST_CASE("loss constructors expose the supremum and its location") {
  CHECK(kSgan.sup_value == Catch::Approx(kLog2).epsilon(1e-15));
  CHECK(std::isinf(kSgan.argsup));
  CHECK(kLs.sup_value == 1.0);
  CHECK(kLs.argsup == 1.0);
  CHECK(kHinge.sup_value == 1.0);
  CHECK(kHinge.argsup == 1.0);
}

TEST_CASE("loss names round-trip through the parser") {
  for (LossKind kind : {LossKind::LogSigmoid, LossKind::LeastSquares, LossKind::Hinge}) {
    const auto parsed = parse_loss(loss_name(kind));
    CHECK(parsed.kind == kind);
  }
  CHECK_THROWS_AS(parse_loss("wgan"), std::invalid_argument);
}

TEST_CASE("all losses vanish at zero with nonzero slope") {
  for (const auto& loss : {kSgan, kLs, kHinge}) {
    CHECK(f_eval(loss, 0.0) == 0.0);
    CHECK(f_grad(loss, 0.0) != 0.0);
  }
}

TEST_CASE("spot values of the log-sigmoid loss") {
  // f(z) = log(2 sigmoid(z)); f(0) = 0, f -> log 2 from below, f(-z) ~ z.
  CHECK(f_eval(kSgan, 40.0) == Catch::Approx(kLog2).margin(1e-12));
  CHECK(f_eval(kSgan, -40.0) == Catch::Approx(kLog2 - 40.0).margin(1e-12));
  CHECK(f_grad(kSgan, 0.0) == Catch::Approx(0.5).margin(1e-15));
  CHECK(f_curv(kSgan, 0.0) == Catch::Approx(-0.25).margin(1e-15));
}

TEST_CASE("spot values of the least-squares loss") {
  CHECK(f_eval(kLs, 1.0) == 1.0);
  CHECK(f_eval(kLs, 3.0) == -3.0);
  CHECK(f_eval(kLs, -1.0) == -3.0);
  CHECK(f_grad(kLs, 0.0) == 2.0);
  CHECK(f_grad(kLs, 1.0) == 0.0);
  CHECK(f_curv(kLs, 5.0) == -2.0);
}

TEST_CASE("spot values of the hinge loss and its kink subgradient") {
  CHECK(f_eval(kHinge, 1.0) == 1.0);
  CHECK(f_eval(kHinge, 7.0) == 1.0);  // flat above the kink
  CHECK(f_eval(kHinge, 0.0) == 0.0);
  CHECK(f_eval(kHinge, -1.0) == -1.0);
  CHECK(f_grad(kHinge, 0.999) == 1.0);
  CHECK(f_grad(kHinge, 1.0) == 0.0);  // flat-side subgradient at the kink
  CHECK(f_grad(kHinge, 2.0) == 0.0);
}

TEST_CASE("losses are bounded by their supremum") {
  auto g = make_stream(101);
  for (const auto& loss : {kSgan, kLs, kHinge}) {
    for (int i = 0; i < 2000; ++i) {
      const double z = uniform(g, -50.0, 50.0);
      CHECK(f_eval(loss, z) <= loss.sup_value + 1e-12);
    }
  }
}

TEST_CASE("concavity along random chords") {
  auto g = make_stream(102);
  for (const auto& loss : {kSgan, kLs, kHinge}) {
    for (int i = 0; i < 2000; ++i) {
      const double a = uniform(g, -30.0, 30.0);
      const double b = uniform(g, -30.0, 30.0);
      const double alpha = unit_uniform(g);
      const double chord = alpha * f_eval(loss, a) + (1.0 - alpha) * f_eval(loss, b);
      CHECK(f_eval(loss, alpha * a + (1.0 - alpha) * b) >= chord - 1e-9);
    }
  }
}

TEST_CASE("antisymmetric sum is nonpositive: f(z) + f(-z) <= 0") {
  auto g = make_stream(103);
  for (const auto& loss : {kSgan, kLs, kHinge}) {
    for (int i = 0; i < 2000; ++i) {
      const double z = uniform(g, -30.0, 30.0);
      CHECK(f_eval(loss, z) + f_eval(loss, -z) <= 1e-12);
    }
  }
}

TEST_CASE("secant slope through the origin is nonincreasing") {
  // For concave f with f(0) = 0, f(s b)/b <= f(s a)/a whenever 0 < a <= b.
  auto g = make_stream(104);
  for (const auto& loss : {kSgan, kLs, kHinge}) {
    for (int i = 0; i < 2000; ++i) {
      double a = uniform(g, 1e-3, 5.0);
      double b = uniform(g, 1e-3, 5.0);
      if (a > b) std::swap(a, b);
      double s = uniform(g, -8.0, 8.0);
      if (std::abs(s) < 1e-3) s = 1e-3;
      CHECK(f_eval(loss, s * b) / b <= f_eval(loss, s * a) / a + 1e-9);
    }
  }
}

TEST_CASE("analytic gradients match central differences away from the kink") {
  auto g = make_stream(105);
  const double h = 1e-6;
  for (const auto& loss : {kSgan, kLs, kHinge}) {
    for (int i = 0; i < 500; ++i) {
      double z = uniform(g, -10.0, 10.0);
      if (loss.kind == LossKind::Hinge && std::abs(z - 1.0) < 1e-3) z = 0.5;
      const double fd = (f_eval(loss, z + h) - f_eval(loss, z - h)) / (2.0 * h);
      CHECK(f_grad(loss, z) == Catch::Approx(fd).margin(2e-7));
    }
  }
}

TEST_CASE("randomized structural self-check passes for every loss") {
  for (const auto& loss : {kSgan, kLs, kHinge}) {
    const auto report = f_props_check(loss);
    INFO(std::string(loss_name(loss.kind)));
    for (const auto& msg : report.failures) INFO(msg);
    CHECK(report.ok);
  }
}

TEST_CASE("non-finite loss arguments are rejected") {
  CHECK_THROWS_AS(f_eval(kLs, std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(f_grad(kSgan, std::numeric_limits<double>::infinity()),
                  std::invalid_argument);
}
