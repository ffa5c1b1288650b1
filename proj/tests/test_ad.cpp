#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "kiln/ad.hpp"
#include "kiln/error.hpp"
#include "kiln/rng.hpp"

using namespace kiln;
using ad::Param;
using ad::Tape;
using ad::Tensor;

namespace {

ErrorCode code_of(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::Io;
}

Param random_param(Rng &rng, const std::string &name, std::size_t r, std::size_t c, double lo = -1.0,
                   double hi = 1.0) {
  Param p(name, r, c);
  for (auto &v : p.value) v = rng.uniform(lo, hi);
  return p;
}

/// Local central differences, independent of ad::finite_difference_check.
/// Returns the worst |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double worst_gradient_error(const std::function<Tensor(Tape &)> &f, std::vector<Param *> params) {
  for (auto *p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(f(tape));
  }
  double worst = 0.0;
  const double eps = 1e-6;
  for (auto *p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double keep = p->value[i];
      p->value[i] = keep + eps;
      Tape up;
      const double fp = f(up).value();
      p->value[i] = keep - eps;
      Tape down;
      const double fm = f(down).value();
      p->value[i] = keep;
      const double numeric = (fp - fm) / (2 * eps);
      const double analytic = p->grad[i];
      const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic - numeric) / scale);
    }
  }
  return worst;
}

/// sum(x * R) with a fixed random weight R, so every output entry gets its own
/// adjoint.
Tensor weighted_sum(const Tensor &x, std::uint64_t seed = 77) {
  Rng rng(seed);
  std::vector<double> w(x.size());
  for (auto &v : w) v = rng.uniform(-1.0, 1.0);
  Tensor r = x.tape()->constant(x.rows(), x.cols(), std::move(w));
  return ad::sum(ad::mul(x, r));
}

} // namespace

TEST_CASE("matmul hand values") {
  Tape t;
  auto a = t.constant(2, 2, {1, 2, 3, 4});
  auto v = t.constant(2, 1, {1, 1});
  auto out = ad::matmul(a, v);
  CHECK(out.rows() == 2);
  CHECK(out.values()[0] == 3.0);
  CHECK(out.values()[1] == 7.0);
  auto eye = t.constant(2, 2, {1, 0, 0, 1});
  auto x = t.constant(2, 1, {0.25, -3});
  const auto ex = ad::matmul(eye, x).values();
  CHECK(std::vector<double>(ex.begin(), ex.end()) == std::vector<double>{0.25, -3});
  auto nt = ad::matmul_nt(t.constant(1, 2, {1, 1}), a); // [1 1] * a^T
  CHECK(nt.values()[0] == 3.0);
  CHECK(nt.values()[1] == 7.0);
  CHECK(code_of([&] { ad::matmul(a, t.constant(3, 1, {1, 2, 3})); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("elementwise hand values") {
  Tape t;
  auto x = t.constant(1, 3, {0.0, -1.0, 2.0});
  auto y = ad::leaky_relu(x, 0.2);
  CHECK(y.value(0, 0) == 0.0);
  CHECK(y.value(0, 1) == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(y.value(0, 2) == 2.0);
  CHECK(ad::leaky_relu(t.constant(1, 1, {-2.0}), 0.2).value() == doctest::Approx(-0.4));

  auto theta = t.constant(3, 1, {0.3, -2.0, std::numbers::pi});
  auto zero = t.constant(1, 1, {0.0});
  for (double v : ad::cos_shifted(theta, 0, zero).values()) CHECK(v == 1.0);
  CHECK(ad::cos_shifted(theta, 1, zero).value(2, 0) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("segment softmax hand values") {
  Tape t;
  const std::vector<std::size_t> seg{0, 1, 1, 2, 2, 2};
  auto s = ad::segment_softmax(t.constant(6, 1, {5.0, 0, 0, 1, 2, 3}), seg, 3);
  CHECK(s.value(0, 0) == 1.0);
  CHECK(s.value(1, 0) == 0.5);
  CHECK(s.value(2, 0) == 0.5);
  CHECK(s.value(3, 0) == doctest::Approx(0.0900).epsilon(1e-3));
  CHECK(s.value(4, 0) == doctest::Approx(0.2447).epsilon(1e-3));
  CHECK(s.value(5, 0) == doctest::Approx(0.6652).epsilon(1e-3));
  CHECK(std::abs(s.value(3, 0) - 0.0900) < 1e-4);
  CHECK(std::abs(s.value(4, 0) - 0.2447) < 1e-4);
  CHECK(std::abs(s.value(5, 0) - 0.6652) < 1e-4);

  // Large scores stay finite through the max shift.
  auto big = ad::segment_softmax(t.constant(2, 1, {1000.0, 1000.0}), std::vector<std::size_t>{0, 0}, 1);
  CHECK(big.value(0, 0) == 0.5);

  const std::vector<std::size_t> gap{0, 2};
  CHECK_NOTHROW(ad::segment_softmax(t.constant(2, 1, {1, 2}), gap, 3, true));
  CHECK(code_of([&] { ad::segment_softmax(t.constant(2, 1, {1, 2}), gap, 3, false); }) ==
        ErrorCode::EmptySegment);
}

TEST_CASE("weighted cross-entropy hand values") {
  Tape t;
  const std::vector<int> y{0};
  const std::vector<double> w{1.0, 1.0};
  const std::vector<std::size_t> mask{0};
  CHECK(ad::weighted_cross_entropy(t.constant(1, 2, {20, -20}), y, w, mask).value() < 1e-8);
  CHECK(ad::weighted_cross_entropy(t.constant(1, 2, {0.3, 0.3}), y, w, mask).value() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  // Masked-out rows do not count; the weight of the true class scales.
  const std::vector<int> y2{1, 0};
  const std::vector<double> w2{1.0, 3.0};
  CHECK(ad::weighted_cross_entropy(t.constant(2, 2, {0, 0, 50, -50}), y2, w2, mask).value() ==
        doctest::Approx(3.0 * std::log(2.0)));
  CHECK(code_of([&] {
          ad::weighted_cross_entropy(t.constant(1, 2, {0, 0}), y, w, std::vector<std::size_t>{});
        }) == ErrorCode::EmptyMask);
}

TEST_CASE("finite_difference_check on x squared") {
  Param x("x", 1, 1, 3.0);
  std::vector<Param *> ps{&x};
  {
    Tape t;
    auto v = t.param(x);
    t.backward(ad::mul(v, v));
  }
  CHECK(x.grad[0] == 6.0);
  const double err = ad::finite_difference_check([&](Tape &t) {
    auto v = t.param(x);
    return ad::mul(v, v);
  }, ps);
  CHECK(err < 1e-8);
}

TEST_CASE("gradients accumulate until zeroed") {
  Rng rng(1);
  Param w = random_param(rng, "w", 3, 2);
  auto build = [&](Tape &t) { return weighted_sum(ad::leaky_relu(ad::matmul(t.constant(2, 3, {1, 2, 3, 4, 5, 6}), t.param(w)))); };
  Tape t;
  auto loss = build(t);
  t.backward(loss);
  const auto once = w.grad;
  t.backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(w.grad[i] == 2.0 * once[i]);
  t.zero_grads();
  for (double g : w.grad) CHECK(g == 0.0);

  // Bitwise identical across fresh tapes.
  Tape t2;
  t2.backward(build(t2));
  const auto again = w.grad;
  w.zero_grad();
  Tape t3;
  t3.backward(build(t3));
  CHECK(w.grad == again);
  CHECK(again == once);
}

TEST_CASE("non-finite values are rejected") {
  Tape t;
  auto x = t.constant(1, 1, {1e200});
  CHECK(code_of([&] { ad::mul(x, x); }) == ErrorCode::NumericalError);
  CHECK(code_of([&] { t.constant(1, 1, {std::numeric_limits<double>::quiet_NaN()}); }) ==
        ErrorCode::NumericalError);
}

TEST_CASE("every op passes a finite-difference check") {
  Rng rng(2024);
  auto A = random_param(rng, "A", 4, 3);
  auto B = random_param(rng, "B", 3, 5);
  auto C = random_param(rng, "C", 4, 3);
  auto row = random_param(rng, "row", 1, 3);
  auto s = random_param(rng, "s", 1, 1);
  auto v = random_param(rng, "v", 4, 1);
  auto Bt = random_param(rng, "Bt", 5, 3);
  // Keep entries away from the LeakyReLU kink.
  auto K = random_param(rng, "K", 4, 3, 0.2, 1.0);
  for (std::size_t i = 0; i < K.value.size(); i += 2) K.value[i] = -K.value[i];
  auto theta = random_param(rng, "theta", 6, 1, -3.0, 3.0);
  auto mu = random_param(rng, "mu", 1, 1);
  auto scores = random_param(rng, "scores", 7, 1, -2.0, 2.0);
  auto logits = random_param(rng, "logits", 5, 3, -2.0, 2.0);

  const double tol = 1e-6;
  CHECK(worst_gradient_error([&](Tape &t) { return weighted_sum(ad::matmul(t.param(A), t.param(B))); }, {&A, &B}) < tol);
  CHECK(worst_gradient_error([&](Tape &t) { return weighted_sum(ad::matmul_nt(t.param(A), t.param(Bt))); }, {&A, &Bt}) < tol);
  CHECK(worst_gradient_error([&](Tape &t) { return weighted_sum(ad::add(t.param(A), t.param(C))); }, {&A, &C}) < tol);
  CHECK(worst_gradient_error([&](Tape &t) { return weighted_sum(ad::add(t.param(A), t.param(row))); }, {&A, &row}) < tol);
  CHECK(worst_gradient_error([&](Tape &t) { return weighted_sum(ad::add(t.param(A), t.param(s))); }, {&A, &s}) < tol);
  CHECK(worst_gradient_error([&](Tape &t) { return weighted_sum(ad::mul(t.param(A), t.param(C))); }, {&A, &C}) < tol);
  CHECK(worst_gradient_error([&](Tape &t) { return weighted_sum(ad::mul(t.param(A), t.param(row))); }, {&A, &row}) < tol);
  CHECK(worst_gradient_error([&](Tape &t) { return weighted_sum(ad::mul(t.param(A), t.param(s))); }, {&A, &s}) < tol);
  CHECK(worst_gradient_error([&](Tape &t) { return weighted_sum(ad::scale(t.param(A), -2.5)); }, {&A}) < tol);
  CHECK(worst_gradient_error([&](Tape &t) { return weighted_sum(ad::scale_rows(t.param(A), t.param(v))); }, {&A, &v}) < tol);
  CHECK(worst_gradient_error([&](Tape &t) { return weighted_sum(ad::leaky_relu(t.param(K), 0.2)); }, {&K}) < tol);
  for (int l : {0, 1, 3}) {
    CHECK(worst_gradient_error([&](Tape &t) { return weighted_sum(ad::cos_shifted(t.param(theta), l, t.param(mu))); },
                               {&theta, &mu}) < tol);
  }
  CHECK(worst_gradient_error([&](Tape &t) { return weighted_sum(ad::element(t.param(A), 2, 1)); }, {&A}) < tol);
  CHECK(worst_gradient_error([&](Tape &t) { return weighted_sum(ad::slice_cols(t.param(A), 1, 2)); }, {&A}) < tol);

  const std::vector<std::size_t> gather{3, 0, 0, 2, 3, 1};
  CHECK(worst_gradient_error([&](Tape &t) { return weighted_sum(ad::gather_rows(t.param(A), gather)); }, {&A}) < tol);
  const std::vector<std::size_t> scatter{1, 1, 4, 0};
  CHECK(worst_gradient_error([&](Tape &t) { return weighted_sum(ad::scatter_add_rows(t.param(A), scatter, 6)); }, {&A}) < tol);

  const std::vector<std::size_t> seg{0, 0, 2, 2, 2, 3, 0};
  CHECK(worst_gradient_error([&](Tape &t) { return weighted_sum(ad::segment_softmax(t.param(scores), seg, 4)); }, {&scores}) < tol);

  const std::vector<int> labels{0, 2, 1, 1, 0};
  const std::vector<double> weights{0.5, 2.0, 1.5};
  const std::vector<std::size_t> mask{0, 1, 3};
  CHECK(worst_gradient_error([&](Tape &t) { return ad::weighted_cross_entropy(t.param(logits), labels, weights, mask); },
                             {&logits}) < tol);
  CHECK(worst_gradient_error([&](Tape &t) { return ad::sum(t.param(A)); }, {&A}) < tol);
}

TEST_CASE("shape errors") {
  Tape t;
  auto a = t.constant(2, 3, std::vector<double>(6, 1.0));
  auto b = t.constant(3, 2, std::vector<double>(6, 1.0));
  CHECK(code_of([&] { ad::add(a, b); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { ad::mul(a, t.constant(1, 2, {1, 1})); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { ad::scale_rows(a, t.constant(3, 1, {1, 1, 1})); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { t.backward(a); }) == ErrorCode::ShapeMismatch);
}
