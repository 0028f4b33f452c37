#include <doctest.h>

#include <cmath>

#include "sfn/autograd.hpp"
#include "sfn/gradcheck.hpp"
#include "sfn/params.hpp"

using namespace sfn;

namespace {

using M = Mat<double>;

M matrix(Eigen::Index r, Eigen::Index c, std::initializer_list<double> v) {
  M m(r, c);
  auto it = v.begin();
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = *it++;
  return m;
}

}  // namespace

TEST_SUITE("autograd") {
  TEST_CASE("every block passes the finite-difference suite") {
    const auto reports = gradcheck_suite(1e-4, 3);
    CHECK(reports.size() >= 30);
    for (const auto& r : reports) {
      INFO(r.name, " worst ", r.max_rel_error(), " ", r.failure);
      CHECK(r.passed);
    }
  }

  TEST_CASE("grad_check flags a detached path") {
    ParamStore<double> store({ParamSpec{"a", {2, 3}, ParamInit::fan_in_uniform, 1}});
    store.value("a") = matrix(2, 3, {0.3, -0.2, 0.9, 0.5, 0.1, -0.7});
    // d/da sum(a .* a) is 2a, but the second factor is a constant here.
    const LossClosure detached = [](Tape<double>& t, const ParamStore<double>& s) {
      const Var a = t.param(s, "a");
      return t.sum(t.mul(a, t.constant(s.value("a"))));
    };
    const GradCheckReport r = grad_check("detached", detached, store, 1e-4);
    CHECK_FALSE(r.passed);
    CHECK(r.max_rel_error() == doctest::Approx(0.5).epsilon(1e-6));
  }

  TEST_CASE("masked softmax ignores padded keys") {
    Tape<double> t;
    const Var a = t.constant(matrix(2, 3, {1.0, 2.0, 50.0, 0.0, 0.0, -3.0}));
    const M s = t.value(t.softmax_rows(a, Mask{true, true, false}));
    const double e = std::exp(1.0);
    CHECK(s(0, 0) == doctest::Approx(1 / (1 + e)).epsilon(1e-12));
    CHECK(s(0, 2) == 0.0);
    CHECK(s(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  }

  TEST_CASE("layer norm rows have zero mean and unit variance before the affine map") {
    Tape<double> t;
    const Var x = t.constant(matrix(2, 4, {1, 2, 3, 4, -1, 0, 5, 8}));
    const Var g = t.constant(M::Ones(1, 4));
    const Var b = t.constant(M::Zero(1, 4));
    const M y = t.value(t.layer_norm_rows(x, g, b, 0.0));
    for (int r = 0; r < 2; ++r) {
      CHECK(y.row(r).mean() == doctest::Approx(0.0).epsilon(1e-12));
      CHECK(y.row(r).squaredNorm() / 4 == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("max pool skips padded rows and routes gradient to the winner") {
    Tape<double> t;
    const Var a = t.leaf(matrix(3, 2, {1, 9, 4, 2, 7, 8}));
    const Var p = t.max_pool_rows(a, Mask{true, true, false});
    CHECK(t.value(p) == matrix(1, 2, {4, 9}));
    t.backward(t.sum(p));
    CHECK(t.grad(a) == matrix(3, 2, {0, 1, 1, 0, 0, 0}));
  }

  TEST_CASE("structural ops") {
    Tape<double> t;
    const Var a = t.constant(matrix(2, 2, {1, 2, 3, 4}));
    const Var b = t.constant(matrix(2, 2, {5, 6, 7, 8}));
    const std::vector<Var> parts{a, b};
    CHECK(t.value(t.interleave_cols(parts)) == matrix(2, 4, {1, 5, 2, 6, 3, 7, 4, 8}));
    CHECK(t.value(t.concat_cols(parts)) == matrix(2, 4, {1, 2, 5, 6, 3, 4, 7, 8}));
    CHECK(t.value(t.shift_rows(a, 1)) == matrix(2, 2, {3, 4, 0, 0}));
    CHECK(t.value(t.shift_rows(a, -1)) == matrix(2, 2, {0, 0, 1, 2}));
    CHECK(t.value(t.pad_rows(a, 3)) == matrix(3, 2, {1, 2, 3, 4, 0, 0}));
  }

  TEST_CASE("masked mse: hand value and gradient") {
    Tape<double> t;
    const Var p = t.leaf(matrix(3, 1, {1.0, 2.0, 5.0}));
    const Var l = t.masked_mse(p, matrix(3, 1, {0.0, 4.0, 0.0}), Mask{true, true, false});
    CHECK(t.value(l)(0, 0) == doctest::Approx((1.0 + 4.0) / 2.0));
    t.backward(l);
    CHECK(t.grad(p) == matrix(3, 1, {1.0, -2.0, 0.0}));
  }

  TEST_CASE("gradients accumulate across uses of one value") {
    Tape<double> t;
    const Var a = t.leaf(matrix(1, 2, {3, -2}));
    t.backward(t.sum(t.add(t.mul(a, a), t.scale(a, 3.0))));
    CHECK(t.grad(a) == matrix(1, 2, {9, -1}));
  }
}
