#include <doctest.h>

#include <cmath>
#include <random>

#include "gkr/adam.hpp"
#include "gkr/errors.hpp"
#include "gkr/grad_check.hpp"
#include "gkr/tape.hpp"
#include "support.hpp"

using gkr::Matrix;
using gkr::PoolMode;
using gkr::Tape;
using gkr::Var;

namespace {

Matrix row(std::initializer_list<double> v) { return Matrix(1, v.size(), std::vector<double>(v)); }

}  // namespace

TEST_CASE("linear computes W transpose v") {
  Tape t;
  CHECK(t.value(t.linear(Matrix::identity(2), t.constant(row({3, -1})))) == row({3, -1}));
  CHECK(t.value(t.linear(Matrix(2, 2, {1, 0, 0, 0}), t.constant(row({5, 7})))) == row({5, 0}));
  CHECK(t.value(t.linear(Matrix(2, 2, {1, 2, 3, 4}), t.constant(row({1, 1})))) == row({4, 6}));
}

TEST_CASE("linear rejects mismatched shapes and names them") {
  Tape t;
  try {
    t.linear(Matrix(3, 2), t.constant(row({1, 2})));
    FAIL("expected ShapeError");
  } catch (const gkr::ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("3x2") != std::string::npos);
    CHECK(msg.find("1x2") != std::string::npos);
  }
}

TEST_CASE("relu") {
  Tape t;
  CHECK(t.value(t.relu(t.constant(row({-1, 0, 2})))) == row({0, 0, 2}));
  CHECK(t.value(t.relu(t.constant(row({-3, -0.5})))) == row({0, 0}));
  CHECK(t.value(t.relu(t.constant(row({0.5})))) == row({0.5}));
}

TEST_CASE("concat keeps order") {
  Tape t;
  CHECK(t.value(t.concat(t.constant(row({1, 2})), t.constant(row({3})))) == row({1, 2, 3}));
  const Var parts[] = {t.constant(row({0.5, 0.5})), t.constant(row({0.1, 0.9}))};
  CHECK(t.value(t.concat(parts)) == row({0.5, 0.5, 0.1, 0.9}));
}

TEST_CASE("pool max and mean") {
  Tape t;
  const Var a = t.constant(row({1, 5}));
  const Var b = t.constant(row({3, 2}));
  const Var xs[] = {a, b};
  CHECK(t.value(t.pool(xs, PoolMode::Max)) == row({3, 5}));
  CHECK(t.value(t.pool(xs, PoolMode::Mean)) == row({2, 3.5}));
  const Var same[] = {t.constant(row({0.7, 0.7})), t.constant(row({0.7, 0.7}))};
  CHECK(t.value(t.pool(same, PoolMode::Max)) == row({0.7, 0.7}));
}

TEST_CASE("pool errors") {
  Tape t;
  CHECK_THROWS_AS(t.pool(std::span<const Var>{}, PoolMode::Max), gkr::UsageError);
  const Var ragged[] = {t.constant(row({1, 2})), t.constant(row({1, 2, 3}))};
  CHECK_THROWS_AS(t.pool(ragged, PoolMode::Mean), gkr::ShapeError);
}

TEST_CASE("max pool routes ties to the lowest index") {
  Tape t;
  const Matrix p0 = row({2.0}), p1 = row({2.0});
  const Var xs[] = {t.param(p0), t.param(p1)};
  t.backward(t.sum(t.pool(xs, PoolMode::Max)));
  CHECK(t.grad(p0)[0] == 1.0);
  CHECK(t.grad(p1)[0] == 0.0);
}

TEST_CASE("bce_with_logit values") {
  CHECK(gkr::bce_with_logit(0.0, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(gkr::bce_with_logit(0.0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const double tiny = gkr::bce_with_logit(50.0, 1);
  CHECK(std::isfinite(tiny));
  CHECK(tiny <= 1e-20);
  CHECK(std::isfinite(gkr::bce_with_logit(-50.0, 1)));
  CHECK(gkr::bce_with_logit(-50.0, 1) == doctest::Approx(50.0));
}

TEST_CASE("bce symmetry on a grid") {
  for (int z = -50; z <= 50; ++z) {
    CHECK(gkr::bce_with_logit(z, 1) == gkr::bce_with_logit(-z, 0));
    CHECK(gkr::bce_with_logit(z + 0.25, 1) == gkr::bce_with_logit(-(z + 0.25), 0));
  }
}

TEST_CASE("backward of summed linear with identity weight gives v") {
  Tape t;
  const Matrix W = Matrix::identity(3);
  const Matrix v = row({0.5, -2, 4});
  t.backward(t.sum(t.linear(W, t.constant(v))));
  const Matrix g = t.grad(W);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(g(i, j) == v[i]);
}

TEST_CASE("parameter the loss does not depend on has zero gradient") {
  Tape t;
  const Matrix used = row({1, 2}), unused = row({3, 4});
  t.param(unused);
  t.backward(t.sum(t.param(used)));
  CHECK(t.grad(unused) == Matrix(1, 2, 0.0));
  CHECK(t.grad(Matrix(1, 1)) == Matrix(1, 1, 0.0));
}

TEST_CASE("dead relu gives zero gradient") {
  Tape t;
  const Matrix W(2, 2, {1, 1, 1, 1});
  t.backward(t.sum(t.relu(t.linear(W, t.constant(row({-1, -2}))))));
  CHECK(t.grad(W) == Matrix(2, 2, 0.0));
}

TEST_CASE("backward rejects foreign and non-scalar losses") {
  Tape a, b;
  const Var x = a.constant(row({1}));
  CHECK_THROWS_AS(b.backward(x), gkr::UsageError);
  CHECK_THROWS_AS(a.backward(a.constant(row({1, 2}))), gkr::UsageError);
}

TEST_CASE("gradient accumulators are zeroed between backward passes") {
  Tape t;
  const Matrix w = row({2.0});
  const Var loss = t.mul(t.param(w), t.param(w));
  t.backward(loss);
  t.backward(loss);
  CHECK(t.grad(w)[0] == doctest::Approx(4.0));
}

TEST_CASE("division by zero is a domain error") {
  Tape t;
  CHECK_THROWS_AS(t.div(t.constant(row({1})), t.constant(row({0}))), gkr::DomainError);
}

TEST_CASE("property: primitive outputs stay finite for inputs up to 1e3") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Tape t;
    const Matrix W = testing::random_matrix(5, 4, rng, -1e3, 1e3);
    const Var x = t.constant(testing::random_matrix(3, 5, rng, -1e3, 1e3));
    const Var y = t.linear(W, x);
    const Var r = t.relu(y);
    const Var c = t.concat(y, r);
    const Var p = t.pool_rows(c, trial % 2 ? PoolMode::Max : PoolMode::Mean);
    for (Var v : {y, r, c, p})
      for (double e : t.value(v).values()) REQUIRE(std::isfinite(e));
  }
}

TEST_CASE("property: max pool dominates, mean pool lies within the range") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    Tape t;
    std::vector<Var> xs;
    std::vector<Matrix> ms;
    for (int k = 0; k < 1 + trial % 6; ++k) ms.push_back(testing::random_matrix(1, 4, rng, -10, 10));
    for (const auto& m : ms) xs.push_back(t.constant(m));
    const Matrix& mx = t.value(t.pool(xs, PoolMode::Max));
    const Matrix& mean = t.value(t.pool(xs, PoolMode::Mean));
    for (std::size_t i = 0; i < 4; ++i) {
      double lo = ms[0][i], hi = ms[0][i];
      for (const auto& m : ms) {
        CHECK(mx[i] >= m[i]);
        lo = std::min(lo, m[i]);
        hi = std::max(hi, m[i]);
      }
      CHECK(mean[i] >= lo);
      CHECK(mean[i] <= hi);
    }
  }
}

TEST_CASE("property: backward is linear in the loss") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> coef(-3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix W = testing::random_matrix(4, 3, rng);
    const Matrix x = testing::random_matrix(2, 4, rng);
    const double a = coef(rng), b = coef(rng);
    auto grad_of = [&](double ca, double cb) {
      Tape t;
      const Var h = t.relu(t.linear(W, t.constant(x)));
      const Var l1 = t.sum(t.mul(h, h));
      const Var l2 = t.sum(t.pool_rows(h, PoolMode::Max));
      t.backward(t.add(t.scale(l1, ca), t.scale(l2, cb)));
      return t.grad(W);
    };
    const Matrix g1 = grad_of(1, 0), g2 = grad_of(0, 1), g = grad_of(a, b);
    for (std::size_t i = 0; i < g.size(); ++i)
      CHECK(g[i] == doctest::Approx(a * g1[i] + b * g2[i]).epsilon(1e-12));
  }
}

TEST_CASE("adam: zero gradient leaves parameters and moments at zero change") {
  Matrix p(2, 2, {1, 2, 3, 4});
  const Matrix before = p;
  Matrix* params[] = {&p};
  const Matrix* cparams[] = {&p};
  gkr::AdamState adam(cparams, {});
  const Matrix g[] = {Matrix(2, 2, 0.0)};
  adam.step(params, g);
  CHECK(p == before);
  CHECK(adam.first_moments()[0] == Matrix(2, 2, 0.0));
  CHECK(adam.second_moments()[0] == Matrix(2, 2, 0.0));
  CHECK(adam.steps() == 1);
}

TEST_CASE("adam: first step moves each coordinate by about lr") {
  Matrix p(1, 3, {0, 0, 0});
  Matrix* params[] = {&p};
  const Matrix* cparams[] = {&p};
  gkr::AdamState adam(cparams, {.lr = 0.01});
  const Matrix g[] = {Matrix(1, 3, {0.5, -2.0, 1e-3})};
  adam.step(params, g);
  CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(p[2] == doctest::Approx(-0.01).epsilon(1e-4));
}

TEST_CASE("adam: second moment follows the scalar recurrence") {
  Matrix p(1, 1, 0.0);
  Matrix* params[] = {&p};
  const Matrix* cparams[] = {&p};
  gkr::AdamState adam(cparams, {});
  const double g = 0.3, b1 = 0.9, b2 = 0.999;
  const Matrix grads[] = {Matrix(1, 1, g)};
  adam.step(params, grads);
  adam.step(params, grads);
  // v2 = b2 (1 - b2) g^2 + (1 - b2) g^2 = g^2 (1 - b2^2)
  CHECK(adam.second_moments()[0][0] == doctest::Approx(g * g * (1 - b2 * b2)).epsilon(1e-14));
  CHECK(adam.first_moments()[0][0] == doctest::Approx(g * (1 - b1 * b1)).epsilon(1e-14));
  CHECK(adam.steps() == 2);
}

TEST_CASE("adam: shape mismatch") {
  Matrix p(2, 2);
  Matrix* params[] = {&p};
  const Matrix* cparams[] = {&p};
  gkr::AdamState adam(cparams, {});
  const Matrix wrong[] = {Matrix(2, 3)};
  CHECK_THROWS_AS(adam.step(params, wrong), gkr::ShapeError);
  CHECK_THROWS_AS(adam.step(params, std::span<const Matrix>{}), gkr::ShapeError);
}

TEST_CASE("grad_check: quadratic toy loss") {
  std::mt19937_64 rng(5);
  Matrix w = testing::random_matrix(3, 2, rng);
  const Matrix A = testing::random_matrix(1, 3, rng);
  const gkr::LossBuilder loss = [&](Tape& t) {
    const Var p = t.param(w);
    const Var z = t.linear(w, t.constant(A));
    return t.add(t.sum(t.mul(z, z)), t.scale(t.sum(t.mul(p, p)), 0.5));
  };
  Matrix* params[] = {&w};
  const auto r = gkr::grad_check(loss, params);
  CHECK(r.max_rel_error < 1e-8);
  CHECK(r.passed);
  CHECK(r.coordinates == 6);
}

TEST_CASE("grad_check: parameters sitting on a relu kink are shifted away") {
  // w = (1, -1) against x = (1, 1) puts the pre-activation exactly at 0.
  Matrix w(2, 1, {1, -1});
  const Matrix x = row({1, 1});
  const gkr::LossBuilder loss = [&](Tape& t) { return t.sum(t.relu(t.linear(w, t.constant(x)))); };
  Matrix* params[] = {&w};
  const auto r = gkr::grad_check(loss, params, {.seed = 3});
  CHECK(r.kink_shifts >= 1);
  CHECK(r.max_rel_error < 1e-5);
  CHECK(r.passed);
}

TEST_CASE("grad_check: non-deterministic forward is flagged") {
  Matrix w(1, 1, 1.0);
  int calls = 0;
  const gkr::LossBuilder loss = [&](Tape& t) {
    ++calls;
    return t.scale(t.sum(t.param(w)), 1.0 + 1e-9 * calls);
  };
  Matrix* params[] = {&w};
  CHECK_THROWS_AS(gkr::grad_check(loss, params), gkr::NumericError);
}
