#include <cmath>

#include "doctest.h"
#include "mmgan/grad_check.hpp"
#include "mmgan/ops.hpp"
#include "oracles.hpp"

using namespace mmgan;

namespace {
Tensor filled(Shape s, std::vector<double> v) { return Tensor(std::move(s), std::move(v)); }
std::vector<double> vec(Var v) { return v.value().data(); }
}  // namespace

TEST_CASE("tensor construction enforces extents") {
  CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>(3)), ShapeError);
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK_THROWS_AS(t.set_grad(std::vector<double>(5)), ShapeError);
  CHECK_THROWS_AS(t.reshaped({4}), ShapeError);
}

TEST_CASE("conv2d hand example and annihilator") {
  Tape tape;
  auto x = tape.constant(Tensor({1, 1, 2, 2}, 1.0));
  auto k = tape.constant(Tensor({1, 1, 2, 2}, 1.0));
  auto y = conv2d(x, k, 1, 0);
  CHECK(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.item() == 4.0);

  auto xr = tape.constant(oracle::random_tensor({2, 3, 6, 5}, 4));
  auto kz = tape.constant(Tensor({4, 3, 3, 3}, 0.0));
  for (double v : vec(conv2d(xr, kz, 2, 1))) CHECK(v == 0.0);
}

TEST_CASE("conv2d matches the quadruple-loop reference") {
  {
    Tape tape;
    auto xt = oracle::random_tensor({1, 2, 5, 5}, 11);
    auto kt = oracle::random_tensor({3, 2, 3, 3}, 12);
    auto y = conv2d(tape.constant(xt), tape.constant(kt), 1, 0);
    std::size_t oh, ow;
    auto ref = oracle::conv2d(xt, kt, 1, 0, oh, ow);
    REQUIRE(y.shape() == Shape{1, 3, oh, ow});
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(y.value()[i] - ref[i]) <= 1e-12);
  }
  // Sweep shapes up to 2x4x9x9 with assorted kernels, strides and padding.
  std::uint64_t seed = 100;
  for (std::size_t n : {1, 2})
    for (std::size_t c : {1, 3, 4})
      for (std::size_t hw : {3, 5, 9})
        for (std::size_t k : {1, 2, 3})
          for (std::size_t s : {1, 2})
            for (std::size_t p : {0, 1}) {
              if (k > hw + 2 * p) continue;
              Tape tape;
              auto xt = oracle::random_tensor({n, c, hw, hw}, ++seed);
              auto kt = oracle::random_tensor({2, c, k, k}, ++seed);
              auto y = conv2d(tape.constant(xt), tape.constant(kt), s, p);
              std::size_t oh, ow;
              auto ref = oracle::conv2d(xt, kt, s, p, oh, ow);
              REQUIRE(y.shape() == Shape{n, 2, oh, ow});
              double worst = 0;
              for (std::size_t i = 0; i < ref.size(); ++i)
                worst = std::max(worst, std::abs(y.value()[i] - ref[i]));
              CHECK(worst <= 1e-12);
            }
}

TEST_CASE("conv2d rejects channel mismatch with a shape diagnostic") {
  Tape tape;
  auto x = tape.constant(Tensor({1, 3, 4, 4}));
  auto k = tape.constant(Tensor({2, 2, 3, 3}));
  CHECK_THROWS_WITH_AS(conv2d(x, k, 1, 0), doctest::Contains("[1,3,4,4]"), ShapeError);
  CHECK_THROWS_AS(conv2d(x, tape.constant(Tensor({2, 3, 7, 7})), 1, 0), ShapeError);
  CHECK_THROWS_AS(conv2d(x, tape.constant(Tensor({2, 3, 3, 3})), 0, 0), std::invalid_argument);
}

TEST_CASE("conv_transpose2d scatter example, zeros, and mismatch") {
  Tape tape;
  auto y = conv_transpose2d(tape.constant(Tensor({1, 1, 1, 1}, 1.0)),
                            tape.constant(filled({1, 1, 2, 2}, {1, 2, 3, 4})), 1, 0);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  CHECK(vec(y) == std::vector<double>{1, 2, 3, 4});

  auto z = conv_transpose2d(tape.constant(Tensor({2, 3, 4, 4}, 0.0)),
                            tape.constant(oracle::random_tensor({3, 5, 4, 4}, 3)), 2, 1);
  CHECK(z.shape() == Shape{2, 5, 8, 8});
  for (double v : vec(z)) CHECK(v == 0.0);

  CHECK_THROWS_AS(conv_transpose2d(tape.constant(Tensor({1, 2, 2, 2})),
                                   tape.constant(Tensor({3, 1, 2, 2})), 1, 0),
                  ShapeError);
}

TEST_CASE("conv_transpose2d is the adjoint of conv2d") {
  std::uint64_t seed = 500;
  struct Case {
    std::size_t n, c, f, h, k, s, p;
  };
  for (Case cs : {Case{1, 1, 1, 4, 2, 1, 0}, Case{2, 3, 4, 8, 4, 2, 1}, Case{1, 2, 3, 7, 3, 1, 1},
                  Case{2, 4, 2, 16, 4, 2, 1}, Case{1, 3, 3, 9, 3, 2, 0}}) {
    // conv2d maps [n,f,h,h] -> [n,c,oh,oh] with kernel [c,f,k,k].
    Tape tape;
    auto xt = oracle::random_tensor({cs.n, cs.f, cs.h, cs.h}, ++seed);
    auto kt = oracle::random_tensor({cs.c, cs.f, cs.k, cs.k}, ++seed);
    auto cx = conv2d(tape.constant(xt), tape.constant(kt), cs.s, cs.p);
    auto yt = oracle::random_tensor(cx.shape(), ++seed);
    auto ty = conv_transpose2d(tape.constant(yt), tape.constant(kt), cs.s, cs.p);
    if (ty.shape() != xt.shape()) continue;  // non-invertible geometry; extents differ
    const double lhs = oracle::dot(cx.value().data(), yt.values());
    const double rhs = oracle::dot(xt.data(), ty.value().values());
    CHECK(std::abs(lhs - rhs) <= 1e-10);
  }
}

TEST_CASE("backward basics") {
  SUBCASE("sum gives ones") {
    Tape tape;
    auto x = tape.leaf(oracle::random_tensor({2, 3, 4}, 1).set_requires_grad(true));
    tape.backward(sum(x));
    for (double g : tape.grad(x)) CHECK(g == 1.0);
  }
  SUBCASE("sum of squares") {
    Tape tape;
    auto x = tape.leaf(filled({3}, {1, 2, 3}).set_requires_grad(true));
    tape.backward(sum(x * x));
    auto g = tape.grad(x);
    CHECK(std::vector<double>(g.begin(), g.end()) == std::vector<double>{2, 4, 6});
    CHECK(x.value().has_grad());
  }
  SUBCASE("errors") {
    Tape empty;
    CHECK_THROWS_AS(empty.backward(Var(&empty, 0)), std::logic_error);
    Tape tape;
    auto x = tape.leaf(Tensor({3}, 1.0).set_requires_grad(true));
    CHECK_THROWS_AS(tape.backward(x * x), ShapeError);
    auto r = sum(x);
    tape.backward(r);
    CHECK_THROWS_AS(tape.backward(r), std::logic_error);
    CHECK_THROWS_AS(sum(x), std::logic_error);
  }
  SUBCASE("unreachable leaf gets zeros") {
    Tape tape;
    auto a = tape.leaf(Tensor({2}, 1.0).set_requires_grad(true));
    auto b = tape.leaf(Tensor({2}, 1.0).set_requires_grad(true));
    tape.backward(sum(a));
    for (double g : tape.grad(b)) CHECK(g == 0.0);
  }
}

TEST_CASE("composite conv -> leaky_relu -> mean matches finite differences") {
  const auto kt = oracle::random_tensor({3, 2, 3, 3}, 77);
  const auto xt = oracle::random_tensor({2, 2, 6, 6}, 78);
  auto f_in = [&](Var x) { return mean(leaky_relu(conv2d(x, x.tape().constant(kt), 1, 1), 0.2)); };
  CHECK(grad_check(f_in, xt) <= 1e-4);
  auto f_k = [&](Var k) { return mean(leaky_relu(conv2d(k.tape().constant(xt), k, 2, 1), 0.2)); };
  CHECK(grad_check(f_k, kt) <= 1e-4);
}

TEST_CASE("grad_check contract") {
  CHECK(grad_check([](Var x) { return sum(x); }, oracle::random_tensor({4, 5}, 2), 1e-3) <= 1e-10);
  CHECK_THROWS_AS(grad_check([](Var x) { return x * x; }, Tensor({3}, 1.0)), ShapeError);
}

TEST_CASE("every differentiable op passes grad_check on 20 seeds") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    CAPTURE(seed);
    const auto a = oracle::random_tensor({2, 3}, seed * 31);
    const auto b = oracle::random_tensor({2, 3}, seed * 31 + 1);
    const auto w = oracle::random_tensor({3, 4}, seed * 31 + 2);
    auto c = [](Var x, const Tensor& t) { return x.tape().constant(t); };
    auto weight = [](Var y) {  // non-uniform output weighting exposes layout bugs
      Tensor wt(y.shape());
      for (std::size_t i = 0; i < wt.size(); ++i) wt[i] = std::sin(1.0 + 0.7 * double(i));
      return sum(y * y.tape().constant(wt));
    };
    CHECK(grad_check([&](Var x) { return weight(x + c(x, b)); }, a) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(c(x, b) - x); }, a) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(x * c(x, b)); }, a) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(2.5 * x + 1.0); }, a) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(matmul(x, c(x, w))); }, a) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(matmul(c(x, a), x)); }, w) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(leaky_relu(x, 0.2)); }, a) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(tanh(x)); }, a) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(sigmoid(3.0 * x)); }, a) <= 1e-4);
    CHECK(grad_check([&](Var x) { return mean(square(x)); }, a) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(sqrt(x)); }, oracle::random_tensor({2, 3}, seed, 0.2, 2.0)) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(log(x)); }, oracle::random_tensor({2, 3}, seed, 0.2, 2.0)) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(sum_axis(x, 1)); }, a) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(mean_axis(x, 0)); }, a) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(concat({x, c(x, b), x}, 1)); }, a) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(concat({c(x, b), x}, 0)); }, a) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(reshape(x, {3, 2})); }, a) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(broadcast_to(reshape(x, {2, 3, 1}), {4, 2, 3, 5})); }, a) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(bias_add(c(x, a), x, 1)); }, oracle::random_tensor({3}, seed)) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(log_softmax(x)); }, a) <= 1e-4);
    const auto img = oracle::random_tensor({2, 3, 4, 5}, seed * 7);
    CHECK(grad_check([&](Var x) { return weight(instance_norm(x)); }, img) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(gram(reshape(x, {2, 3, 20}))); }, img) <= 1e-4);
    const auto kc = oracle::random_tensor({2, 3, 3, 3}, seed * 7 + 4);
    CHECK(grad_check([&](Var x) { return weight(conv2d(x, c(x, kc), 2, 1)); }, img) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(conv2d(c(x, img), x, 1, 1)); }, kc) <= 1e-4);
    const auto k = oracle::random_tensor({3, 2, 4, 4}, seed * 7 + 1);
    const auto y = oracle::random_tensor({2, 3, 3, 3}, seed * 7 + 2);
    CHECK(grad_check([&](Var x) { return weight(conv_transpose2d(x, c(x, k), 2, 1)); }, y) <= 1e-4);
    CHECK(grad_check([&](Var x) { return weight(conv_transpose2d(c(x, y), x, 2, 1)); }, k) <= 1e-4);
    const auto table = oracle::random_tensor({5, 4}, seed * 7 + 3);
    const std::vector<std::vector<std::int64_t>> ids{{2, 3, 0, 0}, {4, 4, 1, 0}, {0, 0, 0, 0}};
    CHECK(grad_check([&](Var x) { return weight(embedding_mean(x, ids)); }, table) <= 1e-4);
  }
}

TEST_CASE("guarded log and sqrt stay finite") {
  Tape tape;
  auto x = tape.leaf(filled({3}, {0.0, -1.0, 1e-30}).set_requires_grad(true));
  auto l = log(x);
  auto s = sqrt(x);
  CHECK(l.value().all_finite());
  CHECK(s.value().all_finite());
  CHECK(l.value()[0] == doctest::Approx(std::log(1e-12)));
  tape.backward(sum(l + s));
  for (double g : tape.grad(x)) CHECK(std::isfinite(g));
}

TEST_CASE("broadcast, concat and embedding values") {
  Tape tape;
  auto v = tape.constant(filled({2, 1}, {1, 2}));
  CHECK(vec(broadcast_to(v, {2, 3})) == std::vector<double>{1, 1, 1, 2, 2, 2});
  CHECK(vec(broadcast_to(tape.constant(filled({3}, {1, 2, 3})), {2, 3})) ==
        std::vector<double>{1, 2, 3, 1, 2, 3});
  CHECK_THROWS_AS(broadcast_to(v, {3, 3}), ShapeError);
  auto a = tape.constant(filled({2, 1}, {1, 2}));
  auto b = tape.constant(filled({2, 2}, {3, 4, 5, 6}));
  CHECK(vec(concat({a, b}, 1)) == std::vector<double>{1, 3, 4, 2, 5, 6});
  auto table = tape.constant(filled({3, 2}, {9, 9, 1, 2, 3, 6}));
  CHECK(vec(embedding_mean(table, {{1, 2, 0}, {0, 0, 0}})) == std::vector<double>{2, 4, 0, 0});
  CHECK_THROWS_AS(embedding_mean(table, {{3}}), std::out_of_range);
}

TEST_CASE("backward is deterministic") {
  auto run = [] {
    Tape tape;
    auto x = tape.leaf(oracle::random_tensor({2, 3, 8, 8}, 9).set_requires_grad(true));
    auto k = tape.leaf(oracle::random_tensor({4, 3, 4, 4}, 10).set_requires_grad(true));
    auto y = instance_norm(conv2d(x, k, 2, 1));
    tape.backward(mean(tanh(y)));
    auto gx = tape.grad(x);
    auto gk = tape.grad(k);
    std::vector<double> out(gx.begin(), gx.end());
    out.insert(out.end(), gk.begin(), gk.end());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("corrupted backward is detected by grad_check") {
  const auto xt = oracle::random_tensor({2, 3}, 5);
  auto f = [](Var x) { return sum(tanh(x)); };
  CHECK(grad_check(f, xt) <= 1e-8);
  debug::corrupt_backward("tanh");
  const double err = grad_check(f, xt);
  debug::corrupt_backward("");
  CHECK(err > 1e-4);
}
