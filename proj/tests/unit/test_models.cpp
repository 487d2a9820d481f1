#include "doctest.h"
#include "mmgan/encoders.hpp"
#include "mmgan/grad_check.hpp"
#include "mmgan/models.hpp"
#include "oracles.hpp"

using namespace mmgan;
using namespace mmgan::models;

namespace {
ArchConfig tiny_arch() {
  ArchConfig a;
  a.image_size = 16;
  a.d_text = 5;
  a.d_z = 4;
  a.d_style = 3;
  a.g_channels = {6, 4, 3};
  a.d_channels = {3, 4, 5};
  return a;
}

double l2_diff(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}
}  // namespace

TEST_CASE("generate: shape, open tanh range, determinism") {
  ArchConfig arch;
  const auto g = init_params(generator_spec(arch), 1);
  Rng rng(2);
  Tape tape;
  nn::Bound b(tape, g, false);
  auto z = tape.constant(sample_noise(50, arch.d_z, rng));
  auto t = tape.constant(oracle::random_tensor({50, arch.d_text}, 3));
  auto s = tape.constant(oracle::random_tensor({50, arch.d_style}, 4));
  auto img = generate(b, z, t, s, arch);
  CHECK(img.shape() == Shape{50, 3, 32, 32});
  for (double v : img.value().values()) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
  const auto z1 = sample_noise(1, arch.d_z, rng).reshaped({arch.d_z});
  const auto t1 = oracle::random_tensor({arch.d_text}, 5);
  const auto s1 = oracle::random_tensor({arch.d_style}, 6);
  CHECK(generate(z1, t1, s1, g, arch) == generate(z1, t1, s1, g, arch));
}

TEST_CASE("generate: dimension mismatch is rejected") {
  ArchConfig arch;
  const auto g = init_params(generator_spec(arch), 1);
  CHECK_THROWS_AS(generate(Tensor({arch.d_z + 1}), Tensor({arch.d_text}), Tensor({arch.d_style}), g, arch),
                  ShapeError);
  CHECK_THROWS_AS(generate(Tensor({arch.d_z}), Tensor({arch.d_text}), Tensor({2}), g, arch), ShapeError);
}

TEST_CASE("generate: mean pixel gradient w.r.t. z matches finite differences") {
  ArchConfig arch;
  const auto g = init_params(generator_spec(arch), 8);
  const auto t = oracle::random_tensor({2, arch.d_text}, 9);
  const auto s = oracle::random_tensor({2, arch.d_style}, 10);
  Rng rng(11);
  auto f = [&](Var z) {
    nn::Bound b(z.tape(), g, false);
    return mean(generate(b, z, z.tape().constant(t), z.tape().constant(s), arch));
  };
  CHECK(grad_check(f, sample_noise(2, arch.d_z, rng)) <= 1e-4);
}

TEST_CASE("generate: style and text conditioning are active") {
  for (auto mode : {StyleInjection::kModulation, StyleInjection::kConcat}) {
    ArchConfig arch;
    arch.style_injection = mode;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto g = init_params(generator_spec(arch), 100 + seed);
      Rng rng(seed);
      const auto z = sample_noise(1, arch.d_z, rng).reshaped({arch.d_z});
      const auto t = oracle::random_tensor({arch.d_text}, 200 + seed);
      const auto t2 = oracle::random_tensor({arch.d_text}, 300 + seed);
      const auto s = oracle::random_tensor({arch.d_style}, 400 + seed);
      const auto s2 = oracle::random_tensor({arch.d_style}, 500 + seed);
      const auto base = generate(z, t, s, g, arch);
      CHECK(l2_diff(base, generate(z, t, s2, g, arch)) > 0.0);
      CHECK(l2_diff(base, generate(z, t2, s, g, arch)) > 0.0);
    }
  }
}

TEST_CASE("discriminate: probability range, determinism, input gradient") {
  ArchConfig arch;
  const auto d = init_params(discriminator_spec(arch), 3);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double p = discriminate(oracle::random_tensor({3, 32, 32}, seed), oracle::random_tensor({arch.d_text}, seed + 50),
                                  d, arch);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  const auto img = oracle::random_tensor({3, 32, 32}, 7);
  const auto txt = oracle::random_tensor({arch.d_text}, 8);
  CHECK(discriminate(img, txt, d, arch) == discriminate(img, txt, init_params(discriminator_spec(arch), 3), arch));
  CHECK_THROWS_AS(discriminate(Tensor({3, 16, 16}), txt, d, arch), ShapeError);
  CHECK_THROWS_AS(discriminate(img, Tensor({arch.d_text + 1}), d, arch), ShapeError);

  const auto small = tiny_arch();
  const auto ds = init_params(discriminator_spec(small), 4);
  const auto ts = oracle::random_tensor({2, small.d_text}, 12);
  auto f = [&](Var x) {
    nn::Bound b(x.tape(), ds, false);
    return sum(discriminate(b, x, x.tape().constant(ts), small));
  };
  CHECK(grad_check(f, oracle::random_tensor({2, 3, 16, 16}, 13)) <= 1e-4);
}

TEST_CASE("style head over scaled Gram diagonals") {
  ArchConfig arch;
  const auto s = init_params(enc::style_net_spec(arch), 1);
  const auto h = init_params(style_head_spec(arch), 2);
  const auto img = oracle::random_tensor({3, 32, 32}, 3);
  Tape tape;
  nn::Bound sb(tape, s, false), hb(tape, h, false);
  auto taps = enc::style_features(sb, tape.constant(img.reshaped({1, 3, 32, 32})), arch);
  auto diag = gram_diagonals(taps);
  CHECK(diag.shape() == Shape{1, 56});
  // Entries are C times the full Gram diagonals.
  std::size_t off = 0;
  for (Var t : taps) {
    const auto full = enc::gram_matrix(t).value();
    const std::size_t c = t.shape()[1];
    for (std::size_t i = 0; i < c; ++i) CHECK(diag.value()[off + i] == doctest::Approx(c * full[i * c + i]).epsilon(1e-13));
    off += c;
  }
  CHECK(style_vector(hb, diag, arch).shape() == Shape{1, arch.d_style});
}
