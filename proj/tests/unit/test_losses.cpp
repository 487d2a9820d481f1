#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mmgan/encoders.hpp"
#include "mmgan/grad_check.hpp"
#include "mmgan/losses.hpp"
#include "mmgan/models.hpp"
#include "mmgan/ops.hpp"
#include "oracles.hpp"

using namespace mmgan;
using namespace mmgan::loss;

namespace {
ArchConfig small_arch() {
  ArchConfig a;
  a.image_size = 16;
  a.d_text = 5;
  a.d_z = 4;
  a.d_style = 3;
  a.g_channels = {6, 4, 3};
  a.d_channels = {3, 4, 5};
  a.enc_channels = {3, 4, 5};
  a.style_channels = {2, 3, 4};
  a.style_head_hidden = 5;
  return a;
}

std::vector<double> probs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> p(n);
  for (auto& v : p) v = rng.uniform(0.01, 0.99);
  return p;
}

double log_mean(const std::vector<double>& p, bool complement) {
  double s = 0;
  for (double v : p) s += std::log(complement ? 1.0 - v : v);
  return s / static_cast<double>(p.size());
}
}  // namespace

TEST_CASE("adversarial plug-in values") {
  const std::vector<double> half(7, 0.5);
  CHECK(std::abs(adversarial_value(half, half) + 2 * std::numbers::ln2) <= 1e-12);
  CHECK(std::abs(discriminator_loss(half, half) - 2 * std::numbers::ln2) <= 1e-12);
  CHECK(std::abs(generator_loss(half) - std::numbers::ln2) <= 1e-12);
  CHECK(std::abs(generator_loss(half, GanObjective::kMinimax) + std::numbers::ln2) <= 1e-12);

  const std::vector<double> hi(4, 1 - 1e-12), lo(4, 1e-12);
  CHECK(std::abs(adversarial_value(hi, lo)) <= 1e-9);
  CHECK(generator_loss(hi) <= 1e-9);
  // Saturated probabilities stay finite.
  const std::vector<double> one(3, 1.0), zero(3, 0.0);
  CHECK(std::isfinite(adversarial_value(zero, one)));
  CHECK(std::isfinite(generator_loss(zero)));

  CHECK_THROWS_AS(adversarial_value(std::vector<double>{}, half), std::invalid_argument);
  CHECK_THROWS_AS(generator_loss(std::vector<double>{}), std::invalid_argument);
  CHECK(gan_objective_from_string(to_string(GanObjective::kMinimax)) == GanObjective::kMinimax);
  CHECK_THROWS(gan_objective_from_string("hinge"));
}

TEST_CASE("adversarial losses equal a scalar loop") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = probs(3 + seed % 9, seed), f = probs(2 + seed % 5, seed + 100);
    const double v = log_mean(r, false) + log_mean(f, true);
    CHECK(std::abs(adversarial_value(r, f) - v) <= 1e-12);
    CHECK(std::abs(discriminator_loss(r, f) + v) <= 1e-12);
    CHECK(std::abs(generator_loss(f) + log_mean(f, false)) <= 1e-12);
    CHECK(discriminator_loss(r, f) >= 0.0);
    CHECK(generator_loss(f) >= 0.0);
  }
}

TEST_CASE("generator loss gradient through D(G) w.r.t. generator parameters") {
  const auto arch = small_arch();
  const auto g = init_params(models::generator_spec(arch), 1);
  const auto d = init_params(models::discriminator_spec(arch), 2);
  Rng rng(3);
  const auto z = models::sample_noise(2, arch.d_z, rng);
  const auto t = oracle::random_tensor({2, arch.d_text}, 4);
  const auto s = oracle::random_tensor({2, arch.d_style}, 5);
  for (const char* path : {"G.fc.kernel", "G.mod1.gamma.kernel", "G.out.kernel"}) {
    for (auto obj : {GanObjective::kNonSaturating, GanObjective::kMinimax}) {
      auto f = [&](Var w) {
        Tape& tape = w.tape();
        nn::Bound gb(tape, g, false), db(tape, d, false);
        gb.rebind(path, w);
        Var text = tape.constant(t);
        Var img = models::generate(gb, tape.constant(z), text, tape.constant(s), arch);
        return generator_loss(models::discriminate(db, img, text, arch), obj);
      };
      CHECK(grad_check(f, g.at(path)) <= 1e-4);
    }
  }
}

TEST_CASE("text-image consistency loss") {
  CHECK(text_image_consistency_loss(Tensor({3, 16, 16}, 0.1), Tensor({5}), init_params(enc::image_encoder_spec(small_arch()), 1),
                                    small_arch()) >= 0.0);
  Tape tape;
  auto a = tape.constant(Tensor({1, 2}, std::vector<double>{1, 0}));
  auto b = tape.constant(Tensor({1, 2}, std::vector<double>{0, 1}));
  CHECK(text_image_consistency_loss(a, b).item() == 2.0);
  CHECK(text_image_consistency_loss(a, a).item() == 0.0);
  CHECK_THROWS_AS(text_image_consistency_loss(a, tape.constant(Tensor({1, 3}))), ShapeError);

  const auto arch = small_arch();
  const auto enc_p = init_params(enc::image_encoder_spec(arch), 6);
  const auto img = oracle::random_tensor({3, 16, 16}, 7);
  const auto feat = enc::encode_image(img, enc_p, arch);
  CHECK(text_image_consistency_loss(img, feat, enc_p, arch) == 0.0);
  CHECK_THROWS_AS(text_image_consistency_loss(img, Tensor({arch.d_text + 1}), enc_p, arch), ShapeError);

  const auto txt = oracle::random_tensor({2, arch.d_text}, 8);
  auto f = [&](Var x) {
    nn::Bound b(x.tape(), enc_p, false);
    return text_image_consistency_loss(enc::encode_image(b, x, arch), x.tape().constant(txt));
  };
  CHECK(grad_check(f, oracle::random_tensor({2, 3, 16, 16}, 9)) <= 1e-4);
}

TEST_CASE("style matching loss") {
  const auto arch = small_arch();
  const auto sp = init_params(enc::style_net_spec(arch), 10);
  const auto x = oracle::random_tensor({3, 16, 16}, 11), y = oracle::random_tensor({3, 16, 16}, 12);
  CHECK(style_matching_loss(x, x, sp, arch) == 0.0);
  const double xy = style_matching_loss(x, y, sp, arch);
  CHECK(xy > 0.0);
  CHECK(std::abs(xy - style_matching_loss(y, x, sp, arch)) <= 1e-15);

  // Batched tape form agrees with the per-sample form.
  {
    Tape tape;
    nn::Bound b(tape, sp, false);
    auto tx = enc::style_features(b, tape.constant(x.reshaped({1, 3, 16, 16})), arch);
    auto ty = enc::style_features(b, tape.constant(y.reshaped({1, 3, 16, 16})), arch);
    CHECK(std::abs(style_matching_loss(tx, ty).item() - xy) <= 1e-14);
  }

  auto f = [&](Var img) {
    Tape& tape = img.tape();
    nn::Bound b(tape, sp, false);
    auto ref = enc::style_features(b, tape.constant(oracle::random_tensor({2, 3, 16, 16}, 13)), arch);
    return style_matching_loss(enc::style_features(b, img, arch), ref);
  };
  CHECK(grad_check(f, oracle::random_tensor({2, 3, 16, 16}, 14)) <= 1e-4);
}

TEST_CASE("style matching loss on one layer reduces to a single Gram difference") {
  // Two-channel toy maps.
  const auto a = oracle::random_tensor({1, 2, 3, 3}, 20), b = oracle::random_tensor({1, 2, 3, 3}, 21);
  const auto ga = oracle::gram(a.data(), 2, 9), gb = oracle::gram(b.data(), 2, 9);
  double ref = 0;
  for (std::size_t i = 0; i < 4; ++i) ref += (ga[i] - gb[i]) * (ga[i] - gb[i]);
  Tape tape;
  CHECK(std::abs(style_matching_loss({tape.constant(a)}, {tape.constant(b)}).item() - ref) <= 1e-10);

  // Through the style network with a single tap.
  auto arch = small_arch();
  arch.style_layers = {1};
  const auto sp = init_params(enc::style_net_spec(arch), 22);
  const auto x = oracle::random_tensor({3, 16, 16}, 23), y = oracle::random_tensor({3, 16, 16}, 24);
  const auto fx = enc::style_features(x, sp, arch), fy = enc::style_features(y, sp, arch);
  const std::size_t c = fx[0].dim(0), hw = fx[0].dim(1) * fx[0].dim(2);
  const auto hx = oracle::gram(fx[0].data(), c, hw), hy = oracle::gram(fy[0].data(), c, hw);
  double single = 0;
  for (std::size_t i = 0; i < hx.size(); ++i) single += (hx[i] - hy[i]) * (hx[i] - hy[i]);
  CHECK(std::abs(style_matching_loss(x, y, sp, arch) - single) <= 1e-10);
}

TEST_CASE("total loss and weights") {
  CHECK(total_loss(0.2, 0.3, 0.1, {1, 10, 10}) == doctest::Approx(4.2).epsilon(1e-15));
  CHECK(total_loss(0.7, 0.3, 0.1, {1, 0, 0}) == 0.7);
  CHECK(total_loss(0, 0, 0, {}) == 0.0);
  CHECK_THROWS_AS(total_loss(1, 1, 1, {-1, 1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(total_loss(1, 1, 1, {0, 0, 0}), std::invalid_argument);
  const LossBreakdown lb(0.2, 0.3, 0.1, {1, 10, 10}, 1.1, 0.6);
  CHECK(std::abs(lb.l_total - 4.2) <= 1e-9);
  CHECK(lb.d_loss == 1.1);
  CHECK_THROWS_AS(LossBreakdown(NAN, 0, 0, {}), std::domain_error);
}

TEST_CASE("weight scaling scales the total and preserves the argmin") {
  Rng rng(30);
  for (int trial = 0; trial < 50; ++trial) {
    const LossWeights w{rng.uniform(0, 2), rng.uniform(0, 20), rng.uniform(0, 20)};
    const double c = rng.uniform(0.1, 100);
    std::size_t best = 0, best_scaled = 0;
    double lo = INFINITY, lo_scaled = INFINITY;
    for (std::size_t k = 0; k < 5; ++k) {
      const double g = rng.uniform(-3, 3), t = rng.uniform(0, 2), s = rng.uniform(0, 2);
      const double v = total_loss(g, t, s, w), vs = total_loss(g, t, s, w.scaled(c));
      CHECK(std::abs(vs - c * v) <= 1e-12 * std::max(1.0, std::abs(c * v)));
      if (v < lo) lo = v, best = k;
      if (vs < lo_scaled) lo_scaled = vs, best_scaled = k;
    }
    CHECK(best == best_scaled);
  }
}
