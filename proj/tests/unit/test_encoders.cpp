#include <Eigen/Dense>
#include <algorithm>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mmgan/encoders.hpp"
#include "mmgan/grad_check.hpp"
#include "oracles.hpp"

using namespace mmgan;
using namespace mmgan::enc;

namespace {
Vocabulary toy_vocab() { return Vocabulary({"a", "red", "blue", "circle", "square"}, 6); }

ArchConfig small_arch() {
  ArchConfig a;
  a.image_size = 16;
  a.d_text = 6;
  a.d_word = 5;
  a.text_hidden = 7;
  a.max_caption_len = 6;
  a.vocab_size = 7;
  a.enc_channels = {3, 4, 5};
  a.style_channels = {2, 3, 4};
  return a;
}

void dense_ref(const std::vector<double>& x, const nn::ParamSet& p, const std::string& pre,
               std::vector<double>& out) {
  const auto& k = p.at(pre + ".kernel");
  const auto& b = p.at(pre + ".bias");
  const std::size_t in = k.dim(0), o = k.dim(1);
  out.assign(o, 0.0);
  for (std::size_t j = 0; j < o; ++j) {
    double acc = b[j];
    for (std::size_t i = 0; i < in; ++i) acc += x[i] * k[i * o + j];
    out[j] = acc;
  }
}
}  // namespace

TEST_CASE("tokenize rules") {
  const auto v = toy_vocab();
  CHECK(v.size() == 7);
  CHECK(tokenize("A red circle", v) == TokenIds{2, 3, 5, 0, 0, 0});
  CHECK(tokenize("", v) == TokenIds(6, kPad));
  CHECK(tokenize("xyzzy blob", v) == TokenIds{kUnk, kUnk, 0, 0, 0, 0});
  CHECK(tokenize("a, RED! square.", v) == TokenIds{2, 3, 6, 0, 0, 0});
  CHECK(tokenize("a a a a a a a a a", v).size() == 6);
}

TEST_CASE("vocabulary file layout: line k holds id k+2") {
  const auto path = std::filesystem::temp_directory_path() / "mmgan_vocab_test.txt";
  toy_vocab().save(path);
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  CHECK(first == "a");
  const auto loaded = Vocabulary::load(path, 6);
  CHECK(loaded == toy_vocab());
  CHECK(loaded.id("circle") == 5);
  std::filesystem::remove(path);
}

TEST_CASE("encode_text: order invariance, empty caption, gradient") {
  const auto arch = small_arch();
  const auto params = init_params(text_encoder_spec(arch), 21);
  const auto v = toy_vocab();
  const auto e1 = encode_text(tokenize("a red circle", v), params, arch);
  const auto e2 = encode_text(tokenize("circle a red", v), params, arch);
  CHECK(e1.size() == arch.d_text);
  for (std::size_t i = 0; i < e1.size(); ++i) CHECK(e1[i] == doctest::Approx(e2[i]).epsilon(1e-14));

  // All-PAD input is the MLP image of the zero vector.
  const auto empty = encode_text(tokenize("", v), params, arch);
  std::vector<double> h, o;
  dense_ref(std::vector<double>(arch.d_word, 0.0), params, "T.fc1", h);
  for (auto& x : h) x = x > 0 ? x : 0.2 * x;
  dense_ref(h, params, "T.fc2", o);
  for (std::size_t i = 0; i < o.size(); ++i) CHECK(empty[i] == doctest::Approx(std::tanh(o[i])));

  const std::vector<TokenIds> batch{tokenize("a red circle", v), tokenize("blue square", v), tokenize("", v)};
  auto f = [&](Var table) {
    nn::Bound b(table.tape(), params, false);  // T.embed comes from `table`
    Var pooled = embedding_mean(table, batch);
    Var hid = leaky_relu(nn::dense(b, "T.fc1", pooled), 0.2);
    return sum(square(tanh(nn::dense(b, "T.fc2", hid))));
  };
  CHECK(grad_check(f, params.at("T.embed")) <= 1e-4);
  CHECK_THROWS_AS(encode_text(TokenIds{2, 99, 0, 0, 0, 0}, params, arch), std::out_of_range);
}

TEST_CASE("encode_image: shape contract, determinism, gradient") {
  const auto arch = small_arch();
  const auto params = init_params(image_encoder_spec(arch), 4);
  const auto img = oracle::random_tensor({3, 16, 16}, 8);
  const auto f1 = encode_image(img, params, arch);
  CHECK(f1.shape() == Shape{arch.d_text});
  CHECK(f1 == encode_image(img, params, arch));
  CHECK_THROWS_AS(encode_image(Tensor({3, 8, 8}), params, arch), ShapeError);
  CHECK_THROWS_AS(encode_image(Tensor({1, 16, 16}), params, arch), ShapeError);

  auto f = [&](Var x) {
    nn::Bound b(x.tape(), params, false);
    return sum(square(encode_image(b, x, arch)));
  };
  CHECK(grad_check(f, oracle::random_tensor({2, 3, 16, 16}, 9)) <= 1e-4);
}

TEST_CASE("style_features: tap contract and truncated-forward oracle") {
  ArchConfig arch;  // default (8,16,32) taps
  const auto params = init_params(style_net_spec(arch), 13);
  const auto zero = Tensor({3, 32, 32}, 0.0);
  const auto taps = style_features(zero, params, arch);
  REQUIRE(taps.size() == 3);
  CHECK(taps[0].dim(0) == 8);
  CHECK(taps[1].dim(0) == 16);
  CHECK(taps[2].dim(0) == 32);
  CHECK(taps == style_features(zero, params, arch));

  // Recompute the truncated network with the loop convolution.
  const auto img = oracle::random_tensor({3, 32, 32}, 14);
  const auto got = style_features(img, params, arch);
  Tensor h = img.reshaped({1, 3, 32, 32});
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& k = params.at("S.conv" + std::to_string(i) + ".kernel");
    const auto& b = params.at("S.conv" + std::to_string(i) + ".bias");
    std::size_t oh, ow;
    auto out = oracle::conv2d(h, k, i == 0 ? 1 : 2, 1, oh, ow);
    const std::size_t f = k.dim(0);
    for (std::size_t c = 0; c < f; ++c)
      for (std::size_t p = 0; p < oh * ow; ++p) {
        double& x = out[c * oh * ow + p];
        x += b[c];
        x = x > 0 ? x : 0.2 * x;
      }
    h = Tensor({1, f, oh, ow}, out);
    double worst = 0;
    for (std::size_t j = 0; j < out.size(); ++j) worst = std::max(worst, std::abs(out[j] - got[i][j]));
    CHECK(worst <= 1e-12);
  }

  ArchConfig single = arch;
  single.style_layers = {1};
  const auto one = style_features(img, init_params(style_net_spec(single), 13), single);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == got[1]);
}

TEST_CASE("gram_matrix examples") {
  const auto z = gram_matrix(Tensor({3, 2, 2}, 0.0));
  for (double v : z.values()) CHECK(v == 0.0);
  const auto g = gram_matrix(Tensor({2, 1, 1}, std::vector<double>{1, 2}));
  CHECK(g.data() == std::vector<double>{0.5, 1.0, 1.0, 2.0});

  const auto f = oracle::random_tensor({4, 3, 3}, 31);
  const auto got = gram_matrix(f);
  const auto ref = oracle::gram(f.data(), 4, 9);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(got[i] - ref[i]) <= 1e-12);
}

TEST_CASE("gram_matrix is symmetric PSD on 100 random maps") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t c = 1 + seed % 6, h = 1 + seed % 4, w = 1 + (seed / 4) % 5;
    const auto g = gram_matrix(oracle::random_tensor({c, h, w}, 1000 + seed, -3, 3));
    Eigen::MatrixXd m(c, c);
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t j = 0; j < c; ++j) m(i, j) = g[i * c + j];
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9);
  }
}
