#include <algorithm>
#include <cmath>

#include "mmgan/models.hpp"
#include "mmgan/ops.hpp"
#include "mmgan/trainer.hpp"

namespace mmgan::train {

namespace {
constexpr std::size_t kChunk = 64;

Eigen::MatrixXd rows_of(const Tensor& t) {
  const std::size_t n = t.dim(0), d = t.size() / n;
  Eigen::MatrixXd m(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = t[i * d + j];
  return m;
}

Eigen::MatrixXd stacked_features(const std::vector<Tensor>& images, const nn::ParamSet& fid_net,
                                 const ArchConfig& arch) {
  Eigen::MatrixXd out;
  for (std::size_t b = 0; b < images.size(); b += kChunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = b; i < std::min(images.size(), b + kChunk); ++i) idx.push_back(i);
    const auto f = metrics::fid_features(metrics::stack_images(images, idx), fid_net, arch);
    if (out.size() == 0) out.resize(static_cast<Eigen::Index>(images.size()), f.cols());
    out.middleRows(static_cast<Eigen::Index>(b), f.rows()) = f;
  }
  return out;
}
}  // namespace

Tensor style_vectors_for(const ModelBundle& bundle, const Tensor& references) {
  const auto& arch = bundle.config.arch;
  Tape tape;
  nn::Bound sb(tape, bundle.at(net::kStyleNet), false), hb(tape, bundle.at(net::kStyleHead), false);
  auto taps = enc::style_features(sb, tape.constant(references), arch);
  return models::style_vector(hb, models::gram_diagonals(taps), arch).value();
}

metrics::MetricsReport evaluate(const ModelBundle& bundle, const TrainingData& data, const EvalOptions& opt) {
  if (data.samples.size() < 2) throw std::invalid_argument("evaluate: dataset smaller than 2");
  if (opt.n_gen < 2) throw std::invalid_argument("evaluate: n_gen must be >= 2");
  const auto& arch = bundle.config.arch;
  const auto& pool = data.split.test.empty() ? data.split.train : data.split.test;
  Rng rng = substream(opt.seed, "eval");

  std::vector<std::size_t> src(opt.n_gen), refs(opt.n_gen);
  for (std::size_t k = 0; k < opt.n_gen; ++k) {
    src[k] = pool[k % pool.size()];
    refs[k] = data.pick_style_reference(data.samples[src[k]].style_id, src[k], rng);
  }

  std::vector<Tensor> generated;
  Eigen::MatrixXd img_feat, txt_feat, gram_rows;
  for (std::size_t b = 0; b < opt.n_gen; b += kChunk) {
    const std::size_t e = std::min(opt.n_gen, b + kChunk), n = e - b;
    std::vector<enc::TokenIds> tokens;
    for (std::size_t k = b; k < e; ++k) tokens.push_back(data.tokens[src[k]]);
    const std::span<const std::size_t> chunk_refs(refs.data() + b, n);
    Tape tape;
    nn::Bound gb(tape, bundle.at(net::kGenerator), false), hb(tape, bundle.at(net::kStyleHead), false);
    nn::Bound tb(tape, bundle.at(net::kText), false), ib(tape, bundle.at(net::kImage), false);
    nn::Bound sb(tape, bundle.at(net::kStyleNet), false);
    Var text = enc::encode_text(tb, tokens, arch);
    Var s = models::style_vector(hb, tape.constant(gather_rows(data.gram_diag, chunk_refs)), arch);
    Var img = models::generate(gb, tape.constant(models::sample_noise(n, arch.d_z, rng)), text, s, arch);
    const Tensor imgs = img.value();
    const std::size_t per = imgs.size() / n;
    for (std::size_t i = 0; i < n; ++i)
      generated.emplace_back(Shape{3, arch.image_size, arch.image_size},
                             std::vector<double>(imgs.data().begin() + static_cast<std::ptrdiff_t>(i * per),
                                                 imgs.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * per)));
    auto append = [&](Eigen::MatrixXd& dst, const Eigen::MatrixXd& rows) {
      if (dst.size() == 0) dst.resize(static_cast<Eigen::Index>(opt.n_gen), rows.cols());
      dst.middleRows(static_cast<Eigen::Index>(b), rows.rows()) = rows;
    };
    append(img_feat, rows_of(enc::encode_image(ib, img, arch).value()));
    append(txt_feat, rows_of(text.value()));
    append(gram_rows, metrics::gram_vectors(imgs, bundle.at(net::kStyleNet), arch));
  }

  metrics::MetricsReport r;
  std::vector<Tensor> real;
  for (const auto& s : data.samples) real.push_back(s.image);
  const auto& fnet = bundle.at(net::kFidNet);
  r.fid = metrics::fid(metrics::feature_stats(stacked_features(real, fnet, arch)),
                       metrics::feature_stats(stacked_features(generated, fnet, arch)));
  Eigen::MatrixXd probs;
  for (std::size_t b = 0; b < opt.n_gen; b += kChunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = b; i < std::min(opt.n_gen, b + kChunk); ++i) idx.push_back(i);
    const auto p = metrics::classifier_probs(metrics::stack_images(generated, idx), bundle.at(net::kClassifier), arch);
    if (probs.size() == 0) probs.resize(static_cast<Eigen::Index>(opt.n_gen), p.cols());
    probs.middleRows(static_cast<Eigen::Index>(b), p.rows()) = p;
  }
  r.is_mean = metrics::inception_score(probs);
  r.clip_consistency = metrics::consistency_score(img_feat, txt_feat);
  // Cyclic shift by one pairs every image with another sample's caption.
  Eigen::MatrixXd shifted(txt_feat.rows(), txt_feat.cols());
  for (Eigen::Index i = 0; i < txt_feat.rows(); ++i) shifted.row(i) = txt_feat.row((i + 1) % txt_feat.rows());
  r.clip_consistency_shuffled = metrics::consistency_score(img_feat, shifted);

  // Each generated image against its own style reference.
  std::map<std::size_t, std::pair<double, std::size_t>> by_group;
  double total = 0;
  std::vector<double> row, ref;
  for (std::size_t k = 0; k < opt.n_gen; ++k) {
    ref.clear();
    for (const auto& g : data.grams) {
      const std::size_t per = g.size() / g.dim(0);
      ref.insert(ref.end(), g.data().begin() + static_cast<std::ptrdiff_t>(refs[k] * per),
                 g.data().begin() + static_cast<std::ptrdiff_t>((refs[k] + 1) * per));
    }
    row.assign(gram_rows.row(static_cast<Eigen::Index>(k)).begin(), gram_rows.row(static_cast<Eigen::Index>(k)).end());
    const double c = metrics::cosine(row, ref);
    total += c;
    auto& acc = by_group[data.samples[refs[k]].style_id];
    acc.first += c;
    ++acc.second;
  }
  r.style_match = total / static_cast<double>(opt.n_gen);
  for (const auto& [g, acc] : by_group)
    r.style_match_by_group[data::style_name(g)] = acc.first / static_cast<double>(acc.second);
  r.sample_count = opt.n_gen;
  r.step = bundle.step;
  r.config_digest = bundle.config.digest();
  r.validate();
  return r;
}

}  // namespace mmgan::train
