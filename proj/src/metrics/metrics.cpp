#include "mmgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mmgan/ops.hpp"
#include "mmgan/random.hpp"

namespace mmgan::metrics {

namespace {
constexpr double kSlope = 0.2;

Eigen::MatrixXd to_rows(const Tensor& t) {
  const std::size_t n = t.dim(0), d = t.size() / n;
  Eigen::MatrixXd m(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = t[i * d + j];
  return m;
}

std::span<const double> row_span(const Eigen::MatrixXd& m, std::size_t i, std::vector<double>& buf) {
  buf.resize(m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) buf[j] = m(i, j);
  return buf;
}
}  // namespace

GaussianStats feature_stats(const Eigen::MatrixXd& f) {
  if (f.rows() < 2) throw std::invalid_argument("feature_stats: need at least 2 samples, got " + std::to_string(f.rows()));
  GaussianStats s;
  s.mean = f.colwise().mean().transpose();
  const Eigen::MatrixXd centered = f.rowwise() - s.mean.transpose();
  s.cov = (centered.transpose() * centered) / static_cast<double>(f.rows() - 1);
  s.cov = (0.5 * (s.cov + s.cov.transpose())).eval();
  s.cov.diagonal().array() += kCovShrinkage;
  return s;
}

Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw ShapeError("sqrtm_psd: matrix must be square");
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw std::runtime_error("sqrtm_psd: eigendecomposition failed");
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double fid(const GaussianStats& a, const GaussianStats& b) {
  if (a.dim() != b.dim())
    throw ShapeError("fid: stats dims " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  const Eigen::MatrixXd ra = sqrtm_psd(a.cov);
  const Eigen::MatrixXd cross = sqrtm_psd(ra * b.cov * ra);
  const double v = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * cross.trace();
  return std::max(0.0, v);
}

double inception_score(const Eigen::MatrixXd& p) {
  if (p.rows() < 1 || p.cols() < 1) throw std::invalid_argument("inception_score: empty probability matrix");
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if ((p.row(i).array() < 0.0).any() || !p.row(i).allFinite())
      throw std::invalid_argument("inception_score: row " + std::to_string(i) + " has negative or non-finite entries");
    if (std::abs(p.row(i).sum() - 1.0) > 1e-6)
      throw std::invalid_argument("inception_score: row " + std::to_string(i) + " does not sum to 1");
  }
  const Eigen::RowVectorXd marginal = p.colwise().mean();
  double kl_sum = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index k = 0; k < p.cols(); ++k) {
      const double pk = p(i, k);
      if (pk > 0) kl_sum += pk * (std::log(std::max(pk, kProbFloor)) - std::log(std::max(marginal(k), kProbFloor)));
    }
  return std::exp(kl_sum / static_cast<double>(p.rows()));
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine: lengths differ");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

double consistency_score(const Eigen::MatrixXd& img, const Eigen::MatrixXd& txt) {
  if (img.rows() != txt.rows()) throw std::invalid_argument("consistency_score: pair counts differ");
  if (img.cols() != txt.cols()) throw ShapeError("consistency_score: feature dims differ");
  if (img.rows() == 0) throw std::invalid_argument("consistency_score: no pairs");
  std::vector<double> a, b;
  double s = 0;
  for (Eigen::Index i = 0; i < img.rows(); ++i) s += cosine(row_span(img, i, a), row_span(txt, i, b));
  return s / static_cast<double>(img.rows());
}

double consistency_score(const std::vector<Tensor>& images, const std::vector<enc::TokenIds>& captions,
                         const nn::ParamSet& image_encoder, const nn::ParamSet& text_encoder, const ArchConfig& arch) {
  if (images.size() != captions.size()) throw std::invalid_argument("consistency_score: pair counts differ");
  Tape tape;
  nn::Bound ib(tape, image_encoder, false), tb(tape, text_encoder, false);
  const Tensor fi = enc::encode_image(ib, tape.constant(stack_images(images)), arch).value();
  const Tensor ft = enc::encode_text(tb, captions, arch).value();
  return consistency_score(to_rows(fi), to_rows(ft));
}

std::vector<double> gram_vector(const Tensor& image, const nn::ParamSet& style_net, const ArchConfig& arch) {
  std::vector<double> out;
  for (const auto& f : enc::style_features(image, style_net, arch)) {
    const Tensor g = enc::gram_matrix(f);
    out.insert(out.end(), g.values().begin(), g.values().end());
  }
  return out;
}

Eigen::MatrixXd gram_vectors(const Tensor& images, const nn::ParamSet& style_net, const ArchConfig& arch) {
  enc::check_image_shape(images.shape(), arch, true);
  Tape tape;
  nn::Bound b(tape, style_net, false);
  const std::size_t n = images.dim(0);
  std::vector<Tensor> grams;
  std::size_t width = 0;
  for (Var t : enc::style_features(b, tape.constant(images), arch)) {
    grams.push_back(enc::gram_matrix(t).value());
    width += grams.back().size() / n;
  }
  Eigen::MatrixXd m(n, width);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t col = 0;
    for (const auto& g : grams) {
      const std::size_t per = g.size() / n;
      for (std::size_t j = 0; j < per; ++j) m(i, col++) = g[i * per + j];
    }
  }
  return m;
}

double style_match_score(const Eigen::MatrixXd& rows, std::span<const double> reference) {
  if (rows.rows() == 0) throw std::invalid_argument("style_match_score: no images");
  std::vector<double> buf;
  double s = 0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) s += cosine(row_span(rows, i, buf), reference);
  return s / static_cast<double>(rows.rows());
}

double style_match_score(const std::vector<Tensor>& images, const Tensor& style_image, const nn::ParamSet& style_net,
                         const ArchConfig& arch) {
  const auto ref = gram_vector(style_image, style_net, arch);
  return style_match_score(gram_vectors(stack_images(images), style_net, arch), ref);
}

nn::LayerSpec fid_net_spec(const ArchConfig& arch) {
  arch.validate();
  const auto& c = arch.fid_channels;
  nn::LayerSpec spec = nn::conv_spec("F.conv0", 3, c[0], 4);
  nn::append(spec, nn::conv_spec("F.conv1", c[0], c[1], 4));
  nn::append(spec, nn::conv_spec("F.conv2", c[1], c[2], 4));
  return spec;
}

Eigen::MatrixXd fid_features(const Tensor& images, const nn::ParamSet& fid_net, const ArchConfig& arch) {
  enc::check_image_shape(images.shape(), arch, true);
  Tape tape;
  nn::Bound b(tape, fid_net, false);
  Var h = tape.constant(images);
  for (const char* name : {"F.conv0", "F.conv1", "F.conv2"}) h = leaky_relu(nn::conv(b, name, h, 2, 1), kSlope);
  const Shape s = h.shape();
  return to_rows(mean_axis(reshape(h, {s[0], s[1], s[2] * s[3]}), 2).value());
}

nn::LayerSpec classifier_spec(const ArchConfig& arch) {
  arch.validate();
  const auto& c = arch.classifier_channels;
  const std::size_t q = arch.image_size / 4;
  nn::LayerSpec spec = nn::conv_spec("C.conv0", 3, c[0], 4);
  nn::append(spec, nn::conv_spec("C.conv1", c[0], c[1], 4));
  nn::append(spec, nn::dense_spec("C.fc", c[1] * q * q, arch.num_classes));
  return spec;
}

Var classifier_logits(const nn::Bound& p, Var images, const ArchConfig& arch) {
  enc::check_image_shape(images.shape(), arch, true);
  Var h = leaky_relu(nn::conv(p, "C.conv0", images, 2, 1), kSlope);
  h = leaky_relu(nn::conv(p, "C.conv1", h, 2, 1), kSlope);
  const Shape s = h.shape();
  return nn::dense(p, "C.fc", reshape(h, {s[0], s[1] * s[2] * s[3]}));
}

Eigen::MatrixXd classifier_probs(const Tensor& images, const nn::ParamSet& classifier, const ArchConfig& arch) {
  Tape tape;
  nn::Bound b(tape, classifier, false);
  Eigen::MatrixXd p = to_rows(log_softmax(classifier_logits(b, tape.constant(images), arch)).value());
  p = p.array().exp().matrix();
  for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) /= p.row(i).sum();
  return p;
}

nn::ParamSet train_classifier(const std::vector<Tensor>& images, const std::vector<std::size_t>& labels,
                              const ArchConfig& arch, const ClassifierTraining& cfg) {
  if (images.empty() || images.size() != labels.size())
    throw std::invalid_argument("train_classifier: need equally many images and labels");
  for (auto l : labels)
    if (l >= arch.num_classes) throw std::out_of_range("train_classifier: label " + std::to_string(l) + " out of range");
  nn::ParamSet params = nn::init_params(classifier_spec(arch), substream_seed(cfg.seed, "classifier.init"));
  nn::AdamConfig hyper;
  hyper.lr = cfg.lr;
  hyper.beta1 = 0.9;
  auto state = nn::make_adam_state(params, hyper);
  const std::size_t bs = std::min(cfg.batch_size, images.size());
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Rng rng = substream(cfg.seed, "classifier.batch", step);
    std::vector<std::size_t> idx(bs);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(images.size()));
    Tensor onehot({bs, arch.num_classes}, 0.0);
    for (std::size_t r = 0; r < bs; ++r) onehot[r * arch.num_classes + labels[idx[r]]] = 1.0;
    Tape tape;
    nn::Bound b(tape, params, true);
    Var lp = log_softmax(classifier_logits(b, tape.constant(stack_images(images, idx)), arch));
    Var loss = sum(lp * tape.constant(onehot)) * (-1.0 / static_cast<double>(bs));
    tape.backward(loss);
    nn::adam_step(params, b.grads(), state);
  }
  return params;
}

Tensor stack_images(const std::vector<Tensor>& images) {
  std::vector<std::size_t> all(images.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return stack_images(images, all);
}

Tensor stack_images(const std::vector<Tensor>& images, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("stack_images: no images");
  const Shape& s = images.at(indices[0]).shape();
  if (s.size() != 3) throw ShapeError("stack_images: expected [C,H,W] images, got " + shape_str(s));
  const std::size_t per = numel(s);
  std::vector<double> out;
  out.reserve(per * indices.size());
  for (auto i : indices) {
    const Tensor& t = images.at(i);
    if (t.shape() != s) throw ShapeError("stack_images: mixed image shapes");
    out.insert(out.end(), t.values().begin(), t.values().end());
  }
  return Tensor({indices.size(), s[0], s[1], s[2]}, std::move(out));
}

}  // namespace mmgan::metrics
