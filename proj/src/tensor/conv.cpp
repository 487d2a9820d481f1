#include <Eigen/Dense>
#include <memory>

#include "mmgan/ops.hpp"

namespace mmgan {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// Scratch storage that is fully written before it is read; no zero fill.
class Scratch {
 public:
  explicit Scratch(std::size_t n = 0) : p_(n ? new double[n] : nullptr) {}
  double* data() const { return p_.get(); }
  void release() { p_.reset(); }

 private:
  std::shared_ptr<double[]> p_;
};

// Window geometry of a cross-correlation from an image of channels x h x w to
// out_h x out_w positions.
struct Geometry {
  std::size_t batch, channels, h, w, kh, kw, stride, pad, out_h, out_w;
  std::size_t rows() const { return channels * kh * kw; }
  std::size_t cols() const { return batch * out_h * out_w; }
};

// col[(c*kh+i)*kw+j][(n*out_h+oy)*out_w+ox] = x[n,c,oy*s-p+i,ox*s-p+j] (0 outside).
void im2col(const double* x, const Geometry& g, double* col) {
  const std::size_t ncols = g.cols();
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* dst = col + ((c * g.kh + i) * g.kw + j) * ncols;
        for (std::size_t n = 0; n < g.batch; ++n) {
          const double* plane = x + (n * g.channels + c) * g.h * g.w;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad);
            double* row = dst + (n * g.out_h + oy) * g.out_w;
            if (iy < 0 || iy >= static_cast<long>(g.h)) {
              std::fill_n(row, g.out_w, 0.0);
              continue;
            }
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + j) - static_cast<long>(g.pad);
              row[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0
                                                                 : plane[iy * static_cast<long>(g.w) + ix];
            }
          }
        }
      }
}

// Adjoint of im2col: scatter-add columns back into the image.
void col2im(const double* col, const Geometry& g, double* x) {
  const std::size_t ncols = g.cols();
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* src = col + ((c * g.kh + i) * g.kw + j) * ncols;
        for (std::size_t n = 0; n < g.batch; ++n) {
          double* plane = x + (n * g.channels + c) * g.h * g.w;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            const double* row = src + (n * g.out_h + oy) * g.out_w;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + j) - static_cast<long>(g.pad);
              if (ix >= 0 && ix < static_cast<long>(g.w)) plane[iy * static_cast<long>(g.w) + ix] += row[ox];
            }
          }
        }
      }
}

// [N, F, P] <-> [F, N*P]
void nfp_to_fnp(const double* src, std::size_t n, std::size_t f, std::size_t p, double* dst) {
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t c = 0; c < f; ++c)
      std::copy_n(src + (b * f + c) * p, p, dst + c * n * p + b * p);
}

void fnp_to_nfp(const double* src, std::size_t n, std::size_t f, std::size_t p, double* dst,
                bool accumulate) {
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t c = 0; c < f; ++c) {
      const double* s = src + c * n * p + b * p;
      double* d = dst + (b * f + c) * p;
      if (accumulate)
        for (std::size_t i = 0; i < p; ++i) d[i] += s[i];
      else
        std::copy_n(s, p, d);
    }
}

void check_conv_args(const char* op, Var input, Var kernel, std::size_t stride) {
  if (input.shape().size() != 4 || kernel.shape().size() != 4)
    throw ShapeError(std::string(op) + ": expected rank-4 input and kernel, got " +
                     shape_str(input.shape()) + " and " + shape_str(kernel.shape()));
  if (stride == 0) throw std::invalid_argument(std::string(op) + ": stride must be >= 1");
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t padding) {
  if (stride == 0) throw std::invalid_argument("stride must be >= 1");
  if (k > in + 2 * padding)
    throw ShapeError("kernel extent " + std::to_string(k) + " exceeds padded input " +
                     std::to_string(in + 2 * padding));
  return (in + 2 * padding - k) / stride + 1;
}

std::size_t conv_transpose_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                                      std::size_t padding) {
  if (stride == 0) throw std::invalid_argument("stride must be >= 1");
  const long out = static_cast<long>((in - 1) * stride + k) - 2 * static_cast<long>(padding);
  if (out <= 0) throw ShapeError("conv_transpose2d: non-positive output extent");
  return static_cast<std::size_t>(out);
}

Var conv2d(Var input, Var kernel, std::size_t stride, std::size_t padding) {
  check_conv_args("conv2d", input, kernel, stride);
  const Shape& xs = input.shape();
  const Shape& ks = kernel.shape();
  if (xs[1] != ks[1])
    throw ShapeError("conv2d: input channels " + shape_str(xs) + " do not match kernel " +
                     shape_str(ks));
  Geometry g{xs[0], xs[1], xs[2], xs[3], ks[2], ks[3], stride, padding, 0, 0};
  g.out_h = conv_out_extent(g.h, g.kh, stride, padding);
  g.out_w = conv_out_extent(g.w, g.kw, stride, padding);
  const std::size_t f = ks[0], p = g.out_h * g.out_w;

  Scratch col(g.rows() * g.cols());
  im2col(input.value().data().data(), g, col.data());
  const Scratch prod(f * g.cols());
  MatMap(prod.data(), f, g.cols()).noalias() =
      ConstMatMap(kernel.value().data().data(), f, g.rows()) * ConstMatMap(col.data(), g.rows(), g.cols());
  std::vector<double> out(g.batch * f * p);
  fnp_to_nfp(prod.data(), g.batch, f, p, out.data(), false);

  BackwardFn fn;
  if (any_requires_grad({input, kernel})) {
    if (!kernel.requires_grad()) col.release();
    fn = [kernel, g, f, p, col](const BackwardArgs& args) {
      const Scratch gm(f * g.cols());
      nfp_to_fnp(args.grad_out.data(), g.batch, f, p, gm.data());
      ConstMatMap gmat(gm.data(), f, g.cols());
      if (double* gk = args.inputs[1])
        MatMap(gk, f, g.rows()).noalias() += gmat * ConstMatMap(col.data(), g.rows(), g.cols()).transpose();
      if (double* gx = args.inputs[0]) {
        const Scratch dcol(g.rows() * g.cols());
        MatMap(dcol.data(), g.rows(), g.cols()).noalias() =
            ConstMatMap(kernel.value().data().data(), f, g.rows()).transpose() * gmat;
        col2im(dcol.data(), g, gx);
      }
    };
  }
  return input.tape().record(Tensor({g.batch, f, g.out_h, g.out_w}, std::move(out)), {input, kernel},
                             std::move(fn), "conv2d");
}

Var conv_transpose2d(Var input, Var kernel, std::size_t stride, std::size_t padding) {
  check_conv_args("conv_transpose2d", input, kernel, stride);
  const Shape& ys = input.shape();
  const Shape& ks = kernel.shape();
  if (ys[1] != ks[0])
    throw ShapeError("conv_transpose2d: input channels " + shape_str(ys) + " do not match kernel " +
                     shape_str(ks));
  const std::size_t c = ys[1], f = ks[1];
  const std::size_t out_h = conv_transpose_out_extent(ys[2], ks[2], stride, padding);
  const std::size_t out_w = conv_transpose_out_extent(ys[3], ks[3], stride, padding);
  // The forward conv this op is the adjoint of maps [N,F,out_h,out_w] to [N,C,H,W].
  Geometry g{ys[0], f, out_h, out_w, ks[2], ks[3], stride, padding, ys[2], ys[3]};
  if (conv_out_extent(out_h, g.kh, stride, padding) != ys[2] ||
      conv_out_extent(out_w, g.kw, stride, padding) != ys[3])
    throw ShapeError("conv_transpose2d: geometry is not invertible for " + shape_str(ys));
  const std::size_t p = ys[2] * ys[3];

  Scratch ym(c * g.cols());
  nfp_to_fnp(input.value().data().data(), g.batch, c, p, ym.data());
  const Scratch col(g.rows() * g.cols());
  MatMap(col.data(), g.rows(), g.cols()).noalias() =
      ConstMatMap(kernel.value().data().data(), c, g.rows()).transpose() *
      ConstMatMap(ym.data(), c, g.cols());
  std::vector<double> out(g.batch * f * out_h * out_w, 0.0);
  col2im(col.data(), g, out.data());

  BackwardFn fn;
  if (any_requires_grad({input, kernel})) {
    if (!kernel.requires_grad()) ym.release();
    fn = [kernel, g, c, p, ym](const BackwardArgs& args) {
      const Scratch gcol(g.rows() * g.cols());
      im2col(args.grad_out.data(), g, gcol.data());
      ConstMatMap gc(gcol.data(), g.rows(), g.cols());
      if (double* gk = args.inputs[1])
        MatMap(gk, c, g.rows()).noalias() += ConstMatMap(ym.data(), c, g.cols()) * gc.transpose();
      if (double* gy = args.inputs[0]) {
        const Scratch dy(c * g.cols());
        MatMap(dy.data(), c, g.cols()).noalias() = ConstMatMap(kernel.value().data().data(), c, g.rows()) * gc;
        fnp_to_nfp(dy.data(), g.batch, c, p, gy, true);
      }
    };
  }
  return input.tape().record(Tensor({g.batch, f, out_h, out_w}, std::move(out)), {input, kernel},
                             std::move(fn), "conv_transpose2d");
}

}  // namespace mmgan
