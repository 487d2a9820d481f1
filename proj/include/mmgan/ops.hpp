#pragma once

#include <cstdint>
#include <vector>

#include "mmgan/tensor.hpp"

// Differentiable operations over Tape-recorded values. Every op validates its
// shapes and throws ShapeError with both shapes in the message.
namespace mmgan {

inline constexpr double kLogFloor = 1e-12;

// Elementwise, identical shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_scalar(Var a, double s);
Var mul_scalar(Var a, double s);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return mul_scalar(a, s); }
inline Var operator*(Var a, double s) { return mul_scalar(a, s); }
inline Var operator+(Var a, double s) { return add_scalar(a, s); }
inline Var operator-(Var a) { return mul_scalar(a, -1.0); }

Var leaky_relu(Var a, double alpha);
Var tanh(Var a);
Var sigmoid(Var a);
Var square(Var a);
/// sqrt(max(a, 1e-12)); gradient is zero where the clamp is active.
Var sqrt(Var a);
/// log(max(a, 1e-12)); gradient is zero where the clamp is active.
Var log(Var a);

Var sum(Var a);
Var mean(Var a);
/// Reduces one axis away.
Var sum_axis(Var a, std::size_t axis);
Var mean_axis(Var a, std::size_t axis);

/// [M,K] x [K,N] -> [M,N]
Var matmul(Var a, Var b);
/// x[..., C] + b[C], or x[N, C, ...] + b[C] when channel_axis == 1.
Var bias_add(Var x, Var b, std::size_t channel_axis);

Var reshape(Var a, Shape shape);
/// Trailing-aligned broadcasting; size-1 axes (or missing leading axes)
/// expand to the target.
Var broadcast_to(Var a, Shape shape);
Var concat(const std::vector<Var>& parts, std::size_t axis);

/// Per-sample, per-channel normalization over the spatial axes of [N,C,H,W].
Var instance_norm(Var x, double eps = 1e-5);

/// Cross-correlation, NCHW input with [F,C,kh,kw] kernel.
Var conv2d(Var input, Var kernel, std::size_t stride, std::size_t padding);
/// Adjoint of conv2d in its input: [N,C,H,W] with [C,F,kh,kw] kernel gives
/// [N,F,(H-1)*stride-2*padding+kh, ...].
Var conv_transpose2d(Var input, Var kernel, std::size_t stride, std::size_t padding);

/// [N,C,L] -> [N,C,C], G[i][j] = sum_l x[i,l] x[j,l] / (C*L).
Var gram(Var x);

/// Row-wise log-softmax of [N,K].
Var log_softmax(Var x);

/// Mean of embedding rows per sequence, skipping id 0 (padding). A sequence
/// with no non-padding ids maps to the zero vector. table is [V,D]; result is
/// [N,D].
Var embedding_mean(Var table, const std::vector<std::vector<std::int64_t>>& ids);

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t padding);
std::size_t conv_transpose_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                                      std::size_t padding);

}  // namespace mmgan
