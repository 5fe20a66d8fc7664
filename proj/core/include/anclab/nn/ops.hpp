#pragma once

#include <cstddef>
#include <span>

#include "anclab/dsp/rng.hpp"
#include "anclab/nn/tape.hpp"
#include "anclab/nn/tensor.hpp"

// Differentiable primitives. Every op records its backward closure on the
// tape when recording is on and at least one input requires grad. Shape
// errors name the op and the offending dimension.
namespace anclab::nn {

template <typename T> Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
// Scalar (shape {1}) sum of all elements.
template <typename T> Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x);
template <typename T> Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape);

template <typename T> Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x);

// x (..., in) * W(out, in)^T + b(out). `b` may be undefined.
template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);
// (R, K) x (K, N)
template <typename T> Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// x (B, Cin, L), weight (Cout, Cin, K), bias (Cout) -> (B, Cout, (L + 2p - K)/s + 1)
template <typename T>
Tensor<T> conv1d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding);

// Per-channel normalisation of x (B, C, L). Training mode normalises with
// batch statistics and updates the running buffers in place; eval mode uses
// the running buffers.
template <typename T>
Tensor<T> batch_norm1d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma,
                       const Tensor<T>& beta, Tensor<T>& running_mean, Tensor<T>& running_var,
                       bool training, double momentum, double eps);

// x (B, C, L) -> (B, C, (L - k)/s + 1); ties resolve to the first maximum.
template <typename T>
Tensor<T> max_pool1d(Tape<T>& tape, const Tensor<T>& x, std::size_t kernel, std::size_t stride);

// Inverted dropout; identity when !training or p == 0.
template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double p, bool training, dsp::Rng* rng);

// Normalises over the last axis.
template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, double eps);

// Softmax over the last axis.
template <typename T> Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& x);

// Scaled dot-product attention of q, k, v (B, S, D) split into `heads`
// heads, scores divided by sqrt(D / heads). Probabilities are recomputed in
// the backward pass instead of being stored.
template <typename T>
Tensor<T> attention(Tape<T>& tape, const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    std::size_t heads);

// (B, A, C) -> (B, C, A)
template <typename T> Tensor<T> transpose12(Tape<T>& tape, const Tensor<T>& x);

// x (B, S, D) + table[s, d]; `table` holds at least S * D values.
template <typename T>
Tensor<T> add_rows(Tape<T>& tape, const Tensor<T>& x, std::span<const T> table);

// Mean of a rank-3 tensor over axis 1 or 2.
template <typename T> Tensor<T> mean_axis(Tape<T>& tape, const Tensor<T>& x, std::size_t axis);
// (B, S, D) -> (B, D)
template <typename T> Tensor<T> max_axis1(Tape<T>& tape, const Tensor<T>& x);
template <typename T> Tensor<T> select_axis1(Tape<T>& tape, const Tensor<T>& x, std::size_t index);

// Row-wise causal FIR: y[b, n] = sum_{k <= min(n, N-1)} w[b, k] x[b, n - k]
// for w (B, N), x (B, T). Accumulates in double.
template <typename T> Tensor<T> causal_fir(Tape<T>& tape, const Tensor<T>& w, const Tensor<T>& x);

// Scalar (1 / (B T)) sum_{b,n} alpha[n] (d[b, n] - y[b, n])^2 for y, d (B, T)
// and |alpha| = T. Accumulates in double.
template <typename T>
Tensor<T> weighted_residual_loss(Tape<T>& tape, const Tensor<T>& y, const Tensor<T>& d,
                                 std::span<const double> alpha);

}  // namespace anclab::nn
