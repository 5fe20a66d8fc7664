#include "anclab/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "anclab/error.hpp"
#include "anclab/parallel.hpp"

namespace anclab::nn {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

using Index = Eigen::Index;

[[noreturn]] void shape_error(const std::string& op, const std::string& detail) {
  throw Error("shape mismatch in " + op + ": " + detail);
}

void expect_rank(const std::string& op, const std::string& arg, const Shape& shape,
                 std::size_t rank) {
  if (shape.size() != rank) {
    shape_error(op, arg + " rank " + std::to_string(shape.size()) + " (shape " + to_string(shape) +
                        "), expected " + std::to_string(rank));
  }
}

void expect_dim(const std::string& op, const std::string& what, std::size_t got,
                std::size_t expected) {
  if (got != expected) {
    shape_error(op, what + " is " + std::to_string(got) + ", expected " + std::to_string(expected));
  }
}

template <typename T>
bool wants_grad(const Tape<T>& tape, std::initializer_list<const Tensor<T>*> inputs) {
  if (!tape.recording()) return false;
  for (const Tensor<T>* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
bool has_grad(const Tensor<T>& t) {
  return t.defined() && t.requires_grad();
}

}  // namespace

// ---------------------------------------------------------------- elementwise

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_error("add", to_string(a.shape()) + " vs " + to_string(b.shape()));
  const bool rg = wants_grad(tape, {&a, &b});
  Tensor<T> out(a.shape(), rg);
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  if (rg) {
    tape.record([a, b, out]() mutable {
      auto g = out.grad();
      if (has_grad(a)) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (has_grad(b)) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_error("mul", to_string(a.shape()) + " vs " + to_string(b.shape()));
  const bool rg = wants_grad(tape, {&a, &b});
  Tensor<T> out(a.shape(), rg);
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  if (rg) {
    tape.record([a, b, out]() mutable {
      auto g = out.grad();
      if (has_grad(a)) {
        auto ga = a.grad();
        auto bv = b.values();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
      }
      if (has_grad(b)) {
        auto gb = b.grad();
        auto av = a.values();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  const bool rg = wants_grad(tape, {&x});
  double acc = 0.0;
  for (T v : x.values()) acc += static_cast<double>(v);
  Tensor<T> out(Shape{1}, std::vector<T>{static_cast<T>(acc)}, rg);
  if (rg) {
    tape.record([x, out]() mutable {
      const T g = out.grad()[0];
      for (T& gx : x.grad()) gx += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.size()) {
    shape_error("reshape", to_string(x.shape()) + " -> " + to_string(shape));
  }
  const bool rg = wants_grad(tape, {&x});
  Tensor<T> out(std::move(shape), std::vector<T>(x.values().begin(), x.values().end()), rg);
  if (rg) {
    tape.record([x, out]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
  const bool rg = wants_grad(tape, {&x});
  Tensor<T> out(x.shape(), rg);
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] > T(0) ? xv[i] : T(0);
  if (rg) {
    tape.record([x, out]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      auto xv = x.values();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (xv[i] > T(0)) gx[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x) {
  const bool rg = wants_grad(tape, {&x});
  Tensor<T> out(x.shape(), rg);
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = T(1) / (T(1) + std::exp(-xv[i]));
  if (rg) {
    tape.record([x, out]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      auto ov = out.values();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * ov[i] * (T(1) - ov[i]);
    });
  }
  return out;
}

// --------------------------------------------------------------- dense layers

template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias) {
  expect_rank("linear", "weight", weight.shape(), 2);
  if (x.rank() == 0) shape_error("linear", "input has rank 0");
  const std::size_t out_f = weight.dim(0);
  const std::size_t in_f = weight.dim(1);
  expect_dim("linear", "input feature dimension", x.shape().back(), in_f);
  if (bias.defined()) expect_dim("linear", "bias length", bias.size(), out_f);
  const std::size_t rows = x.size() / in_f;

  Shape out_shape = x.shape();
  out_shape.back() = out_f;
  const bool rg = wants_grad(tape, {&x, &weight, &bias});
  Tensor<T> out(out_shape, rg);

  const auto r = static_cast<Index>(rows);
  const auto ni = static_cast<Index>(in_f);
  const auto no = static_cast<Index>(out_f);
  MatMap<T> y(out.data(), r, no);
  y.noalias() = ConstMatMap<T>(x.data(), r, ni) * ConstMatMap<T>(weight.data(), no, ni).transpose();
  if (bias.defined()) {
    const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bv(bias.data(), no);
    y.rowwise() += bv;
  }

  if (rg) {
    tape.record([x, weight, bias, out, r, ni, no]() mutable {
      ConstMatMap<T> gy(out.grad().data(), r, no);
      if (has_grad(x)) {
        MatMap<T>(x.grad().data(), r, ni).noalias() += gy * ConstMatMap<T>(weight.data(), no, ni);
      }
      if (has_grad(weight)) {
        MatMap<T>(weight.grad().data(), no, ni).noalias() +=
            gy.transpose() * ConstMatMap<T>(x.data(), r, ni);
      }
      if (has_grad(bias)) {
        Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.grad().data(), no) +=
            gy.colwise().sum();
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  expect_rank("matmul", "lhs", a.shape(), 2);
  expect_rank("matmul", "rhs", b.shape(), 2);
  expect_dim("matmul", "inner dimension", b.dim(0), a.dim(1));
  const auto r = static_cast<Index>(a.dim(0));
  const auto k = static_cast<Index>(a.dim(1));
  const auto n = static_cast<Index>(b.dim(1));
  const bool rg = wants_grad(tape, {&a, &b});
  Tensor<T> out(Shape{a.dim(0), b.dim(1)}, rg);
  MatMap<T>(out.data(), r, n).noalias() =
      ConstMatMap<T>(a.data(), r, k) * ConstMatMap<T>(b.data(), k, n);
  if (rg) {
    tape.record([a, b, out, r, k, n]() mutable {
      ConstMatMap<T> g(out.grad().data(), r, n);
      if (has_grad(a)) {
        MatMap<T>(a.grad().data(), r, k).noalias() += g * ConstMatMap<T>(b.data(), k, n).transpose();
      }
      if (has_grad(b)) {
        MatMap<T>(b.grad().data(), k, n).noalias() += ConstMatMap<T>(a.data(), r, k).transpose() * g;
      }
    });
  }
  return out;
}

// ------------------------------------------------------------------ conv/pool

namespace {

// cols[t, c*K + k] = x[c, t*s + k - p] (zero outside the signal).
template <typename T>
void im2col(const T* x, std::size_t channels, std::size_t length, std::size_t kernel,
            std::size_t stride, std::size_t padding, std::size_t out_len, T* cols) {
  const std::size_t width = channels * kernel;
  for (std::size_t t = 0; t < out_len; ++t) {
    T* row = cols + t * width;
    for (std::size_t c = 0; c < channels; ++c) {
      const T* xc = x + c * length;
      for (std::size_t k = 0; k < kernel; ++k) {
        const auto pos = static_cast<std::ptrdiff_t>(t * stride + k) - static_cast<std::ptrdiff_t>(padding);
        row[c * kernel + k] =
            (pos >= 0 && pos < static_cast<std::ptrdiff_t>(length)) ? xc[pos] : T(0);
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, std::size_t channels, std::size_t length, std::size_t kernel,
                std::size_t stride, std::size_t padding, std::size_t out_len, T* gx) {
  const std::size_t width = channels * kernel;
  for (std::size_t t = 0; t < out_len; ++t) {
    const T* row = cols + t * width;
    for (std::size_t c = 0; c < channels; ++c) {
      T* gc = gx + c * length;
      for (std::size_t k = 0; k < kernel; ++k) {
        const auto pos = static_cast<std::ptrdiff_t>(t * stride + k) - static_cast<std::ptrdiff_t>(padding);
        if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(length)) gc[pos] += row[c * kernel + k];
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv1d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding) {
  expect_rank("conv1d", "input", x.shape(), 3);
  expect_rank("conv1d", "weight", weight.shape(), 3);
  const std::size_t batch = x.dim(0);
  const std::size_t cin = x.dim(1);
  const std::size_t length = x.dim(2);
  const std::size_t cout = weight.dim(0);
  const std::size_t kernel = weight.dim(2);
  expect_dim("conv1d", "input channels", cin, weight.dim(1));
  if (bias.defined()) expect_dim("conv1d", "bias length", bias.size(), cout);
  if (stride == 0) shape_error("conv1d", "stride is 0");
  if (length + 2 * padding < kernel) {
    shape_error("conv1d", "input length " + std::to_string(length) + " shorter than kernel " +
                              std::to_string(kernel));
  }
  const std::size_t out_len = (length + 2 * padding - kernel) / stride + 1;
  const std::size_t width = cin * kernel;

  const bool rg = wants_grad(tape, {&x, &weight, &bias});
  Tensor<T> out(Shape{batch, cout, out_len}, rg);
  const T* xd = x.data();
  const T* wd = weight.data();
  T* od = out.data();
  const T* bd = bias.defined() ? bias.data() : nullptr;

  parallel_for(batch, [&](std::size_t b) {
    RowMat<T> cols(static_cast<Index>(out_len), static_cast<Index>(width));
    im2col(xd + b * cin * length, cin, length, kernel, stride, padding, out_len, cols.data());
    MatMap<T> y(od + b * cout * out_len, static_cast<Index>(cout), static_cast<Index>(out_len));
    y.noalias() = ConstMatMap<T>(wd, static_cast<Index>(cout), static_cast<Index>(width)) *
                  cols.transpose();
    if (bd != nullptr) {
      for (std::size_t c = 0; c < cout; ++c) y.row(static_cast<Index>(c)).array() += bd[c];
    }
  });

  if (rg) {
    tape.record([x, weight, bias, out, batch, cin, length, cout, kernel, stride, padding, out_len,
                 width]() mutable {
      const auto co = static_cast<Index>(cout);
      const auto lo = static_cast<Index>(out_len);
      const auto wi = static_cast<Index>(width);
      RowMat<T> cols(lo, wi);
      for (std::size_t b = 0; b < batch; ++b) {
        ConstMatMap<T> gy(out.grad().data() + b * cout * out_len, co, lo);
        if (has_grad(bias)) {
          auto gb = bias.grad();
          for (std::size_t c = 0; c < cout; ++c) gb[c] += gy.row(static_cast<Index>(c)).sum();
        }
        if (has_grad(weight)) {
          im2col(x.data() + b * cin * length, cin, length, kernel, stride, padding, out_len,
                 cols.data());
          MatMap<T>(weight.grad().data(), co, wi).noalias() += gy * cols;
        }
        if (has_grad(x)) {
          RowMat<T> gcols = gy.transpose() * ConstMatMap<T>(weight.data(), co, wi);
          col2im_add(gcols.data(), cin, length, kernel, stride, padding, out_len,
                     x.grad().data() + b * cin * length);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> batch_norm1d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma,
                       const Tensor<T>& beta, Tensor<T>& running_mean, Tensor<T>& running_var,
                       bool training, double momentum, double eps) {
  expect_rank("batch_norm1d", "input", x.shape(), 3);
  const std::size_t batch = x.dim(0);
  const std::size_t channels = x.dim(1);
  const std::size_t length = x.dim(2);
  expect_dim("batch_norm1d", "weight length", gamma.size(), channels);
  expect_dim("batch_norm1d", "bias length", beta.size(), channels);
  expect_dim("batch_norm1d", "running_mean length", running_mean.size(), channels);
  expect_dim("batch_norm1d", "running_var length", running_var.size(), channels);
  const std::size_t count = batch * length;
  if (training && count < 2) shape_error("batch_norm1d", "training needs more than one value per channel");

  const bool rg = wants_grad(tape, {&x, &gamma, &beta});
  Tensor<T> out(x.shape(), rg);
  std::vector<T> xhat(x.size());
  std::vector<T> inv_std(channels);
  auto xv = x.values();
  auto ov = out.values();
  auto gv = gamma.values();
  auto bv = beta.values();

  for (std::size_t c = 0; c < channels; ++c) {
    double mean = 0.0, var = 0.0;
    if (training) {
      for (std::size_t b = 0; b < batch; ++b) {
        const T* row = xv.data() + (b * channels + c) * length;
        for (std::size_t i = 0; i < length; ++i) mean += row[i];
      }
      mean /= static_cast<double>(count);
      for (std::size_t b = 0; b < batch; ++b) {
        const T* row = xv.data() + (b * channels + c) * length;
        for (std::size_t i = 0; i < length; ++i) {
          const double dv = row[i] - mean;
          var += dv * dv;
        }
      }
      var /= static_cast<double>(count);
      auto rm = running_mean.values();
      auto rv = running_var.values();
      const double unbiased = var * static_cast<double>(count) / static_cast<double>(count - 1);
      rm[c] = static_cast<T>((1.0 - momentum) * rm[c] + momentum * mean);
      rv[c] = static_cast<T>((1.0 - momentum) * rv[c] + momentum * unbiased);
    } else {
      mean = running_mean.values()[c];
      var = running_var.values()[c];
    }
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[c] = static_cast<T>(istd);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + c) * length;
      for (std::size_t i = 0; i < length; ++i) {
        const T h = static_cast<T>((xv[off + i] - mean) * istd);
        xhat[off + i] = h;
        ov[off + i] = gv[c] * h + bv[c];
      }
    }
  }

  if (rg) {
    tape.record([x, gamma, beta, out, xhat = std::move(xhat), inv_std = std::move(inv_std), batch,
                 channels, length, count, training]() mutable {
      auto g = out.grad();
      for (std::size_t c = 0; c < channels; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
          const std::size_t off = (b * channels + c) * length;
          for (std::size_t i = 0; i < length; ++i) {
            sum_g += g[off + i];
            sum_gx += static_cast<double>(g[off + i]) * xhat[off + i];
          }
        }
        if (has_grad(gamma)) gamma.grad()[c] += static_cast<T>(sum_gx);
        if (has_grad(beta)) beta.grad()[c] += static_cast<T>(sum_g);
        if (!has_grad(x)) continue;
        auto gx = x.grad();
        const double scale = static_cast<double>(gamma.values()[c]) * inv_std[c];
        const double n = static_cast<double>(count);
        for (std::size_t b = 0; b < batch; ++b) {
          const std::size_t off = (b * channels + c) * length;
          for (std::size_t i = 0; i < length; ++i) {
            if (training) {
              gx[off + i] += static_cast<T>(scale / n * (n * g[off + i] - sum_g - xhat[off + i] * sum_gx));
            } else {
              gx[off + i] += static_cast<T>(scale * g[off + i]);
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> max_pool1d(Tape<T>& tape, const Tensor<T>& x, std::size_t kernel, std::size_t stride) {
  expect_rank("max_pool1d", "input", x.shape(), 3);
  if (kernel == 0 || stride == 0) shape_error("max_pool1d", "kernel and stride must be positive");
  const std::size_t rows = x.dim(0) * x.dim(1);
  const std::size_t length = x.dim(2);
  if (length < kernel) {
    shape_error("max_pool1d", "input length " + std::to_string(length) + " shorter than kernel " +
                                  std::to_string(kernel));
  }
  const std::size_t out_len = (length - kernel) / stride + 1;
  const bool rg = wants_grad(tape, {&x});
  Tensor<T> out(Shape{x.dim(0), x.dim(1), out_len}, rg);
  std::vector<std::size_t> argmax(rows * out_len);
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < out_len; ++t) {
      const std::size_t base = r * length + t * stride;
      std::size_t best = base;
      for (std::size_t k = 1; k < kernel; ++k) {
        if (xv[base + k] > xv[best]) best = base + k;
      }
      argmax[r * out_len + t] = best;
      ov[r * out_len + t] = xv[best];
    }
  }
  if (rg) {
    tape.record([x, out, argmax = std::move(argmax)]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[argmax[i]] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double p, bool training, dsp::Rng* rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout probability must be in [0, 1)");
  if (!training || p == 0.0) return x;
  if (rng == nullptr) throw Error("dropout in training mode needs a random stream");
  const bool rg = wants_grad(tape, {&x});
  Tensor<T> out(x.shape(), rg);
  std::vector<T> mask(x.size());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  for (T& m : mask) m = rng->uniform() >= p ? keep_scale : T(0);
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] * mask[i];
  if (rg) {
    tape.record([x, out, mask = std::move(mask)]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, double eps) {
  if (x.rank() == 0) shape_error("layer_norm", "input has rank 0");
  const std::size_t dim = x.shape().back();
  expect_dim("layer_norm", "weight length", gamma.size(), dim);
  expect_dim("layer_norm", "bias length", beta.size(), dim);
  const std::size_t rows = x.size() / dim;
  const bool rg = wants_grad(tape, {&x, &gamma, &beta});
  Tensor<T> out(x.shape(), rg);
  std::vector<T> xhat(x.size());
  std::vector<T> inv_std(rows);
  auto xv = x.values();
  auto ov = out.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * dim;
    double mean = 0.0;
    for (std::size_t i = 0; i < dim; ++i) mean += row[i];
    mean /= static_cast<double>(dim);
    double var = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double dv = row[i] - mean;
      var += dv * dv;
    }
    var /= static_cast<double>(dim);
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[r] = static_cast<T>(istd);
    for (std::size_t i = 0; i < dim; ++i) {
      const T h = static_cast<T>((row[i] - mean) * istd);
      xhat[r * dim + i] = h;
      ov[r * dim + i] = gv[i] * h + bv[i];
    }
  }
  if (rg) {
    tape.record([x, gamma, beta, out, xhat = std::move(xhat), inv_std = std::move(inv_std), rows,
                 dim]() mutable {
      auto g = out.grad();
      auto gv = gamma.values();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t off = r * dim;
        if (has_grad(gamma)) {
          auto gg = gamma.grad();
          for (std::size_t i = 0; i < dim; ++i) gg[i] += g[off + i] * xhat[off + i];
        }
        if (has_grad(beta)) {
          auto gb = beta.grad();
          for (std::size_t i = 0; i < dim; ++i) gb[i] += g[off + i];
        }
        if (!has_grad(x)) continue;
        double sum_d = 0.0, sum_dx = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
          const double d = static_cast<double>(g[off + i]) * gv[i];
          sum_d += d;
          sum_dx += d * xhat[off + i];
        }
        auto gx = x.grad();
        const double n = static_cast<double>(dim);
        for (std::size_t i = 0; i < dim; ++i) {
          const double d = static_cast<double>(g[off + i]) * gv[i];
          gx[off + i] += static_cast<T>(inv_std[r] / n * (n * d - sum_d - xhat[off + i] * sum_dx));
        }
      }
    });
  }
  return out;
}

namespace {

// Row-wise softmax in place, sums accumulated in double.
template <typename T>
void softmax_rows(T* data, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    T* row = data + r * cols;
    T peak = row[0];
    for (std::size_t i = 1; i < cols; ++i) peak = std::max(peak, row[i]);
    double total = 0.0;
    for (std::size_t i = 0; i < cols; ++i) {
      row[i] = std::exp(row[i] - peak);
      total += row[i];
    }
    const T inv = static_cast<T>(1.0 / total);
    for (std::size_t i = 0; i < cols; ++i) row[i] *= inv;
  }
}

}  // namespace

template <typename T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& x) {
  if (x.rank() == 0) shape_error("softmax", "input has rank 0");
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.size() / cols;
  const bool rg = wants_grad(tape, {&x});
  Tensor<T> out(x.shape(), std::vector<T>(x.values().begin(), x.values().end()), rg);
  softmax_rows(out.data(), rows, cols);
  if (rg) {
    tape.record([x, out, rows, cols]() mutable {
      auto g = out.grad();
      auto y = out.values();
      auto gx = x.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t i = 0; i < cols; ++i) dot += static_cast<double>(g[r * cols + i]) * y[r * cols + i];
        for (std::size_t i = 0; i < cols; ++i) {
          gx[r * cols + i] += static_cast<T>(y[r * cols + i] * (g[r * cols + i] - dot));
        }
      }
    });
  }
  return out;
}

// ------------------------------------------------------------------ attention

namespace {

template <typename T>
void gather_head(const T* src, std::size_t seq, std::size_t d_model, std::size_t head,
                 std::size_t d_head, RowMat<T>& dst) {
  dst.resize(static_cast<Index>(seq), static_cast<Index>(d_head));
  for (std::size_t s = 0; s < seq; ++s) {
    const T* row = src + s * d_model + head * d_head;
    std::copy(row, row + d_head, dst.data() + s * d_head);
  }
}

template <typename T>
void scatter_add_head(const RowMat<T>& src, std::size_t seq, std::size_t d_model, std::size_t head,
                      std::size_t d_head, T* dst) {
  for (std::size_t s = 0; s < seq; ++s) {
    T* row = dst + s * d_model + head * d_head;
    const T* in = src.data() + s * d_head;
    for (std::size_t i = 0; i < d_head; ++i) row[i] += in[i];
  }
}

template <typename T>
void attention_probs(const RowMat<T>& qh, const RowMat<T>& kh, T scale, RowMat<T>& probs) {
  probs.noalias() = qh * kh.transpose();
  probs *= scale;
  softmax_rows(probs.data(), static_cast<std::size_t>(probs.rows()),
               static_cast<std::size_t>(probs.cols()));
}

}  // namespace

template <typename T>
Tensor<T> attention(Tape<T>& tape, const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    std::size_t heads) {
  expect_rank("attention", "query", q.shape(), 3);
  if (k.shape() != q.shape() || v.shape() != q.shape()) {
    shape_error("attention", "query/key/value shapes differ");
  }
  const std::size_t batch = q.dim(0);
  const std::size_t seq = q.dim(1);
  const std::size_t d_model = q.dim(2);
  if (heads == 0 || d_model % heads != 0) {
    shape_error("attention", "d_model " + std::to_string(d_model) + " not divisible by heads " +
                                 std::to_string(heads));
  }
  const std::size_t d_head = d_model / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d_head)));
  const bool rg = wants_grad(tape, {&q, &k, &v});
  Tensor<T> out(q.shape(), rg);
  const T* qd = q.data();
  const T* kd = k.data();
  const T* vd = v.data();
  T* od = out.data();

  parallel_for(batch * heads, [&](std::size_t job) {
    const std::size_t b = job / heads;
    const std::size_t h = job % heads;
    const std::size_t off = b * seq * d_model;
    RowMat<T> qh, kh, vh, probs(static_cast<Index>(seq), static_cast<Index>(seq));
    gather_head(qd + off, seq, d_model, h, d_head, qh);
    gather_head(kd + off, seq, d_model, h, d_head, kh);
    gather_head(vd + off, seq, d_model, h, d_head, vh);
    attention_probs(qh, kh, scale, probs);
    RowMat<T> oh = probs * vh;
    for (std::size_t s = 0; s < seq; ++s) {
      std::copy(oh.data() + s * d_head, oh.data() + (s + 1) * d_head,
                od + off + s * d_model + h * d_head);
    }
  });

  if (rg) {
    tape.record([q, k, v, out, batch, seq, d_model, heads, d_head, scale]() mutable {
      parallel_for(batch * heads, [&](std::size_t job) {
        const std::size_t b = job / heads;
        const std::size_t h = job % heads;
        const std::size_t off = b * seq * d_model;
        RowMat<T> qh, kh, vh, goh, probs(static_cast<Index>(seq), static_cast<Index>(seq));
        gather_head(q.data() + off, seq, d_model, h, d_head, qh);
        gather_head(k.data() + off, seq, d_model, h, d_head, kh);
        gather_head(v.data() + off, seq, d_model, h, d_head, vh);
        gather_head(out.grad().data() + off, seq, d_model, h, d_head, goh);
        attention_probs(qh, kh, scale, probs);

        if (has_grad(v)) {
          RowMat<T> gvh = probs.transpose() * goh;
          scatter_add_head(gvh, seq, d_model, h, d_head, v.grad().data() + off);
        }
        if (!has_grad(q) && !has_grad(k)) return;
        RowMat<T> gp = goh * vh.transpose();
        // d(scores) = P o (dP - rowsum(dP o P)), then the 1/sqrt(d_head) factor.
        for (Index r = 0; r < gp.rows(); ++r) {
          double dot = 0.0;
          for (Index c = 0; c < gp.cols(); ++c) dot += static_cast<double>(gp(r, c)) * probs(r, c);
          for (Index c = 0; c < gp.cols(); ++c) {
            gp(r, c) = static_cast<T>(probs(r, c) * (gp(r, c) - dot)) * scale;
          }
        }
        if (has_grad(q)) {
          RowMat<T> gqh = gp * kh;
          scatter_add_head(gqh, seq, d_model, h, d_head, q.grad().data() + off);
        }
        if (has_grad(k)) {
          RowMat<T> gkh = gp.transpose() * qh;
          scatter_add_head(gkh, seq, d_model, h, d_head, k.grad().data() + off);
        }
      });
    });
  }
  return out;
}

// --------------------------------------------------------- layout and pooling

template <typename T>
Tensor<T> transpose12(Tape<T>& tape, const Tensor<T>& x) {
  expect_rank("transpose12", "input", x.shape(), 3);
  const std::size_t batch = x.dim(0), a = x.dim(1), c = x.dim(2);
  const bool rg = wants_grad(tape, {&x});
  Tensor<T> out(Shape{batch, c, a}, rg);
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < a; ++i) {
      for (std::size_t j = 0; j < c; ++j) ov[(b * c + j) * a + i] = xv[(b * a + i) * c + j];
    }
  }
  if (rg) {
    tape.record([x, out, batch, a, c]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < a; ++i) {
          for (std::size_t j = 0; j < c; ++j) gx[(b * a + i) * c + j] += g[(b * c + j) * a + i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_rows(Tape<T>& tape, const Tensor<T>& x, std::span<const T> table) {
  expect_rank("add_rows", "input", x.shape(), 3);
  const std::size_t per_item = x.dim(1) * x.dim(2);
  if (table.size() < per_item) {
    shape_error("add_rows", "table holds " + std::to_string(table.size()) + " values, need " +
                                std::to_string(per_item));
  }
  const bool rg = wants_grad(tape, {&x});
  Tensor<T> out(x.shape(), rg);
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] + table[i % per_item];
  if (rg) {
    tape.record([x, out]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean_axis(Tape<T>& tape, const Tensor<T>& x, std::size_t axis) {
  expect_rank("mean_axis", "input", x.shape(), 3);
  if (axis != 1 && axis != 2) shape_error("mean_axis", "axis must be 1 or 2");
  const std::size_t n0 = x.dim(0), n1 = x.dim(1), n2 = x.dim(2);
  const bool rg = wants_grad(tape, {&x});
  Tensor<T> out(axis == 1 ? Shape{n0, n2} : Shape{n0, n1}, rg);
  auto xv = x.values();
  auto ov = out.values();
  if (axis == 1) {
    for (std::size_t b = 0; b < n0; ++b) {
      for (std::size_t j = 0; j < n2; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n1; ++i) acc += xv[(b * n1 + i) * n2 + j];
        ov[b * n2 + j] = static_cast<T>(acc / static_cast<double>(n1));
      }
    }
  } else {
    for (std::size_t r = 0; r < n0 * n1; ++r) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n2; ++j) acc += xv[r * n2 + j];
      ov[r] = static_cast<T>(acc / static_cast<double>(n2));
    }
  }
  if (rg) {
    tape.record([x, out, axis, n0, n1, n2]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      if (axis == 1) {
        const T inv = static_cast<T>(1.0 / static_cast<double>(n1));
        for (std::size_t b = 0; b < n0; ++b) {
          for (std::size_t i = 0; i < n1; ++i) {
            for (std::size_t j = 0; j < n2; ++j) gx[(b * n1 + i) * n2 + j] += g[b * n2 + j] * inv;
          }
        }
      } else {
        const T inv = static_cast<T>(1.0 / static_cast<double>(n2));
        for (std::size_t r = 0; r < n0 * n1; ++r) {
          for (std::size_t j = 0; j < n2; ++j) gx[r * n2 + j] += g[r] * inv;
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> max_axis1(Tape<T>& tape, const Tensor<T>& x) {
  expect_rank("max_axis1", "input", x.shape(), 3);
  const std::size_t n0 = x.dim(0), n1 = x.dim(1), n2 = x.dim(2);
  const bool rg = wants_grad(tape, {&x});
  Tensor<T> out(Shape{n0, n2}, rg);
  std::vector<std::size_t> argmax(n0 * n2);
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t b = 0; b < n0; ++b) {
    for (std::size_t j = 0; j < n2; ++j) {
      std::size_t best = b * n1 * n2 + j;
      for (std::size_t i = 1; i < n1; ++i) {
        const std::size_t idx = (b * n1 + i) * n2 + j;
        if (xv[idx] > xv[best]) best = idx;
      }
      argmax[b * n2 + j] = best;
      ov[b * n2 + j] = xv[best];
    }
  }
  if (rg) {
    tape.record([x, out, argmax = std::move(argmax)]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[argmax[i]] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> select_axis1(Tape<T>& tape, const Tensor<T>& x, std::size_t index) {
  expect_rank("select_axis1", "input", x.shape(), 3);
  const std::size_t n0 = x.dim(0), n1 = x.dim(1), n2 = x.dim(2);
  if (index >= n1) shape_error("select_axis1", "index out of range");
  const bool rg = wants_grad(tape, {&x});
  Tensor<T> out(Shape{n0, n2}, rg);
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t b = 0; b < n0; ++b) {
    for (std::size_t j = 0; j < n2; ++j) ov[b * n2 + j] = xv[(b * n1 + index) * n2 + j];
  }
  if (rg) {
    tape.record([x, out, index, n0, n1, n2]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t b = 0; b < n0; ++b) {
        for (std::size_t j = 0; j < n2; ++j) gx[(b * n1 + index) * n2 + j] += g[b * n2 + j];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------- plant

template <typename T>
Tensor<T> causal_fir(Tape<T>& tape, const Tensor<T>& w, const Tensor<T>& x) {
  expect_rank("causal_fir", "filters", w.shape(), 2);
  expect_rank("causal_fir", "signals", x.shape(), 2);
  expect_dim("causal_fir", "batch", x.dim(0), w.dim(0));
  const std::size_t batch = w.dim(0);
  const std::size_t taps = w.dim(1);
  const std::size_t length = x.dim(1);
  const bool rg = wants_grad(tape, {&w, &x});
  Tensor<T> out(Shape{batch, length}, rg);
  const T* wd = w.data();
  const T* xd = x.data();
  T* od = out.data();

  parallel_for(batch, [&](std::size_t b) {
    const T* wb = wd + b * taps;
    const T* xb = xd + b * length;
    T* yb = od + b * length;
    for (std::size_t n = 0; n < length; ++n) {
      const std::size_t kmax = std::min(n + 1, taps);
      double acc = 0.0;
      for (std::size_t k = 0; k < kmax; ++k) acc += static_cast<double>(wb[k]) * xb[n - k];
      yb[n] = static_cast<T>(acc);
    }
  });

  if (rg) {
    tape.record([w, x, out, batch, taps, length]() mutable {
      parallel_for(batch, [&](std::size_t b) {
        const T* gy = out.grad().data() + b * length;
        if (has_grad(w)) {
          const T* xb = x.data() + b * length;
          T* gw = w.grad().data() + b * taps;
          for (std::size_t k = 0; k < taps && k < length; ++k) {
            double acc = 0.0;
            for (std::size_t n = k; n < length; ++n) acc += static_cast<double>(gy[n]) * xb[n - k];
            gw[k] += static_cast<T>(acc);
          }
        }
        if (has_grad(x)) {
          const T* wb = w.data() + b * taps;
          T* gx = x.grad().data() + b * length;
          for (std::size_t m = 0; m < length; ++m) {
            const std::size_t kmax = std::min(taps, length - m);
            double acc = 0.0;
            for (std::size_t k = 0; k < kmax; ++k) acc += static_cast<double>(gy[m + k]) * wb[k];
            gx[m] += static_cast<T>(acc);
          }
        }
      });
    });
  }
  return out;
}

template <typename T>
Tensor<T> weighted_residual_loss(Tape<T>& tape, const Tensor<T>& y, const Tensor<T>& d,
                                 std::span<const double> alpha) {
  expect_rank("weighted_residual_loss", "output", y.shape(), 2);
  if (y.shape() != d.shape()) {
    shape_error("weighted_residual_loss", to_string(y.shape()) + " vs " + to_string(d.shape()));
  }
  expect_dim("weighted_residual_loss", "weights", alpha.size(), y.dim(1));
  const std::size_t batch = y.dim(0);
  const std::size_t length = y.dim(1);
  const double scale = 1.0 / static_cast<double>(batch * length);
  const auto yv = y.values();
  const auto dv = d.values();
  double acc = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t n = 0; n < length; ++n) {
      const double e = static_cast<double>(dv[b * length + n]) - yv[b * length + n];
      acc += alpha[n] * e * e;
    }
  }
  const bool rg = wants_grad(tape, {&y, &d});
  Tensor<T> out(Shape{1}, std::vector<T>{static_cast<T>(acc * scale)}, rg);
  if (rg) {
    std::vector<double> weights(alpha.begin(), alpha.end());
    tape.record([y, d, out, weights = std::move(weights), batch, length, scale]() {
      const double g = out.grad()[0];
      const auto yv = y.values();
      const auto dv = d.values();
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t n = 0; n < length; ++n) {
          const std::size_t i = b * length + n;
          const double ge = 2.0 * scale * g * weights[n] * (static_cast<double>(dv[i]) - yv[i]);
          if (has_grad(y)) y.grad()[i] -= static_cast<T>(ge);
          if (has_grad(d)) d.grad()[i] += static_cast<T>(ge);
        }
      }
    });
  }
  return out;
}

#define ANCLAB_INSTANTIATE_OPS(T)                                                                 \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                            \
  template Tensor<T> reshape(Tape<T>&, const Tensor<T>&, Shape);                                 \
  template Tensor<T> relu(Tape<T>&, const Tensor<T>&);                                           \
  template Tensor<T> sigmoid(Tape<T>&, const Tensor<T>&);                                        \
  template Tensor<T> linear(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> matmul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> conv1d(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                            std::size_t, std::size_t);                                           \
  template Tensor<T> batch_norm1d(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                  Tensor<T>&, Tensor<T>&, bool, double, double);                 \
  template Tensor<T> max_pool1d(Tape<T>&, const Tensor<T>&, std::size_t, std::size_t);           \
  template Tensor<T> dropout(Tape<T>&, const Tensor<T>&, double, bool, dsp::Rng*);               \
  template Tensor<T> layer_norm(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                double);                                                         \
  template Tensor<T> softmax(Tape<T>&, const Tensor<T>&);                                        \
  template Tensor<T> attention(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                               std::size_t);                                                     \
  template Tensor<T> transpose12(Tape<T>&, const Tensor<T>&);                                    \
  template Tensor<T> add_rows(Tape<T>&, const Tensor<T>&, std::span<const T>);                   \
  template Tensor<T> mean_axis(Tape<T>&, const Tensor<T>&, std::size_t);                         \
  template Tensor<T> max_axis1(Tape<T>&, const Tensor<T>&);                                      \
  template Tensor<T> select_axis1(Tape<T>&, const Tensor<T>&, std::size_t);                      \
  template Tensor<T> causal_fir(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> weighted_residual_loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                            std::span<const double>);

ANCLAB_INSTANTIATE_OPS(float)
ANCLAB_INSTANTIATE_OPS(double)

#undef ANCLAB_INSTANTIATE_OPS

}  // namespace anclab::nn
