#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "osanet/rng.hpp"
#include "osanet/tensor.hpp"

namespace osanet::nn {

// Output length of a valid (unpadded) strided sliding window:
// floor((L_in - k) / s) + 1.
inline std::size_t out_length(std::size_t l_in, std::size_t kernel, std::size_t stride) {
  if (kernel < 1 || stride < 1) throw NnError("kernel and stride must be >= 1");
  if (l_in < kernel) {
    throw NnError("input length " + std::to_string(l_in) + " shorter than kernel " +
                  std::to_string(kernel));
  }
  return (l_in - kernel) / stride + 1;
}

// 1D valid convolution over (batch, length, channels) with ReLU activation:
// y[b,t,k] = relu(sum_{c,j} w[k,c,j] * x[b, t*s + j, c] + bias[k]).
template <class T>
struct Conv1d {
  std::size_t in_channels = 0;
  std::size_t filters = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::vector<T> weights;  // filters x in_channels x kernel, row-major
  std::vector<T> bias;     // filters

  Conv1d() = default;
  Conv1d(std::size_t c_in, std::size_t k_filters, std::size_t k, std::size_t s)
      : in_channels(c_in),
        filters(k_filters),
        kernel(k),
        stride(s),
        weights(k_filters * c_in * k, T(0)),
        bias(k_filters, T(0)) {}

  T& w(std::size_t k, std::size_t c, std::size_t j) {
    return weights[(k * in_channels + c) * kernel + j];
  }
  T w(std::size_t k, std::size_t c, std::size_t j) const {
    return weights[(k * in_channels + c) * kernel + j];
  }

  Tensor3<T> forward(const Tensor3<T>& x) const {
    check_input(x);
    const std::size_t l_out = out_length(x.length, kernel, stride);
    Tensor3<T> y(x.batch, l_out, filters);
    for (std::size_t b = 0; b < x.batch; ++b) {
      for (std::size_t t = 0; t < l_out; ++t) {
        const T* xrow = &x.v[(b * x.length + t * stride) * x.channels];
        for (std::size_t k = 0; k < filters; ++k) {
          T acc = bias[k];
          const T* wk = &weights[k * in_channels * kernel];
          for (std::size_t c = 0; c < in_channels; ++c) {
            for (std::size_t j = 0; j < kernel; ++j) {
              acc += wk[c * kernel + j] * xrow[j * x.channels + c];
            }
          }
          y.at(b, t, k) = acc > T(0) ? acc : T(0);
        }
      }
    }
    return y;
  }

  // Analytic gradients of the forward map; `y` is the forward output (its
  // positivity encodes the ReLU gate). grad_w/grad_b are accumulated from
  // zeroed buffers sized like weights/bias.
  Tensor3<T> backward(const Tensor3<T>& x, const Tensor3<T>& y, const Tensor3<T>& grad_out,
                      std::vector<T>& grad_w, std::vector<T>& grad_b) const {
    check_input(x);
    const std::size_t l_out = out_length(x.length, kernel, stride);
    if (grad_out.batch != x.batch || grad_out.length != l_out || grad_out.channels != filters ||
        y.length != l_out) {
      throw NnError("conv1d backward: gradient shape mismatch");
    }
    grad_w.assign(weights.size(), T(0));
    grad_b.assign(bias.size(), T(0));
    Tensor3<T> grad_x(x.batch, x.length, x.channels);

    for (std::size_t b = 0; b < x.batch; ++b) {
      for (std::size_t t = 0; t < l_out; ++t) {
        const T* xrow = &x.v[(b * x.length + t * stride) * x.channels];
        T* gxrow = &grad_x.v[(b * x.length + t * stride) * x.channels];
        for (std::size_t k = 0; k < filters; ++k) {
          if (!(y.at(b, t, k) > T(0))) continue;  // ReLU gate
          const T g = grad_out.at(b, t, k);
          if (g == T(0)) continue;
          grad_b[k] += g;
          const T* wk = &weights[k * in_channels * kernel];
          T* gwk = &grad_w[k * in_channels * kernel];
          for (std::size_t c = 0; c < in_channels; ++c) {
            for (std::size_t j = 0; j < kernel; ++j) {
              gwk[c * kernel + j] += g * xrow[j * x.channels + c];
              gxrow[j * x.channels + c] += g * wk[c * kernel + j];
            }
          }
        }
      }
    }
    return grad_x;
  }

 private:
  void check_input(const Tensor3<T>& x) const {
    if (x.channels != in_channels) {
      throw NnError("conv1d: input has " + std::to_string(x.channels) + " channels, layer expects " +
                    std::to_string(in_channels));
    }
    if (x.length < kernel) {
      throw NnError("conv1d: input length " + std::to_string(x.length) + " shorter than kernel " +
                    std::to_string(kernel));
    }
  }
};

// Per-channel max over strided windows. Ties break to the lowest index so the
// backward routing is deterministic.
template <class T>
struct MaxPool1d {
  std::size_t window = 1;
  std::size_t stride = 1;

  MaxPool1d() = default;
  MaxPool1d(std::size_t k, std::size_t s) : window(k), stride(s) {}

  // argmax, when given, receives the flat input index feeding each output.
  Tensor3<T> forward(const Tensor3<T>& x, std::vector<std::uint32_t>* argmax = nullptr) const {
    const std::size_t l_out = out_length(x.length, window, stride);
    Tensor3<T> y(x.batch, l_out, x.channels);
    if (argmax) argmax->assign(y.size(), 0);
    for (std::size_t b = 0; b < x.batch; ++b) {
      for (std::size_t t = 0; t < l_out; ++t) {
        for (std::size_t c = 0; c < x.channels; ++c) {
          std::size_t best = (b * x.length + t * stride) * x.channels + c;
          T best_v = x.v[best];
          for (std::size_t j = 1; j < window; ++j) {
            const std::size_t idx = (b * x.length + t * stride + j) * x.channels + c;
            if (x.v[idx] > best_v) {  // strict: first max wins
              best_v = x.v[idx];
              best = idx;
            }
          }
          y.at(b, t, c) = best_v;
          if (argmax) (*argmax)[(b * l_out + t) * x.channels + c] = static_cast<std::uint32_t>(best);
        }
      }
    }
    return y;
  }

  Tensor3<T> backward(std::size_t in_length, const std::vector<std::uint32_t>& argmax,
                      const Tensor3<T>& grad_out) const {
    if (argmax.size() != grad_out.size()) {
      throw NnError("maxpool1d backward: argmax cache missing or stale");
    }
    Tensor3<T> grad_x(grad_out.batch, in_length, grad_out.channels);
    for (std::size_t i = 0; i < grad_out.size(); ++i) {
      grad_x.v[argmax[i]] += grad_out.v[i];  // windows may overlap
    }
    return grad_x;
  }
};

// Affine map with optional ReLU.
template <class T>
struct Dense {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  bool relu = false;
  std::vector<T> weights;  // out x in, row-major
  std::vector<T> bias;     // out

  Dense() = default;
  Dense(std::size_t in, std::size_t out, bool use_relu)
      : in_features(in), out_features(out), relu(use_relu), weights(out * in, T(0)), bias(out, T(0)) {}

  Tensor2<T> forward(const Tensor2<T>& x) const {
    if (x.cols != in_features) {
      throw NnError("dense: input has " + std::to_string(x.cols) + " features, layer expects " +
                    std::to_string(in_features));
    }
    Tensor2<T> y(x.rows, out_features);
    for (std::size_t r = 0; r < x.rows; ++r) {
      const T* xr = &x.v[r * in_features];
      for (std::size_t o = 0; o < out_features; ++o) {
        const T* wo = &weights[o * in_features];
        T acc = bias[o];
        for (std::size_t i = 0; i < in_features; ++i) acc += wo[i] * xr[i];
        y.at(r, o) = relu && acc < T(0) ? T(0) : acc;
      }
    }
    return y;
  }

  Tensor2<T> backward(const Tensor2<T>& x, const Tensor2<T>& y, const Tensor2<T>& grad_out,
                      std::vector<T>& grad_w, std::vector<T>& grad_b) const {
    if (grad_out.rows != x.rows || grad_out.cols != out_features) {
      throw NnError("dense backward: gradient shape mismatch");
    }
    grad_w.assign(weights.size(), T(0));
    grad_b.assign(bias.size(), T(0));
    Tensor2<T> grad_x(x.rows, in_features);
    for (std::size_t r = 0; r < x.rows; ++r) {
      const T* xr = &x.v[r * in_features];
      T* gxr = &grad_x.v[r * in_features];
      for (std::size_t o = 0; o < out_features; ++o) {
        if (relu && !(y.at(r, o) > T(0))) continue;
        const T g = grad_out.at(r, o);
        if (g == T(0)) continue;
        grad_b[o] += g;
        const T* wo = &weights[o * in_features];
        T* gwo = &grad_w[o * in_features];
        for (std::size_t i = 0; i < in_features; ++i) {
          gwo[i] += g * xr[i];
          gxr[i] += g * wo[i];
        }
      }
    }
    return grad_x;
  }
};

// Inverted dropout: training zeroes a unit with probability 1-keep and scales
// survivors by 1/keep, so evaluation is the identity.
template <class T>
struct Dropout {
  T keep = T(1);

  explicit Dropout(T keep_prob = T(1)) : keep(keep_prob) {
    if (!(keep > T(0)) || keep > T(1)) throw NnError("dropout keep probability must be in (0, 1]");
  }

  Tensor2<T> forward_train(const Tensor2<T>& x, SplitMix64& rng, std::vector<T>& mask) const {
    mask.assign(x.size(), T(0));
    Tensor2<T> y(x.rows, x.cols);
    const T scale = T(1) / keep;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (keep >= T(1) || rng.next_double() < static_cast<double>(keep)) {
        mask[i] = scale;
        y.v[i] = x.v[i] * scale;
      }
    }
    return y;
  }

  Tensor2<T> backward(const Tensor2<T>& grad_out, const std::vector<T>& mask) const {
    if (mask.size() != grad_out.size()) throw NnError("dropout backward: mask missing or stale");
    Tensor2<T> grad_x(grad_out.rows, grad_out.cols);
    for (std::size_t i = 0; i < grad_out.size(); ++i) grad_x.v[i] = grad_out.v[i] * mask[i];
    return grad_x;
  }
};

template <class T>
struct SoftmaxLoss {
  T loss = T(0);          // mean over the batch, nats
  Tensor2<T> grad;        // d loss / d logits  = (p - onehot) / batch
  Tensor2<T> probs;
};

// Row-max-stabilized softmax with mean cross-entropy.
template <class T>
SoftmaxLoss<T> softmax_cross_entropy(const Tensor2<T>& logits,
                                     std::span<const std::uint8_t> labels) {
  if (labels.size() != logits.rows) {
    throw NnError("softmax: " + std::to_string(labels.size()) + " labels for " +
                  std::to_string(logits.rows) + " rows");
  }
  SoftmaxLoss<T> out;
  out.grad = Tensor2<T>(logits.rows, logits.cols);
  out.probs = Tensor2<T>(logits.rows, logits.cols);
  const T inv_batch = T(1) / static_cast<T>(logits.rows);
  double loss_acc = 0.0;

  for (std::size_t r = 0; r < logits.rows; ++r) {
    if (labels[r] >= logits.cols) {
      throw NnError("label " + std::to_string(labels[r]) + " out of range for " +
                    std::to_string(logits.cols) + " classes");
    }
    T row_max = logits.at(r, 0);
    for (std::size_t c = 1; c < logits.cols; ++c) row_max = std::max(row_max, logits.at(r, c));
    T denom = T(0);
    for (std::size_t c = 0; c < logits.cols; ++c) {
      const T e = std::exp(logits.at(r, c) - row_max);
      out.probs.at(r, c) = e;
      denom += e;
    }
    for (std::size_t c = 0; c < logits.cols; ++c) {
      const T p = out.probs.at(r, c) / denom;
      out.probs.at(r, c) = p;
      out.grad.at(r, c) = (p - (labels[r] == c ? T(1) : T(0))) * inv_batch;
    }
    // -log p[label], computed from the stabilized pieces to dodge underflow
    const T z = logits.at(r, labels[r]) - row_max;
    loss_acc += static_cast<double>(std::log(denom) - z);
  }
  out.loss = static_cast<T>(loss_acc / static_cast<double>(logits.rows));
  return out;
}

}  // namespace osanet::nn
