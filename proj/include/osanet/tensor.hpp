#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace osanet::nn {

class NnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// (batch, length, channels), row-major: index = (b*length + l)*channels + c.
template <class T>
struct Tensor3 {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::size_t channels = 0;
  std::vector<T> v;

  Tensor3() = default;
  Tensor3(std::size_t b, std::size_t l, std::size_t c)
      : batch(b), length(l), channels(c), v(b * l * c, T(0)) {}

  T& at(std::size_t b, std::size_t l, std::size_t c) {
    return v[(b * length + l) * channels + c];
  }
  T at(std::size_t b, std::size_t l, std::size_t c) const {
    return v[(b * length + l) * channels + c];
  }
  std::size_t size() const { return v.size(); }
};

// (rows, cols) row-major.
template <class T>
struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> v;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, T(0)) {}

  T& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  T at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
  std::size_t size() const { return v.size(); }
};

// (b, l, c) -> row b, feature l*channels + c. The buffer layout is already
// right, so this is a move/copy of the storage.
template <class T>
Tensor2<T> flatten(const Tensor3<T>& x) {
  Tensor2<T> out;
  out.rows = x.batch;
  out.cols = x.length * x.channels;
  out.v = x.v;
  return out;
}

template <class T>
Tensor3<T> unflatten(const Tensor2<T>& x, std::size_t length, std::size_t channels) {
  if (x.cols != length * channels) {
    throw NnError("unflatten: " + std::to_string(x.cols) + " features != " +
                  std::to_string(length) + "*" + std::to_string(channels));
  }
  Tensor3<T> out;
  out.batch = x.rows;
  out.length = length;
  out.channels = channels;
  out.v = x.v;
  return out;
}

}  // namespace osanet::nn
