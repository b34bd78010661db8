#ifndef ARTID_TENSOR_HPP_
#define ARTID_TENSOR_HPP_

#include <cstddef>
#include <vector>

#include "artid/errors.hpp"

namespace artid {

// Dense channels x rows x cols tensor, row-major within a channel.
template <class T>
struct Tensor3 {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Tensor3() = default;
  Tensor3(int c, int r, int x)
      : channels(c), rows(r), cols(x),
        data(static_cast<std::size_t>(c) * r * x, T{}) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(rows) * cols; }

  T* channel(int c) { return data.data() + static_cast<std::size_t>(c) * plane(); }
  const T* channel(int c) const {
    return data.data() + static_cast<std::size_t>(c) * plane();
  }
  T* row(int c, int r) { return channel(c) + static_cast<std::size_t>(r) * cols; }
  const T* row(int c, int r) const {
    return channel(c) + static_cast<std::size_t>(r) * cols;
  }
  T& at(int c, int r, int x) { return data[(static_cast<std::size_t>(c) * rows + r) * cols + x]; }
  T at(int c, int r, int x) const {
    return data[(static_cast<std::size_t>(c) * rows + r) * cols + x];
  }

  bool same_shape(const Tensor3& other) const {
    return channels == other.channels && rows == other.rows && cols == other.cols;
  }
  void fill(T v) { data.assign(data.size(), v); }
};

}  // namespace artid

#endif  // ARTID_TENSOR_HPP_
