#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace coconts {

// Row-major dense matrix.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const T> row(std::size_t r) const {
    return std::span<const T>(data).subspan(r * cols, cols);
  }

  bool operator==(const Matrix&) const = default;
};

}  // namespace coconts
