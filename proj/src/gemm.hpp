#pragma once

#include <cstddef>
#include <vector>

namespace reid::detail {

// C[m×n] += A[m×k] · B[k×n], all row-major and densely packed.
// Rows of A are processed four at a time so each B row is loaded once per
// block; the inner loop runs over contiguous memory and vectorizes.
template <typename T>
void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    T* c0 = c + (i + 0) * n;
    T* c1 = c + (i + 1) * n;
    T* c2 = c + (i + 2) * n;
    T* c3 = c + (i + 3) * n;
    const T* a0 = a + (i + 0) * k;
    const T* a1 = a + (i + 1) * k;
    const T* a2 = a + (i + 2) * k;
    const T* a3 = a + (i + 3) * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
      const T* __restrict br = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const T bj = br[j];
        c0[j] += v0 * bj;
        c1[j] += v1 * bj;
        c2[j] += v2 * bj;
        c3[j] += v3 * bj;
      }
    }
  }
  for (; i < m; ++i) {
    T* __restrict cr = c + i * n;
    const T* ar = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T v = ar[p];
      const T* __restrict br = b + p * n;
      for (std::size_t j = 0; j < n; ++j) cr[j] += v * br[j];
    }
  }
}

template <typename T>
std::vector<T> transpose(const T* src, std::size_t rows, std::size_t cols) {
  std::vector<T> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
  return out;
}

}  // namespace reid::detail
