// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

namespace einv::detail {

/// C = A * B (or C += A * B). A is m x k, B is k x n, all row-major with the
/// given leading dimensions. Each C element is reduced over k in ascending
/// order with one multiply and one add per term.
template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b, std::size_t ldb,
          T* c, std::size_t ldc, bool accumulate);

}  // namespace einv::detail
