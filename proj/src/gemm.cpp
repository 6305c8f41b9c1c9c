// SPDX-License-Identifier: Apache-2.0

#include "gemm.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <thread>
#include <vector>

#include "einv/kernels.hpp"

namespace einv {

namespace {
std::atomic<std::size_t> g_threads{1};
}

void set_num_threads(std::size_t n) { g_threads.store(std::max<std::size_t>(1, n)); }
std::size_t num_threads() { return g_threads.load(); }

namespace detail {

namespace {

// Register tile is kMr rows by two 32-byte vectors. Blocking over k keeps the
// running sums in C between blocks; since C holds exactly the rounded partial
// sum, the reduction order per element is the same as one long loop.
constexpr std::size_t kMr = 6;
constexpr std::size_t kKc = 256;
constexpr std::size_t kMc = 16 * kMr;
constexpr std::size_t kNc = 2048;

template <typename T>
struct Vec;
template <>
struct Vec<float> {
    typedef float type __attribute__((vector_size(32)));
};
template <>
struct Vec<double> {
    typedef double type __attribute__((vector_size(32)));
};

template <typename T>
constexpr std::size_t kLanes = 32 / sizeof(T);
template <typename T>
constexpr std::size_t kNr = 2 * kLanes<T>;

// tile is kMr x kNr row-major and holds the starting sums on entry.
template <typename T>
void micro_kernel(std::size_t kc, const T* __restrict a, const T* __restrict b, T* __restrict tile) {
    using V = typename Vec<T>::type;
    constexpr std::size_t L = kLanes<T>;
    V acc[kMr][2];
    for (std::size_t r = 0; r < kMr; ++r) {
        std::memcpy(&acc[r][0], tile + r * 2 * L, sizeof(V));
        std::memcpy(&acc[r][1], tile + r * 2 * L + L, sizeof(V));
    }
    for (std::size_t p = 0; p < kc; ++p) {
        V b0, b1;
        std::memcpy(&b0, b + p * 2 * L, sizeof(V));
        std::memcpy(&b1, b + p * 2 * L + L, sizeof(V));
        const T* ap = a + p * kMr;
        for (std::size_t r = 0; r < kMr; ++r) {
            const T av = ap[r];
            acc[r][0] += b0 * av;
            acc[r][1] += b1 * av;
        }
    }
    for (std::size_t r = 0; r < kMr; ++r) {
        std::memcpy(tile + r * 2 * L, &acc[r][0], sizeof(V));
        std::memcpy(tile + r * 2 * L + L, &acc[r][1], sizeof(V));
    }
}

// Packs rows [i0, i0 + mc) x cols [p0, p0 + kc) of A into kMr-row slivers laid
// out [p][r], zero padded.
template <typename T>
void pack_a(const T* a, std::size_t lda, std::size_t i0, std::size_t mc, std::size_t p0, std::size_t kc, T* dst) {
    for (std::size_t ib = 0; ib < mc; ib += kMr) {
        const std::size_t rows = std::min(kMr, mc - ib);
        for (std::size_t p = 0; p < kc; ++p) {
            for (std::size_t r = 0; r < kMr; ++r) {
                dst[p * kMr + r] = r < rows ? a[(i0 + ib + r) * lda + p0 + p] : T{0};
            }
        }
        dst += kc * kMr;
    }
}

template <typename T>
void pack_b(const T* b, std::size_t ldb, std::size_t p0, std::size_t kc, std::size_t j0, std::size_t nc, T* dst) {
    constexpr std::size_t Nr = kNr<T>;
    for (std::size_t jb = 0; jb < nc; jb += Nr) {
        const std::size_t cols = std::min(Nr, nc - jb);
        for (std::size_t p = 0; p < kc; ++p) {
            const T* src = b + (p0 + p) * ldb + j0 + jb;
            T* d = dst + p * Nr;
            std::size_t j = 0;
            for (; j < cols; ++j) d[j] = src[j];
            for (; j < Nr; ++j) d[j] = T{0};
        }
        dst += kc * Nr;
    }
}

template <typename T>
void gemm_columns(std::size_t m, std::size_t col_begin, std::size_t col_end, std::size_t k, const T* a,
                  std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
    constexpr std::size_t Nr = kNr<T>;
    // Packing buffers persist per thread; small convolutions would otherwise
    // spend more time allocating them than multiplying.
    thread_local std::vector<T> a_pack, b_pack;
    const std::size_t kc_max = std::min(kKc, k);
    const std::size_t a_need = (std::min(kMc, m) + kMr - 1) / kMr * kMr * kc_max;
    const std::size_t b_need = (std::min(kNc, col_end - col_begin) + Nr - 1) / Nr * Nr * kc_max;
    if (a_pack.size() < a_need) a_pack.resize(a_need);
    if (b_pack.size() < b_need) b_pack.resize(b_need);
    T tile[kMr * Nr];
    for (std::size_t j0 = col_begin; j0 < col_end; j0 += kNc) {
        const std::size_t nc = std::min(kNc, col_end - j0);
        for (std::size_t p0 = 0; p0 < k; p0 += kKc) {
            const std::size_t kc = std::min(kKc, k - p0);
            const bool load = accumulate || p0 > 0;
            pack_b(b, ldb, p0, kc, j0, nc, b_pack.data());
            for (std::size_t i0 = 0; i0 < m; i0 += kMc) {
                const std::size_t mc = std::min(kMc, m - i0);
                pack_a(a, lda, i0, mc, p0, kc, a_pack.data());
                for (std::size_t jb = 0; jb < nc; jb += Nr) {
                    const std::size_t cols = std::min(Nr, nc - jb);
                    const T* bp = b_pack.data() + (jb / Nr) * kc * Nr;
                    for (std::size_t ib = 0; ib < mc; ib += kMr) {
                        const std::size_t rows = std::min(kMr, mc - ib);
                        T* cblk = c + (i0 + ib) * ldc + j0 + jb;
                        for (std::size_t r = 0; r < kMr; ++r) {
                            for (std::size_t j = 0; j < Nr; ++j) {
                                tile[r * Nr + j] = (load && r < rows && j < cols) ? cblk[r * ldc + j] : T{0};
                            }
                        }
                        micro_kernel<T>(kc, a_pack.data() + (ib / kMr) * kc * kMr, bp, tile);
                        for (std::size_t r = 0; r < rows; ++r) {
                            std::copy(tile + r * Nr, tile + r * Nr + cols, cblk + r * ldc);
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b, std::size_t ldb,
          T* c, std::size_t ldc, bool accumulate) {
    if (m == 0 || n == 0) return;
    if (k == 0) {
        if (!accumulate) {
            for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, T{0});
        }
        return;
    }
    constexpr std::size_t Nr = kNr<T>;
    const std::size_t panels = (n + Nr - 1) / Nr;
    const std::size_t workers = std::min(num_threads(), panels);
    // Small problems are not worth a thread launch.
    if (workers <= 1 || m * n * k < (1u << 18)) {
        gemm_columns(m, 0, n, k, a, lda, b, ldb, c, ldc, accumulate);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t per = (panels + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * per * Nr;
        const std::size_t end = std::min(n, begin + per * Nr);
        if (begin >= end) break;
        pool.emplace_back([=] { gemm_columns(m, begin, end, k, a, lda, b, ldb, c, ldc, accumulate); });
    }
}

template void gemm<float>(std::size_t, std::size_t, std::size_t, const float*, std::size_t, const float*, std::size_t,
                          float*, std::size_t, bool);
template void gemm<double>(std::size_t, std::size_t, std::size_t, const double*, std::size_t, const double*,
                           std::size_t, double*, std::size_t, bool);

}  // namespace detail
}  // namespace einv
