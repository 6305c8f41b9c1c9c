// SPDX-License-Identifier: Apache-2.0
//
// Helpers shared by the unit and acceptance tests: seeded random data,
// direct-loop reference kernels, finite differences, scratch directories.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "einv/kernels.hpp"
#include "einv/tensor.hpp"

namespace einv::testing {

using Rng = std::mt19937_64;

template <typename T>
TensorT<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    TensorT<T> t(std::move(shape));
    std::uniform_real_distribution<double> u(lo, hi);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(u(rng));
    return t;
}

inline std::size_t rand_between(Rng& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

// Cross-correlation with zero padding, written as the textbook six-deep loop.
template <typename T>
TensorD naive_conv2d(const TensorT<T>& x, const ConvParamsT<T>& p) {
    const auto& w = p.weights;
    const std::size_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::size_t co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const std::size_t ho = (h + 2 * p.padding[0] - kh) / p.stride[0] + 1;
    const std::size_t wo = (wd + 2 * p.padding[1] - kw) / p.stride[1] + 1;
    TensorD out({n, co, ho, wo});
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t o = 0; o < co; ++o)
            for (std::size_t i = 0; i < ho; ++i)
                for (std::size_t j = 0; j < wo; ++j) {
                    double s = p.bias ? static_cast<double>((*p.bias)[o]) : 0.0;
                    for (std::size_t c = 0; c < ci; ++c)
                        for (std::size_t u = 0; u < kh; ++u)
                            for (std::size_t v = 0; v < kw; ++v) {
                                const long r = static_cast<long>(i * p.stride[0] + u) - static_cast<long>(p.padding[0]);
                                const long q = static_cast<long>(j * p.stride[1] + v) - static_cast<long>(p.padding[1]);
                                if (r < 0 || q < 0 || r >= static_cast<long>(h) || q >= static_cast<long>(wd)) continue;
                                s += static_cast<double>(x.at(b, c, r, q)) * w.at(o, c, u, v);
                            }
                    out.at(b, o, i, j) = s;
                }
    return out;
}

// Transposed convolution as a scatter: every input pixel stamps its kernel.
// Weights are laid out (c_in, c_out, k_h, k_w).
template <typename T>
TensorD naive_conv_transpose2d(const TensorT<T>& x, const ConvParamsT<T>& p) {
    const auto& w = p.weights;
    const std::size_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::size_t co = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const std::size_t ho = (h - 1) * p.stride[0] + kh - 2 * p.padding[0];
    const std::size_t wo = (wd - 1) * p.stride[1] + kw - 2 * p.padding[1];
    TensorD out({n, co, ho, wo});
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t o = 0; o < co; ++o)
            for (std::size_t i = 0; i < ho; ++i)
                for (std::size_t j = 0; j < wo; ++j) out.at(b, o, i, j) = p.bias ? static_cast<double>((*p.bias)[o]) : 0.0;
        for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < wd; ++j)
                    for (std::size_t o = 0; o < co; ++o)
                        for (std::size_t u = 0; u < kh; ++u)
                            for (std::size_t v = 0; v < kw; ++v) {
                                const long r = static_cast<long>(i * p.stride[0] + u) - static_cast<long>(p.padding[0]);
                                const long q = static_cast<long>(j * p.stride[1] + v) - static_cast<long>(p.padding[1]);
                                if (r < 0 || q < 0 || r >= static_cast<long>(ho) || q >= static_cast<long>(wo)) continue;
                                out.at(b, o, r, q) += static_cast<double>(x.at(b, c, i, j)) * w.at(c, o, u, v);
                            }
    }
    return out;
}

template <typename A, typename B>
double max_abs_diff(const TensorT<A>& a, const TensorT<B>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

// ||analytic - numeric|| / max(||analytic||, ||numeric||), with central
// differences of `loss` taken by perturbing each element of `x` in place.
inline double fd_relative_error(TensorD& x, const TensorD& analytic, const std::function<double()>& loss,
                                double h = 1e-6) {
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = loss();
        x[i] = keep - h;
        const double down = loss();
        x[i] = keep;
        const double numeric = (up - down) / (2.0 * h);
        diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
        a2 += analytic[i] * analytic[i];
        n2 += numeric * numeric;
    }
    const double scale = std::sqrt(std::max(a2, n2));
    return scale == 0.0 ? 0.0 : std::sqrt(diff2) / scale;
}

// Weighted sum <y, g>: a scalar loss whose gradient with respect to y is g.
inline double dot(const TensorD& y, const TensorD& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * g[i];
    return s;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("einv_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

}  // namespace einv::testing
