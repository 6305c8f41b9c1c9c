// SPDX-License-Identifier: Apache-2.0

#include "einv/kernels.hpp"

#include <cmath>
#include <vector>

#include "gemm.hpp"

namespace einv {

namespace {

// Per-thread im2col buffer for the forward kernels, fully overwritten on each use.
template <typename T>
std::vector<T>& scratch(std::size_t size) {
    thread_local std::vector<T> buffer;
    if (buffer.size() < size) buffer.resize(size);
    return buffer;
}

struct Geometry {
    std::size_t channels, in_h, in_w, k_h, k_w, s_h, s_w, p_h, p_w, out_h, out_w;
};

// Column layout: [c * k_h * k_w + i * k_w + j][oh * out_w + ow].
template <typename T>
void im2col(const T* img, const Geometry& g, T* col) {
    const std::size_t spatial = g.out_h * g.out_w;
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.channels; ++c) {
        const T* plane = img + c * g.in_h * g.in_w;
        for (std::size_t i = 0; i < g.k_h; ++i) {
            for (std::size_t j = 0; j < g.k_w; ++j, ++row) {
                T* dst = col + row * spatial;
                for (std::size_t oh = 0; oh < g.out_h; ++oh) {
                    const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.s_h + i) - static_cast<std::ptrdiff_t>(g.p_h);
                    T* d = dst + oh * g.out_w;
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) {
                        for (std::size_t ow = 0; ow < g.out_w; ++ow) d[ow] = T{0};
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(ih) * g.in_w;
                    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
                        const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.s_w + j) - static_cast<std::ptrdiff_t>(g.p_w);
                        d[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in_w)) ? T{0} : src[iw];
                    }
                }
            }
        }
    }
}

// Transposed layout: [oh * out_w + ow][c * k_h * k_w + i * k_w + j].
template <typename T>
void im2row(const T* img, const Geometry& g, T* rows) {
    const std::size_t kk = g.channels * g.k_h * g.k_w;
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            T* dst = rows + (oh * g.out_w + ow) * kk;
            std::size_t q = 0;
            for (std::size_t c = 0; c < g.channels; ++c) {
                const T* plane = img + c * g.in_h * g.in_w;
                for (std::size_t i = 0; i < g.k_h; ++i) {
                    const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.s_h + i) - static_cast<std::ptrdiff_t>(g.p_h);
                    for (std::size_t j = 0; j < g.k_w; ++j, ++q) {
                        const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.s_w + j) - static_cast<std::ptrdiff_t>(g.p_w);
                        const bool inside = ih >= 0 && ih < static_cast<std::ptrdiff_t>(g.in_h) && iw >= 0 &&
                                            iw < static_cast<std::ptrdiff_t>(g.in_w);
                        dst[q] = inside ? plane[static_cast<std::size_t>(ih) * g.in_w + static_cast<std::size_t>(iw)] : T{0};
                    }
                }
            }
        }
    }
}

// Scatter-add of a column buffer back onto an image. `img` must be zeroed.
template <typename T>
void col2im(const T* col, const Geometry& g, T* img) {
    const std::size_t spatial = g.out_h * g.out_w;
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.channels; ++c) {
        T* plane = img + c * g.in_h * g.in_w;
        for (std::size_t i = 0; i < g.k_h; ++i) {
            for (std::size_t j = 0; j < g.k_w; ++j, ++row) {
                const T* src = col + row * spatial;
                for (std::size_t oh = 0; oh < g.out_h; ++oh) {
                    const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.s_h + i) - static_cast<std::ptrdiff_t>(g.p_h);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                    T* d = plane + static_cast<std::size_t>(ih) * g.in_w;
                    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
                        const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.s_w + j) - static_cast<std::ptrdiff_t>(g.p_w);
                        if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.in_w)) d[iw] += src[oh * g.out_w + ow];
                    }
                }
            }
        }
    }
}

bool is_pointwise(const Geometry& g) {
    return g.k_h == 1 && g.k_w == 1 && g.s_h == 1 && g.s_w == 1 && g.p_h == 0 && g.p_w == 0;
}

template <typename T>
void require_rank4(const TensorT<T>& t, const char* what) {
    if (t.rank() != 4) {
        throw ShapeError(std::string(what) + " must be rank 4 (n, c, h, w), got " + shape_str(t.shape()));
    }
}

// Geometry of a convolution that maps an image of `img_h x img_w` with
// `channels` channels onto its output grid.
template <typename T>
Geometry conv_geometry(std::size_t channels, std::size_t img_h, std::size_t img_w, const ConvParamsT<T>& p) {
    Geometry g{};
    g.channels = channels;
    g.in_h = img_h;
    g.in_w = img_w;
    g.k_h = p.weights.dim(2);
    g.k_w = p.weights.dim(3);
    g.s_h = p.stride[0];
    g.s_w = p.stride[1];
    g.p_h = p.padding[0];
    g.p_w = p.padding[1];
    g.out_h = conv_out_extent(img_h, g.k_h, g.s_h, g.p_h, "height");
    g.out_w = conv_out_extent(img_w, g.k_w, g.s_w, g.p_w, "width");
    return g;
}

template <typename T>
void add_bias(TensorT<T>& out, const std::optional<TensorT<T>>& bias) {
    if (!bias) return;
    const std::size_t n = out.dim(0), c = out.dim(1), hw = out.dim(2) * out.dim(3);
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            T* d = out.data() + (b * c + ch) * hw;
            const T v = (*bias)[ch];
            for (std::size_t i = 0; i < hw; ++i) d[i] += v;
        }
    }
}

template <typename T>
std::optional<TensorT<T>> bias_grad(const TensorT<T>& grad_out, bool has_bias) {
    if (!has_bias) return std::nullopt;
    const std::size_t n = grad_out.dim(0), c = grad_out.dim(1), hw = grad_out.dim(2) * grad_out.dim(3);
    TensorT<T> g({c});
    for (std::size_t ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            const T* d = grad_out.data() + (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) s += d[i];
        }
        g[ch] = static_cast<T>(s);
    }
    return g;
}

template <typename T>
TensorT<T> transpose2d(const T* src, std::size_t rows, std::size_t cols) {
    TensorT<T> out({cols, rows});
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
    }
    return out;
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad, const char* axis) {
    if (stride == 0) throw GeometryError(std::string("stride along ") + axis + " must be >= 1");
    if (in + 2 * pad < kernel) {
        throw GeometryError(std::string("kernel extent ") + std::to_string(kernel) + " exceeds padded " + axis + " " +
                            std::to_string(in + 2 * pad));
    }
    return (in + 2 * pad - kernel) / stride + 1;
}

std::size_t conv_transpose_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad,
                                      const char* axis) {
    if (stride == 0) throw GeometryError(std::string("stride along ") + axis + " must be >= 1");
    const long long out = static_cast<long long>((in - 1) * stride) - 2 * static_cast<long long>(pad) +
                          static_cast<long long>(kernel);
    if (out < 1) {
        throw GeometryError(std::string("transposed convolution produces empty ") + axis + " (" + std::to_string(out) +
                            ")");
    }
    return static_cast<std::size_t>(out);
}

template <typename T>
void ConvParamsT<T>::validate() const {
    if (weights.rank() != 4) throw ShapeError("convolution weights must be rank 4, got " + shape_str(weights.shape()));
    if (stride[0] == 0 || stride[1] == 0) throw GeometryError("convolution stride must be >= 1");
    if (bias && (bias->rank() != 1)) throw ShapeError("bias must be rank 1, got " + shape_str(bias->shape()));
}

template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const ConvParamsT<T>& params) {
    params.validate();
    require_rank4(input, "conv2d input");
    const std::size_t n = input.dim(0), c_in = input.dim(1);
    const std::size_t c_out = params.weights.dim(0);
    if (params.weights.dim(1) != c_in) {
        throw ShapeError("conv2d: input channel axis 1 has " + std::to_string(c_in) + " but weights expect " +
                         std::to_string(params.weights.dim(1)));
    }
    if (params.bias && params.bias->size() != c_out) {
        throw ShapeError("conv2d: bias length " + std::to_string(params.bias->size()) + " != c_out " +
                         std::to_string(c_out));
    }
    const Geometry g = conv_geometry(c_in, input.dim(2), input.dim(3), params);
    const std::size_t kk = c_in * g.k_h * g.k_w, spatial = g.out_h * g.out_w;
    TensorT<T> out({n, c_out, g.out_h, g.out_w});
    const bool pointwise = is_pointwise(g);
    std::vector<T>& col = scratch<T>(pointwise ? 0 : kk * spatial);
    for (std::size_t b = 0; b < n; ++b) {
        const T* img = input.data() + b * c_in * g.in_h * g.in_w;
        const T* rhs = img;
        if (!pointwise) {
            im2col(img, g, col.data());
            rhs = col.data();
        }
        detail::gemm<T>(c_out, spatial, kk, params.weights.data(), kk, rhs, spatial, out.data() + b * c_out * spatial,
                        spatial, false);
    }
    add_bias(out, params.bias);
    return out;
}

template <typename T>
ConvGradsT<T> conv2d_backward(const TensorT<T>& input, const ConvParamsT<T>& params, const TensorT<T>& grad_out) {
    params.validate();
    require_rank4(input, "conv2d input");
    require_rank4(grad_out, "conv2d grad_out");
    const std::size_t n = input.dim(0), c_in = input.dim(1), c_out = params.weights.dim(0);
    if (params.weights.dim(1) != c_in) throw ShapeError("conv2d_backward: input channel axis 1 mismatch");
    const Geometry g = conv_geometry(c_in, input.dim(2), input.dim(3), params);
    require_same_shape(grad_out.shape(), Shape{n, c_out, g.out_h, g.out_w}, "conv2d_backward grad_out");

    const std::size_t kk = c_in * g.k_h * g.k_w, spatial = g.out_h * g.out_w;
    ConvGradsT<T> grads{TensorT<T>(input.shape()), TensorT<T>(params.weights.shape()), std::nullopt};
    const TensorT<T> w_t = transpose2d(params.weights.data(), c_out, kk);
    std::vector<T> gcol(kk * spatial);
    std::vector<T> rows(spatial * kk);
    for (std::size_t b = 0; b < n; ++b) {
        const T* img = input.data() + b * c_in * g.in_h * g.in_w;
        const T* gout = grad_out.data() + b * c_out * spatial;
        im2row(img, g, rows.data());
        detail::gemm<T>(c_out, kk, spatial, gout, spatial, rows.data(), kk, grads.grad_weights.data(), kk, b > 0);
        detail::gemm<T>(kk, spatial, c_out, w_t.data(), c_out, gout, spatial, gcol.data(), spatial, false);
        col2im(gcol.data(), g, grads.grad_input.data() + b * c_in * g.in_h * g.in_w);
    }
    grads.grad_bias = bias_grad(grad_out, params.bias.has_value());
    return grads;
}

template <typename T>
TensorT<T> conv_transpose2d_forward(const TensorT<T>& input, const ConvParamsT<T>& params) {
    params.validate();
    require_rank4(input, "conv_transpose2d input");
    const std::size_t n = input.dim(0), c_in = input.dim(1);
    if (params.weights.dim(0) != c_in) {
        throw ShapeError("conv_transpose2d: input channel axis 1 has " + std::to_string(c_in) + " but weights axis 0 is " +
                         std::to_string(params.weights.dim(0)));
    }
    const std::size_t c_out = params.weights.dim(1);
    if (params.bias && params.bias->size() != c_out) throw ShapeError("conv_transpose2d: bias length != c_out");
    const Pair k = params.kernel();
    const std::size_t out_h = conv_transpose_out_extent(input.dim(2), k[0], params.stride[0], params.padding[0], "height");
    const std::size_t out_w = conv_transpose_out_extent(input.dim(3), k[1], params.stride[1], params.padding[1], "width");
    const Geometry g = conv_geometry(c_out, out_h, out_w, params);
    if (g.out_h != input.dim(2) || g.out_w != input.dim(3)) {
        throw GeometryError("conv_transpose2d geometry is not invertible for this input");
    }
    const std::size_t kk = c_out * g.k_h * g.k_w, spatial = input.dim(2) * input.dim(3);
    const TensorT<T> w_t = transpose2d(params.weights.data(), c_in, kk);
    TensorT<T> out({n, c_out, out_h, out_w});
    std::vector<T>& col = scratch<T>(kk * spatial);
    for (std::size_t b = 0; b < n; ++b) {
        detail::gemm<T>(kk, spatial, c_in, w_t.data(), c_in, input.data() + b * c_in * spatial, spatial, col.data(),
                        spatial, false);
        col2im(col.data(), g, out.data() + b * c_out * out_h * out_w);
    }
    add_bias(out, params.bias);
    return out;
}

template <typename T>
ConvGradsT<T> conv_transpose2d_backward(const TensorT<T>& input, const ConvParamsT<T>& params,
                                        const TensorT<T>& grad_out) {
    params.validate();
    require_rank4(input, "conv_transpose2d input");
    require_rank4(grad_out, "conv_transpose2d grad_out");
    const std::size_t n = input.dim(0), c_in = input.dim(1), c_out = params.weights.dim(1);
    if (params.weights.dim(0) != c_in) throw ShapeError("conv_transpose2d_backward: input channel axis 1 mismatch");
    const Pair k = params.kernel();
    const std::size_t out_h = conv_transpose_out_extent(input.dim(2), k[0], params.stride[0], params.padding[0], "height");
    const std::size_t out_w = conv_transpose_out_extent(input.dim(3), k[1], params.stride[1], params.padding[1], "width");
    require_same_shape(grad_out.shape(), Shape{n, c_out, out_h, out_w}, "conv_transpose2d_backward grad_out");
    const Geometry g = conv_geometry(c_out, out_h, out_w, params);
    const std::size_t kk = c_out * g.k_h * g.k_w, spatial = input.dim(2) * input.dim(3);

    ConvGradsT<T> grads{TensorT<T>(input.shape()), TensorT<T>(params.weights.shape()), std::nullopt};
    std::vector<T> gcol(kk * spatial);
    std::vector<T> rows(spatial * kk);
    for (std::size_t b = 0; b < n; ++b) {
        const T* gout = grad_out.data() + b * c_out * out_h * out_w;
        const T* x = input.data() + b * c_in * spatial;
        im2col(gout, g, gcol.data());
        im2row(gout, g, rows.data());
        detail::gemm<T>(c_in, spatial, kk, params.weights.data(), kk, gcol.data(), spatial,
                        grads.grad_input.data() + b * c_in * spatial, spatial, false);
        detail::gemm<T>(c_in, kk, spatial, x, spatial, rows.data(), kk, grads.grad_weights.data(), kk, b > 0);
    }
    grads.grad_bias = bias_grad(grad_out, params.bias.has_value());
    return grads;
}

template <typename T>
BatchNormParamsT<T> BatchNormParamsT<T>::identity(std::size_t channels) {
    BatchNormParamsT<T> p;
    p.gamma = TensorT<T>({channels}, T{1});
    p.beta = TensorT<T>({channels}, T{0});
    p.running_mean = TensorT<T>({channels}, T{0});
    p.running_var = TensorT<T>({channels}, T{1});
    return p;
}

template <typename T>
void BatchNormParamsT<T>::validate() const {
    const std::size_t c = gamma.size();
    if (beta.size() != c || running_mean.size() != c || running_var.size() != c) {
        throw ShapeError("batchnorm parameter vectors must share length " + std::to_string(c));
    }
    if (!(epsilon > 0.0)) throw std::invalid_argument("batchnorm epsilon must be > 0");
    if (!(momentum > 0.0 && momentum < 1.0)) throw std::invalid_argument("batchnorm momentum must be in (0, 1)");
    for (std::size_t i = 0; i < c; ++i) {
        if (running_var[i] < T{0}) throw std::invalid_argument("batchnorm running_var must be >= 0");
    }
}

template <typename T>
BatchNormResultT<T> batchnorm_forward(const TensorT<T>& input, const BatchNormParamsT<T>& params, bool training) {
    params.validate();
    require_rank4(input, "batchnorm input");
    const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
    if (c != params.channels()) {
        throw ShapeError("batchnorm: channel axis 1 has " + std::to_string(c) + " but parameters have " +
                         std::to_string(params.channels()));
    }
    BatchNormResultT<T> r{TensorT<T>(input.shape()), TensorT<T>(input.shape()), TensorT<T>({c}),
                          params.running_mean, params.running_var, training};
    const double count = static_cast<double>(n * hw);
    for (std::size_t ch = 0; ch < c; ++ch) {
        double mean = 0.0, var = 0.0;
        if (training) {
            for (std::size_t b = 0; b < n; ++b) {
                const T* x = input.data() + (b * c + ch) * hw;
                for (std::size_t i = 0; i < hw; ++i) mean += x[i];
            }
            mean /= count;
            for (std::size_t b = 0; b < n; ++b) {
                const T* x = input.data() + (b * c + ch) * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                    const double d = x[i] - mean;
                    var += d * d;
                }
            }
            var /= count;
            const double unbiased = count > 1.0 ? var * count / (count - 1.0) : var;
            r.running_mean[ch] = static_cast<T>((1.0 - params.momentum) * params.running_mean[ch] + params.momentum * mean);
            r.running_var[ch] = static_cast<T>((1.0 - params.momentum) * params.running_var[ch] + params.momentum * unbiased);
        } else {
            mean = params.running_mean[ch];
            var = params.running_var[ch];
        }
        const T inv_std = static_cast<T>(1.0 / std::sqrt(var + params.epsilon));
        const T m = static_cast<T>(mean);
        r.inv_std[ch] = inv_std;
        const T gamma = params.gamma[ch], beta = params.beta[ch];
        for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = (b * c + ch) * hw;
            const T* x = input.data() + off;
            T* xh = r.normalized.data() + off;
            T* y = r.output.data() + off;
            for (std::size_t i = 0; i < hw; ++i) {
                xh[i] = (x[i] - m) * inv_std;
                y[i] = gamma * xh[i] + beta;
            }
        }
    }
    return r;
}

template <typename T>
BatchNormGradsT<T> batchnorm_backward(const BatchNormResultT<T>& fwd, const BatchNormParamsT<T>& params,
                                      const TensorT<T>& grad_out) {
    require_same_shape(grad_out.shape(), fwd.output.shape(), "batchnorm_backward grad_out");
    const std::size_t n = grad_out.dim(0), c = grad_out.dim(1), hw = grad_out.dim(2) * grad_out.dim(3);
    BatchNormGradsT<T> g{TensorT<T>(grad_out.shape()), TensorT<T>({c}), TensorT<T>({c})};
    const double count = static_cast<double>(n * hw);
    for (std::size_t ch = 0; ch < c; ++ch) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                sum_g += grad_out[off + i];
                sum_gx += static_cast<double>(grad_out[off + i]) * fwd.normalized[off + i];
            }
        }
        g.grad_gamma[ch] = static_cast<T>(sum_gx);
        g.grad_beta[ch] = static_cast<T>(sum_g);
        const double scale = static_cast<double>(params.gamma[ch]) * fwd.inv_std[ch];
        for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                double v;
                if (fwd.training) {
                    v = scale * (grad_out[off + i] - sum_g / count - fwd.normalized[off + i] * sum_gx / count);
                } else {
                    v = scale * grad_out[off + i];
                }
                g.grad_input[off + i] = static_cast<T>(v);
            }
        }
    }
    return g;
}

std::string to_string(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::identity: return "identity";
        case ActivationKind::leaky_relu: return "leaky_relu";
        case ActivationKind::tanh: return "tanh";
    }
    return "identity";
}

ActivationKind activation_kind_from_string(const std::string& name) {
    if (name == "identity" || name == "none") return ActivationKind::identity;
    if (name == "leaky_relu") return ActivationKind::leaky_relu;
    if (name == "tanh") return ActivationKind::tanh;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

template <typename T>
TensorT<T> activation_forward(const TensorT<T>& input, Activation act) {
    TensorT<T> out = input;
    switch (act.kind) {
        case ActivationKind::identity: break;
        case ActivationKind::leaky_relu: {
            const T slope = static_cast<T>(act.slope);
            for (auto& v : out.values()) v = v > T{0} ? v : slope * v;
            break;
        }
        case ActivationKind::tanh:
            for (auto& v : out.values()) v = std::tanh(v);
            break;
    }
    return out;
}

template <typename T>
TensorT<T> activation_backward(const TensorT<T>& input, const TensorT<T>& output, const TensorT<T>& grad_out,
                               Activation act) {
    require_same_shape(grad_out.shape(), input.shape(), "activation_backward grad_out");
    TensorT<T> g = grad_out;
    switch (act.kind) {
        case ActivationKind::identity: break;
        case ActivationKind::leaky_relu: {
            const T slope = static_cast<T>(act.slope);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = input[i] > T{0} ? g[i] : slope * g[i];
            break;
        }
        case ActivationKind::tanh:
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = g[i] * (T{1} - output[i] * output[i]);
            break;
    }
    return g;
}

template <typename T>
TensorT<T> center_crop_forward(const TensorT<T>& input, Pair size) {
    require_rank4(input, "center_crop input");
    const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    if (size[0] > h || size[1] > w || size[0] == 0 || size[1] == 0) {
        throw GeometryError("center_crop target " + shape_str({size[0], size[1]}) + " does not fit input " +
                            shape_str(input.shape()));
    }
    const std::size_t oy = (h - size[0]) / 2, ox = (w - size[1]) / 2;
    TensorT<T> out({n, c, size[0], size[1]});
    for (std::size_t p = 0; p < n * c; ++p) {
        for (std::size_t y = 0; y < size[0]; ++y) {
            const T* src = input.data() + (p * h + oy + y) * w + ox;
            std::copy(src, src + size[1], out.data() + (p * size[0] + y) * size[1]);
        }
    }
    return out;
}

template <typename T>
TensorT<T> center_crop_backward(const Shape& input_shape, const TensorT<T>& grad_out) {
    TensorT<T> g(input_shape);
    const std::size_t n = input_shape[0], c = input_shape[1], h = input_shape[2], w = input_shape[3];
    const std::size_t ch = grad_out.dim(2), cw = grad_out.dim(3);
    const std::size_t oy = (h - ch) / 2, ox = (w - cw) / 2;
    for (std::size_t p = 0; p < n * c; ++p) {
        for (std::size_t y = 0; y < ch; ++y) {
            const T* src = grad_out.data() + (p * ch + y) * cw;
            std::copy(src, src + cw, g.data() + (p * h + oy + y) * w + ox);
        }
    }
    return g;
}

template <typename T>
LossT<T> mae_loss(const TensorT<T>& pred, const TensorT<T>& target) {
    require_same_shape(pred.shape(), target.shape(), "mae_loss");
    LossT<T> r{0.0, TensorT<T>(pred.shape())};
    const double count = static_cast<double>(pred.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
        sum += std::abs(d);
        r.grad[i] = static_cast<T>(d > 0.0 ? 1.0 / count : (d < 0.0 ? -1.0 / count : 0.0));
    }
    r.loss = sum / count;
    return r;
}

#define EINV_INSTANTIATE(T)                                                                                          \
    template struct ConvParamsT<T>;                                                                                  \
    template struct BatchNormParamsT<T>;                                                                             \
    template TensorT<T> conv2d_forward(const TensorT<T>&, const ConvParamsT<T>&);                                    \
    template ConvGradsT<T> conv2d_backward(const TensorT<T>&, const ConvParamsT<T>&, const TensorT<T>&);             \
    template TensorT<T> conv_transpose2d_forward(const TensorT<T>&, const ConvParamsT<T>&);                          \
    template ConvGradsT<T> conv_transpose2d_backward(const TensorT<T>&, const ConvParamsT<T>&, const TensorT<T>&);   \
    template BatchNormResultT<T> batchnorm_forward(const TensorT<T>&, const BatchNormParamsT<T>&, bool);             \
    template BatchNormGradsT<T> batchnorm_backward(const BatchNormResultT<T>&, const BatchNormParamsT<T>&,           \
                                                   const TensorT<T>&);                                               \
    template TensorT<T> activation_forward(const TensorT<T>&, Activation);                                           \
    template TensorT<T> activation_backward(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&, Activation);    \
    template TensorT<T> center_crop_forward(const TensorT<T>&, Pair);                                                \
    template TensorT<T> center_crop_backward(const Shape&, const TensorT<T>&);                                       \
    template LossT<T> mae_loss(const TensorT<T>&, const TensorT<T>&);

EINV_INSTANTIATE(float)
EINV_INSTANTIATE(double)

#undef EINV_INSTANTIATE

}  // namespace einv
