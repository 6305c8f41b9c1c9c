// SPDX-License-Identifier: Apache-2.0

#include "einv/optim.hpp"

#include <cmath>
#include <string>

namespace einv {

template <typename T>
void adam_step(std::span<TensorT<T>* const> params, std::span<const TensorT<T>* const> grads, AdamStateT<T>& state) {
    if (params.size() != grads.size()) {
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
    }
    const auto& s = state.settings;
    if (!(s.beta1 > 0.0 && s.beta1 < 1.0 && s.beta2 > 0.0 && s.beta2 < 1.0)) {
        throw std::invalid_argument("adam betas must lie in (0, 1)");
    }
    for (std::size_t t = 0; t < params.size(); ++t) {
        require_same_shape(params[t]->shape(), grads[t]->shape(), "adam_step tensor " + std::to_string(t));
        const auto g = grads[t]->values();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!std::isfinite(g[i])) {
                throw NonFiniteError("non-finite gradient in tensor " + std::to_string(t) + " element " +
                                     std::to_string(i) + " at step " + std::to_string(state.step + 1));
            }
        }
    }
    if (state.first_moment.size() != params.size()) {
        state.first_moment.clear();
        state.second_moment.clear();
        for (auto* p : params) {
            state.first_moment.emplace_back(p->shape());
            state.second_moment.emplace_back(p->shape());
        }
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.step));
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto& m = state.first_moment[t];
        auto& v = state.second_moment[t];
        require_same_shape(m.shape(), params[t]->shape(), "adam_step moment " + std::to_string(t));
        auto p = params[t]->values();
        const auto g = grads[t]->values();
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i];
            const double mi = s.beta1 * m[i] + (1.0 - s.beta1) * gi;
            const double vi = s.beta2 * v[i] + (1.0 - s.beta2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double update = s.lr * (mi / bc1) / (std::sqrt(vi / bc2) + s.eps);
            p[i] = static_cast<T>(p[i] - update);
        }
    }
}

template void adam_step<float>(std::span<TensorT<float>* const>, std::span<const TensorT<float>* const>,
                               AdamStateT<float>&);
template void adam_step<double>(std::span<TensorT<double>* const>, std::span<const TensorT<double>* const>,
                                AdamStateT<double>&);

}  // namespace einv
