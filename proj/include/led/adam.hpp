#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "led/kernels.hpp"
#include "led/tensor.hpp"

namespace led {

/// Bias-corrected Adam with no weight decay. Moments are stored per
/// parameter, aligned with the parameter list handed to init().
template <class T>
struct AdamState {
    std::int64_t step = 0;
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T epsilon = T(1e-8);
    std::vector<std::vector<T>> first_moment;
    std::vector<std::vector<T>> second_moment;

    void init(const std::vector<Tensor<T>>& params) {
        if (!(beta1 >= T(0) && beta1 < T(1)) || !(beta2 >= T(0) && beta2 < T(1)) ||
            !(epsilon > T(0)))
            throw DataError("AdamState: invalid hyperparameters");
        step = 0;
        first_moment.clear();
        second_moment.clear();
        for (const auto& p : params) {
            first_moment.emplace_back(p.data().size(), T(0));
            second_moment.emplace_back(p.data().size(), T(0));
        }
    }
};

/// One optimizer step over params; gradients are read from each tensor's
/// grad buffer. Gradients are not cleared here.
template <class T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state, T lr) {
    if (params.size() != state.first_moment.size())
        throw ShapeError("adam_step: state/parameter count mismatch");
    state.step += 1;
    const T bc1 = T(1) - std::pow(state.beta1, static_cast<T>(state.step));
    const T bc2 = T(1) - std::pow(state.beta2, static_cast<T>(state.step));
    const auto& K = kernels::table<T>();
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (state.first_moment[i].size() != p.data().size())
            throw ShapeError("adam_step: moment extent does not match parameter");
        K.adam_update(p.data().data(), p.grad().data(), state.first_moment[i].data(),
                      state.second_moment[i].data(), p.numel(), state.beta1, state.beta2,
                      state.epsilon, lr, bc1, bc2);
    }
}

} // namespace led
