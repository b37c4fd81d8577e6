#pragma once

#include <cstdint>
#include <span>

#include "taxoenrich/nn/tensor.hpp"

namespace taxoenrich::nn {

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
    AdamOptions options;
    std::uint64_t step = 0;
    std::vector<Matrix<Scalar>> first_moment;
    std::vector<Matrix<Scalar>> second_moment;

    AdamState() = default;
    AdamState(std::span<const TensorRef<Scalar>> params, AdamOptions opts);
};

// One bias-corrected Adam update. Throws DimensionError on a layout mismatch
// and NumericError on a non-finite gradient (before touching any parameter).
template <typename Scalar>
void adam_step(AdamState<Scalar>& state, std::span<const TensorRef<Scalar>> params,
               std::span<const TensorRef<Scalar>> grads);

}  // namespace taxoenrich::nn
