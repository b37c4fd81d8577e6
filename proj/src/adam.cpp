#include "taxoenrich/nn/adam.hpp"

#include <cmath>

namespace taxoenrich::nn {

template <typename Scalar>
AdamState<Scalar>::AdamState(std::span<const TensorRef<Scalar>> params, AdamOptions opts) : options(opts) {
    first_moment.reserve(params.size());
    second_moment.reserve(params.size());
    for (const auto& p : params) {
        first_moment.push_back(Matrix<Scalar>::Zero(p.rows, p.cols));
        second_moment.push_back(Matrix<Scalar>::Zero(p.rows, p.cols));
    }
}

template <typename Scalar>
void adam_step(AdamState<Scalar>& state, std::span<const TensorRef<Scalar>> params,
               std::span<const TensorRef<Scalar>> grads) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
        throw DimensionError("Adam: parameter, gradient and state block counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& m = state.first_moment[i];
        if (params[i].rows != grads[i].rows || params[i].cols != grads[i].cols || m.rows() != params[i].rows ||
            m.cols() != params[i].cols) {
            throw DimensionError("Adam: shape mismatch in block '" + params[i].name + "'");
        }
        if (!grads[i].map().allFinite()) throw NumericError("Adam: non-finite gradient in block '" + grads[i].name + "'");
    }
    ++state.step;
    const auto& o = state.options;
    const double t = static_cast<double>(state.step);
    const auto bc1 = static_cast<Scalar>(1.0 - std::pow(o.beta1, t));
    const auto bc2 = static_cast<Scalar>(1.0 - std::pow(o.beta2, t));
    const auto b1 = static_cast<Scalar>(o.beta1);
    const auto b2 = static_cast<Scalar>(o.beta2);
    const auto lr = static_cast<Scalar>(o.lr);
    const auto eps = static_cast<Scalar>(o.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto g = grads[i].map().array();
        auto m = state.first_moment[i].array();
        auto v = state.second_moment[i].array();
        m = b1 * m + (Scalar(1) - b1) * g;
        v = b2 * v + (Scalar(1) - b2) * g.square();
        params[i].map().array() -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
    }
}

template struct AdamState<float>;
template struct AdamState<double>;
template struct AdamState<long double>;
template void adam_step<float>(AdamState<float>&, std::span<const TensorRef<float>>, std::span<const TensorRef<float>>);
template void adam_step<double>(AdamState<double>&, std::span<const TensorRef<double>>,
                                std::span<const TensorRef<double>>);
template void adam_step<long double>(AdamState<long double>&, std::span<const TensorRef<long double>>,
                                     std::span<const TensorRef<long double>>);

}  // namespace taxoenrich::nn
