#include "taxoenrich/nn/loss.hpp"

#include <cmath>

#include "taxoenrich/common.hpp"

namespace taxoenrich::nn {

namespace {

// log(1 + exp(x)) without overflow or loss of precision for large |x|.
template <typename Scalar>
Scalar softplus(Scalar x) {
    return std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

template <typename Scalar>
Scalar sigmoid(Scalar x) {
    if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
    Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
}

template <typename Scalar>
BceResult<Scalar> bce_with_logits(Scalar logit, int label) {
    if (!std::isfinite(logit)) throw NumericError("non-finite logit in binary cross-entropy");
    if (label != 0 && label != 1) throw Error("binary cross-entropy label must be 0 or 1");
    // -log(sigmoid(z)) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z)
    Scalar loss = label == 1 ? softplus(-logit) : softplus(logit);
    return {loss, sigmoid(logit) - static_cast<Scalar>(label)};
}

template float sigmoid<float>(float);
template double sigmoid<double>(double);
template long double sigmoid<long double>(long double);
template BceResult<float> bce_with_logits<float>(float, int);
template BceResult<double> bce_with_logits<double>(double, int);
template BceResult<long double> bce_with_logits<long double>(long double, int);

}  // namespace taxoenrich::nn
