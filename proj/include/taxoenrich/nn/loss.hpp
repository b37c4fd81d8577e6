#pragma once

namespace taxoenrich::nn {

template <typename Scalar>
struct BceResult {
    Scalar loss;
    Scalar d_logit;
};

// Binary cross-entropy on a logit, in softplus form. Throws NumericError for a
// non-finite logit and Error for a label other than 0 or 1.
template <typename Scalar>
BceResult<Scalar> bce_with_logits(Scalar logit, int label);

template <typename Scalar>
Scalar sigmoid(Scalar x);

}  // namespace taxoenrich::nn
