#pragma once

#include "taxoenrich/nn/tensor.hpp"

namespace taxoenrich::nn {

// Single-layer unidirectional LSTM. Gate blocks are stacked in the order
// input, forget, candidate, output.
template <typename Scalar>
struct LstmParams {
    using scalar_type = Scalar;

    Matrix<Scalar> input_weights;      // 4h x d_in
    Matrix<Scalar> recurrent_weights;  // 4h x h
    Vector<Scalar> bias;               // 4h

    static LstmParams zeros(int input_dim, int hidden_dim);
    static LstmParams random(int input_dim, int hidden_dim, Rng& rng);

    int input_dim() const { return static_cast<int>(input_weights.cols()); }
    int hidden_dim() const { return static_cast<int>(recurrent_weights.cols()); }

    template <class Self, class F>
    static void visit(Self& self, F&& f) {
        f("input_weights", self.input_weights);
        f("recurrent_weights", self.recurrent_weights);
        f("bias", self.bias);
    }
};

template <typename Scalar>
struct LstmTape {
    Matrix<Scalar> inputs;   // d_in x T
    Matrix<Scalar> gates;    // 4h x T, post-activation
    Matrix<Scalar> cells;    // h x (T+1), column 0 is the zero initial state
    Matrix<Scalar> hiddens;  // h x (T+1)
};

// Runs the recurrence from a zero state over the columns of `inputs` and
// returns the final hidden state (zero for an empty sequence).
template <typename Scalar>
Vector<Scalar> lstm_forward(const LstmParams<Scalar>& params, const Matrix<Scalar>& inputs,
                            LstmTape<Scalar>* tape = nullptr);

// Accumulates parameter gradients for dLoss/d(final hidden) into `grads`.
// Returns dLoss/d(inputs), d_in x T.
template <typename Scalar>
Matrix<Scalar> lstm_backward(const LstmParams<Scalar>& params, const LstmTape<Scalar>& tape,
                             const Vector<Scalar>& d_hidden, LstmParams<Scalar>& grads);

}  // namespace taxoenrich::nn
