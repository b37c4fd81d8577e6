#include "taxoenrich/nn/lstm.hpp"

namespace taxoenrich::nn {

namespace {

template <typename Derived>
auto logistic(const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    return (Scalar(1) + (-x.array()).exp()).inverse();
}

}  // namespace

template <typename Scalar>
LstmParams<Scalar> LstmParams<Scalar>::zeros(int input_dim, int hidden_dim) {
    if (input_dim <= 0 || hidden_dim <= 0) throw DimensionError("LSTM dimensions must be positive");
    return {Matrix<Scalar>::Zero(4 * hidden_dim, input_dim), Matrix<Scalar>::Zero(4 * hidden_dim, hidden_dim),
            Vector<Scalar>::Zero(4 * hidden_dim)};
}

template <typename Scalar>
LstmParams<Scalar> LstmParams<Scalar>::random(int input_dim, int hidden_dim, Rng& rng) {
    auto p = zeros(input_dim, hidden_dim);
    init_uniform(p.input_weights, input_dim, rng);
    init_uniform(p.recurrent_weights, hidden_dim, rng);
    return p;
}

template <typename Scalar>
Vector<Scalar> lstm_forward(const LstmParams<Scalar>& params, const Matrix<Scalar>& inputs, LstmTape<Scalar>* tape) {
    const Eigen::Index h = params.hidden_dim();
    const Eigen::Index steps = inputs.cols();
    if (steps > 0 && inputs.rows() != params.input_dim()) {
        throw DimensionError("LSTM input has " + std::to_string(inputs.rows()) + " rows, expected " +
                             std::to_string(params.input_dim()));
    }
    Vector<Scalar> hidden = Vector<Scalar>::Zero(h);
    Vector<Scalar> cell = Vector<Scalar>::Zero(h);
    if (tape) {
        tape->inputs = inputs;
        tape->gates.resize(4 * h, steps);
        tape->cells.setZero(h, steps + 1);
        tape->hiddens.setZero(h, steps + 1);
    }
    Vector<Scalar> z(4 * h);
    for (Eigen::Index t = 0; t < steps; ++t) {
        z.noalias() = params.input_weights * inputs.col(t);
        z.noalias() += params.recurrent_weights * hidden;
        z += params.bias;
        z.segment(0, h) = logistic(z.segment(0, h));
        z.segment(h, h) = logistic(z.segment(h, h));
        z.segment(2 * h, h) = z.segment(2 * h, h).array().tanh();
        z.segment(3 * h, h) = logistic(z.segment(3 * h, h));
        cell = z.segment(h, h).cwiseProduct(cell) + z.segment(0, h).cwiseProduct(z.segment(2 * h, h));
        hidden = z.segment(3 * h, h).cwiseProduct(cell.array().tanh().matrix());
        if (tape) {
            tape->gates.col(t) = z;
            tape->cells.col(t + 1) = cell;
            tape->hiddens.col(t + 1) = hidden;
        }
    }
    return hidden;
}

template <typename Scalar>
Matrix<Scalar> lstm_backward(const LstmParams<Scalar>& params, const LstmTape<Scalar>& tape,
                             const Vector<Scalar>& d_hidden, LstmParams<Scalar>& grads) {
    const Eigen::Index h = params.hidden_dim();
    const Eigen::Index steps = tape.inputs.cols();
    Matrix<Scalar> d_inputs = Matrix<Scalar>::Zero(params.input_dim(), steps);
    Vector<Scalar> dh = d_hidden;
    Vector<Scalar> dc = Vector<Scalar>::Zero(h);
    Vector<Scalar> dz(4 * h);
    for (Eigen::Index t = steps - 1; t >= 0; --t) {
        auto gates = tape.gates.col(t);
        auto i = gates.segment(0, h).array();
        auto f = gates.segment(h, h).array();
        auto g = gates.segment(2 * h, h).array();
        auto o = gates.segment(3 * h, h).array();
        auto c_prev = tape.cells.col(t).array();
        auto tc = tape.cells.col(t + 1).array().tanh().eval();

        dc.array() += dh.array() * o * (Scalar(1) - tc.square());
        dz.segment(0, h).array() = dc.array() * g * i * (Scalar(1) - i);
        dz.segment(h, h).array() = dc.array() * c_prev * f * (Scalar(1) - f);
        dz.segment(2 * h, h).array() = dc.array() * i * (Scalar(1) - g.square());
        dz.segment(3 * h, h).array() = dh.array() * tc * o * (Scalar(1) - o);
        dc.array() *= f;

        grads.input_weights.noalias() += dz * tape.inputs.col(t).transpose();
        grads.recurrent_weights.noalias() += dz * tape.hiddens.col(t).transpose();
        grads.bias += dz;
        d_inputs.col(t).noalias() = params.input_weights.transpose() * dz;
        dh.noalias() = params.recurrent_weights.transpose() * dz;
    }
    return d_inputs;
}

#define TAXOENRICH_INSTANTIATE_LSTM(S)                                                                   \
    template struct LstmParams<S>;                                                                       \
    template Vector<S> lstm_forward<S>(const LstmParams<S>&, const Matrix<S>&, LstmTape<S>*);            \
    template Matrix<S> lstm_backward<S>(const LstmParams<S>&, const LstmTape<S>&, const Vector<S>&, LstmParams<S>&);

TAXOENRICH_INSTANTIATE_LSTM(float)
TAXOENRICH_INSTANTIATE_LSTM(double)
TAXOENRICH_INSTANTIATE_LSTM(long double)

}  // namespace taxoenrich::nn
