#pragma once

#include "taxoenrich/nn/tensor.hpp"

namespace taxoenrich::nn {

// Neural tensor network: score = w . tanh(u^T W[1:k] v + V [u; v] + b).
template <typename Scalar>
struct NtnParams {
    using scalar_type = Scalar;

    std::vector<Matrix<Scalar>> bilinear;  // k slices, d_u x d_v
    Matrix<Scalar> linear;                 // k x (d_u + d_v)
    Vector<Scalar> bias;                   // k
    Vector<Scalar> output;                 // k

    static NtnParams zeros(int u_dim, int v_dim, int slices);
    static NtnParams random(int u_dim, int v_dim, int slices, Rng& rng);

    int slices() const { return static_cast<int>(bilinear.size()); }
    int u_dim() const { return bilinear.empty() ? 0 : static_cast<int>(bilinear.front().rows()); }
    int v_dim() const { return bilinear.empty() ? 0 : static_cast<int>(bilinear.front().cols()); }

    template <class Self, class F>
    static void visit(Self& self, F&& f) {
        for (std::size_t j = 0; j < self.bilinear.size(); ++j) f("bilinear." + std::to_string(j), self.bilinear[j]);
        f("linear", self.linear);
        f("bias", self.bias);
        f("output", self.output);
    }
};

template <typename Scalar>
struct NtnOutput {
    Scalar score = 0;
    Vector<Scalar> activation;  // tanh(h), length k
};

template <typename Scalar>
struct NtnTape {
    Vector<Scalar> u;
    Vector<Scalar> v;
    Vector<Scalar> activation;
};

template <typename Scalar>
NtnOutput<Scalar> ntn_forward(const NtnParams<Scalar>& params, const Vector<Scalar>& u, const Vector<Scalar>& v,
                              NtnTape<Scalar>* tape = nullptr);

// d_score flows through the output weights; d_activation is any additional
// gradient on tanh(h) (the primal scorer reads the activations directly).
// Accumulates into `grads`; writes input gradients when requested.
template <typename Scalar>
void ntn_backward(const NtnParams<Scalar>& params, const NtnTape<Scalar>& tape, Scalar d_score,
                  const Vector<Scalar>& d_activation, NtnParams<Scalar>& grads, Vector<Scalar>* d_u,
                  Vector<Scalar>* d_v);

}  // namespace taxoenrich::nn
