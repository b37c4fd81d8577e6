#include "taxoenrich/nn/ntn.hpp"

namespace taxoenrich::nn {

template <typename Scalar>
NtnParams<Scalar> NtnParams<Scalar>::zeros(int u_dim, int v_dim, int slices) {
    if (u_dim <= 0 || v_dim <= 0 || slices <= 0) throw DimensionError("NTN dimensions must be positive");
    NtnParams p;
    p.bilinear.assign(static_cast<std::size_t>(slices), Matrix<Scalar>::Zero(u_dim, v_dim));
    p.linear = Matrix<Scalar>::Zero(slices, u_dim + v_dim);
    p.bias = Vector<Scalar>::Zero(slices);
    p.output = Vector<Scalar>::Zero(slices);
    return p;
}

template <typename Scalar>
NtnParams<Scalar> NtnParams<Scalar>::random(int u_dim, int v_dim, int slices, Rng& rng) {
    auto p = zeros(u_dim, v_dim, slices);
    for (auto& w : p.bilinear) init_uniform(w, v_dim, rng);
    init_uniform(p.linear, u_dim + v_dim, rng);
    init_uniform(p.output, slices, rng);
    return p;
}

template <typename Scalar>
NtnOutput<Scalar> ntn_forward(const NtnParams<Scalar>& params, const Vector<Scalar>& u, const Vector<Scalar>& v,
                              NtnTape<Scalar>* tape) {
    const Eigen::Index du = params.u_dim();
    const Eigen::Index dv = params.v_dim();
    if (u.size() != du || v.size() != dv) {
        throw DimensionError("NTN expects inputs of size (" + std::to_string(du) + ", " + std::to_string(dv) +
                             "), got (" + std::to_string(u.size()) + ", " + std::to_string(v.size()) + ")");
    }
    const int k = params.slices();
    Vector<Scalar> pre = params.bias;
    pre.noalias() += params.linear.leftCols(du) * u;
    pre.noalias() += params.linear.rightCols(dv) * v;
    for (int j = 0; j < k; ++j) pre[j] += u.dot(params.bilinear[static_cast<std::size_t>(j)] * v);
    NtnOutput<Scalar> out{0, pre.array().tanh().matrix()};
    out.score = params.output.dot(out.activation);
    if (tape) *tape = {u, v, out.activation};
    return out;
}

template <typename Scalar>
void ntn_backward(const NtnParams<Scalar>& params, const NtnTape<Scalar>& tape, Scalar d_score,
                  const Vector<Scalar>& d_activation, NtnParams<Scalar>& grads, Vector<Scalar>* d_u,
                  Vector<Scalar>* d_v) {
    const Eigen::Index du = params.u_dim();
    const Eigen::Index dv = params.v_dim();
    grads.output += d_score * tape.activation;
    Vector<Scalar> d_act = d_score * params.output;
    if (d_activation.size() != 0) d_act += d_activation;
    Vector<Scalar> d_pre = d_act.cwiseProduct((Scalar(1) - tape.activation.array().square()).matrix());

    grads.bias += d_pre;
    grads.linear.leftCols(du).noalias() += d_pre * tape.u.transpose();
    grads.linear.rightCols(dv).noalias() += d_pre * tape.v.transpose();
    if (d_u) d_u->noalias() = params.linear.leftCols(du).transpose() * d_pre;
    if (d_v) d_v->noalias() = params.linear.rightCols(dv).transpose() * d_pre;
    for (int j = 0; j < params.slices(); ++j) {
        const auto& w = params.bilinear[static_cast<std::size_t>(j)];
        grads.bilinear[static_cast<std::size_t>(j)].noalias() += d_pre[j] * tape.u * tape.v.transpose();
        if (d_u) d_u->noalias() += d_pre[j] * (w * tape.v);
        if (d_v) d_v->noalias() += d_pre[j] * (w.transpose() * tape.u);
    }
}

#define TAXOENRICH_INSTANTIATE_NTN(S)                                                                         \
    template struct NtnParams<S>;                                                                             \
    template NtnOutput<S> ntn_forward<S>(const NtnParams<S>&, const Vector<S>&, const Vector<S>&, NtnTape<S>*); \
    template void ntn_backward<S>(const NtnParams<S>&, const NtnTape<S>&, S, const Vector<S>&, NtnParams<S>&,   \
                                  Vector<S>*, Vector<S>*);

TAXOENRICH_INSTANTIATE_NTN(float)
TAXOENRICH_INSTANTIATE_NTN(double)
TAXOENRICH_INSTANTIATE_NTN(long double)

}  // namespace taxoenrich::nn
