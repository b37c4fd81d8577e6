#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>
#include <vector>

#include "taxoenrich/common.hpp"

namespace taxoenrich::nn {

// Named, non-owning view of one parameter block. Vectors are n x 1.
template <typename Scalar>
struct TensorRef {
    std::string name;
    Scalar* data = nullptr;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;

    using Plain = Matrix<std::remove_const_t<Scalar>>;
    using MapType = Eigen::Map<std::conditional_t<std::is_const_v<Scalar>, const Plain, Plain>>;

    Eigen::Index size() const { return rows * cols; }
    MapType map() const { return {data, rows, cols}; }
};

// Parameter structs expose `template <class Self, class F> static void visit(Self&, F&&)`
// calling f(name, block) for every block in a fixed order.
template <typename Params>
auto tensors(Params& params, const std::string& prefix = {}) {
    using Scalar = typename std::remove_const_t<Params>::scalar_type;
    using Element = std::conditional_t<std::is_const_v<Params>, const Scalar, Scalar>;
    std::vector<TensorRef<Element>> out;
    std::remove_const_t<Params>::visit(params, [&](const std::string& name, auto& block) {
        out.push_back({prefix + name, block.data(), block.rows(), block.cols()});
    });
    return out;
}

template <typename Params>
void set_zero(Params& params) {
    Params::visit(params, [](const std::string&, auto& block) { block.setZero(); });
}

// Same layout, all zeros.
template <typename Params>
Params zeros_like(const Params& params) {
    Params out = params;
    set_zero(out);
    return out;
}

// a += scale * b over every block.
template <typename Params>
void axpy(Params& a, const Params& b, typename Params::scalar_type scale) {
    auto ta = tensors(a);
    auto tb = tensors(b);
    for (std::size_t i = 0; i < ta.size(); ++i) ta[i].map() += scale * tb[i].map();
}

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename Derived>
void init_uniform(Eigen::MatrixBase<Derived>& m, Eigen::Index fan_in, Rng& rng) {
    using Scalar = typename Derived::Scalar;
    double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(dist(rng));
}

}  // namespace taxoenrich::nn
