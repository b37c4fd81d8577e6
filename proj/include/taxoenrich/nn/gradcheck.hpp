#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "taxoenrich/nn/tensor.hpp"

namespace taxoenrich::nn {

enum class Stencil {
    TwoPoint,   // (f(x+e) - f(x-e)) / 2e
    FivePoint,  // fourth-order central difference
};

struct GradCheckOptions {
    double eps = 1e-4;
    Stencil stencil = Stencil::FivePoint;
    // Check at most this many coordinates per tensor (uniformly sampled).
    std::optional<std::size_t> max_coords_per_tensor;
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    double max_rel_error = 0;
    std::string worst_tensor;
    Eigen::Index worst_index = -1;
    double analytic = 0;
    double numeric = 0;
    std::size_t coords_checked = 0;
};

// Compares `analytic` against central differences of `loss` taken by
// perturbing `params` in place (restored afterwards). Relative error per
// coordinate is |a - n| / max(|a|, |n|, 1e-8). The loss may run at a higher
// precision than the analytic gradient. Throws NumericError on a non-finite loss.
template <typename Scalar, typename GradScalar>
GradCheckResult finite_diff_check(const std::function<Scalar()>& loss, std::span<const TensorRef<Scalar>> params,
                                  std::span<const TensorRef<const GradScalar>> analytic,
                                  const GradCheckOptions& options = {});

}  // namespace taxoenrich::nn
