#include "taxoenrich/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace taxoenrich::nn {

template <typename Scalar, typename GradScalar>
GradCheckResult finite_diff_check(const std::function<Scalar()>& loss, std::span<const TensorRef<Scalar>> params,
                                  std::span<const TensorRef<const GradScalar>> analytic,
                                  const GradCheckOptions& options) {
    if (params.size() != analytic.size()) throw DimensionError("gradient check: block counts differ");
    auto eval = [&] {
        Scalar v = loss();
        if (!std::isfinite(static_cast<double>(v))) throw NumericError("gradient check: non-finite loss");
        return v;
    };
    const auto eps = static_cast<Scalar>(options.eps);
    Rng rng(options.seed);
    GradCheckResult result;
    for (std::size_t b = 0; b < params.size(); ++b) {
        const auto& p = params[b];
        if (p.size() != analytic[b].size()) throw DimensionError("gradient check: size mismatch in '" + p.name + "'");
        std::vector<Eigen::Index> coords(static_cast<std::size_t>(p.size()));
        std::iota(coords.begin(), coords.end(), Eigen::Index{0});
        if (options.max_coords_per_tensor && coords.size() > *options.max_coords_per_tensor) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(*options.max_coords_per_tensor);
        }
        for (auto i : coords) {
            const Scalar saved = p.data[i];
            auto at = [&](Scalar offset) {
                p.data[i] = saved + offset;
                Scalar v = eval();
                p.data[i] = saved;
                return v;
            };
            Scalar numeric;
            if (options.stencil == Stencil::TwoPoint) {
                numeric = (at(eps) - at(-eps)) / (2 * eps);
            } else {
                numeric = (-at(2 * eps) + 8 * at(eps) - 8 * at(-eps) + at(-2 * eps)) / (12 * eps);
            }
            const double a = static_cast<double>(analytic[b].data[i]);
            const double n = static_cast<double>(numeric);
            const double denom = std::max({std::abs(a), std::abs(n), 1e-8});
            const double rel = std::abs(a - n) / denom;
            ++result.coords_checked;
            if (result.worst_index < 0 || rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.worst_tensor = p.name;
                result.worst_index = i;
                result.analytic = a;
                result.numeric = n;
            }
        }
    }
    return result;
}

template GradCheckResult finite_diff_check<double, double>(const std::function<double()>&,
                                                           std::span<const TensorRef<double>>,
                                                           std::span<const TensorRef<const double>>,
                                                           const GradCheckOptions&);
template GradCheckResult finite_diff_check<long double, double>(const std::function<long double()>&,
                                                                std::span<const TensorRef<long double>>,
                                                                std::span<const TensorRef<const double>>,
                                                                const GradCheckOptions&);
template GradCheckResult finite_diff_check<long double, float>(const std::function<long double()>&,
                                                               std::span<const TensorRef<long double>>,
                                                               std::span<const TensorRef<const float>>,
                                                               const GradCheckOptions&);
template GradCheckResult finite_diff_check<float, float>(const std::function<float()>&,
                                                         std::span<const TensorRef<float>>,
                                                         std::span<const TensorRef<const float>>,
                                                         const GradCheckOptions&);

}  // namespace taxoenrich::nn
