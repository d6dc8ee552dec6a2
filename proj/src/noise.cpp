#include <cmath>
#include <numbers>

#include "led/noise.hpp"

namespace led {

double tukey_lambda_quantile(double p, double lambda) {
    if (!(p > 0.0 && p < 1.0)) throw DataError("tukey_lambda_quantile: p must be in (0,1)");
    if (lambda == 0.0) return std::log(p / (1.0 - p));
    return (std::pow(p, lambda) - std::pow(1.0 - p, lambda)) / lambda;
}

double tukey_lambda_std(double lambda) {
    if (!(lambda > -0.5)) throw DataError("tukey_lambda_std: lambda must be > -0.5");
    // Var = (2/l^2) * (1/(2l+1) - Gamma(l+1)^2 / Gamma(2l+2)); logistic limit
    // pi^2/3 at l = 0. Near zero the closed form cancels catastrophically.
    if (std::abs(lambda) < 1e-5) return std::numbers::pi / std::sqrt(3.0);
    const double g = std::exp(2.0 * std::lgamma(lambda + 1.0) - std::lgamma(2.0 * lambda + 2.0));
    const double var = 2.0 / (lambda * lambda) * (1.0 / (2.0 * lambda + 1.0) - g);
    return std::sqrt(var);
}

} // namespace led
