#include "wimpute/synthetic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace wimpute {

DataMatrix generate_synthetic(const SyntheticDatasetSpec& spec) {
    if (spec.n < 1 || spec.d < 2 || spec.latent < 1) throw std::invalid_argument("generate_synthetic: bad shape");
    if (spec.noise < 0.0) throw std::invalid_argument("generate_synthetic: noise must be nonnegative");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    Matrix loadings(spec.latent, spec.d);
    const double scale = 1.0 / std::sqrt(static_cast<double>(spec.latent));
    for (Index r = 0; r < spec.latent; ++r) {
        for (Index c = 0; c < spec.d; ++c) loadings(r, c) = normal(rng) * scale;
    }
    Matrix factors(spec.n, spec.latent);
    for (Index k = 0; k < spec.n; ++k) {
        for (Index r = 0; r < spec.latent; ++r) factors(k, r) = normal(rng);
    }
    const Matrix projected = factors * loadings;
    Matrix x(spec.n, spec.d);
    for (Index k = 0; k < spec.n; ++k) {
        for (Index j = 0; j < spec.d; ++j) {
            const double l = projected(k, j);
            const double sign = (j % 2 == 0) ? 1.0 : -1.0;
            x(k, j) = sign * (l + spec.nonlinearity * (l * l - 1.0)) + spec.noise * normal(rng);
        }
    }
    return DataMatrix(std::move(x), default_column_names(spec.d));
}

}  // namespace wimpute
