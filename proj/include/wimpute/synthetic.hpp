#pragma once

#include <cstdint>

#include "wimpute/data.hpp"

namespace wimpute {

/// Latent-factor benchmark table. Each column is a noisy random projection
/// L_j of a few standard normal factors, bent by a quadratic term:
///   x_j = s_j * (L_j + nonlinearity * (L_j^2 - 1)) + noise * e_j
/// with s_j alternating +1/-1 across columns. nonlinearity = 0 gives a
/// linear-Gaussian table.
struct SyntheticDatasetSpec {
    Index n = 5000;
    Index d = 10;
    Index latent = 3;
    double nonlinearity = 0.5;
    double noise = 0.1;
    std::uint64_t seed = 0;
};

DataMatrix generate_synthetic(const SyntheticDatasetSpec& spec);

}  // namespace wimpute
