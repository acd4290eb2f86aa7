#pragma once

#include <cstdint>
#include <random>

#include "own/linalg/matrix.hpp"

namespace own {

using Rng = std::mt19937_64;

// Independent stream for (seed, stream) pairs, e.g. (run seed, epoch).
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng, double stddev = 1.0);

// Haar-ish orthogonal n×n matrix: Q factor of a Gaussian matrix.
Matrix random_orthogonal(std::size_t n, Rng& rng);

}  // namespace own
